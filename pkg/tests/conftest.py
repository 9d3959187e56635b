import numpy as np
import pytest

from irsradar.channel import ChannelSet


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, M=3, N=2, K=1, L=1, Q=0, irs_scale=1.0) -> ChannelSet:
    """Unstructured complex Gaussian channels, handy for algebraic identities."""
    return ChannelSet(
        h_t=crandn(rng, L, M),
        h_i=irs_scale * crandn(rng, K, L, N),
        g_t=crandn(rng, Q, M),
        g_i=irs_scale * crandn(rng, K, Q, N),
        D=crandn(rng, K, N, M),
        gamma_tx=np.ones(L + Q, np.int8),
        target_positions=np.zeros((L, 2)),
        gamma_irs=np.ones((K, L + Q), np.int8),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scalar_illumination(h_t, h_i, D, theta_k, t):
    """Loop-by-loop evaluation of |(v^T + sum_k v_k^T Theta_k^H D_k) t|^2.

    Written without any matrix products so it shares no code path with the
    vectorized implementation.
    """
    M = len(t)
    total = 0j
    for m in range(M):
        total += h_t[m] * t[m]
    for k in range(len(theta_k)):
        N = len(theta_k[k])
        for n in range(N):
            acc = 0j
            for m in range(M):
                acc += D[k][n][m] * t[m]
            total += h_i[k][n] * theta_k[k][n].conjugate() * acc
    return abs(total) ** 2


PHASE_GRID_STEP = 1e-3


def phase_grid_oracle(h, a, g=None, b=None, eta=None, step=PHASE_GRID_STEP):
    """Exhaustive search over two unit-modulus phases.

    Maximizes min_l |a_l + conj(theta)^T h_l|^2 subject to
    |b_q + conj(theta)^T g_q|^2 <= eta_q. h is (L, 2), a is (L,).
    Returns (best value, best theta).
    """
    ph = np.exp(1j * np.arange(0.0, 2 * np.pi, step))
    best, arg = -np.inf, None
    chunk = 256
    for i0 in range(0, ph.size, chunk):
        t1 = ph[i0:i0 + chunk]
        val = None
        for l in range(h.shape[0]):
            p = np.abs((a[l] + t1.conj() * h[l, 0])[:, None] + (ph.conj() * h[l, 1])[None, :]) ** 2
            val = p if val is None else np.minimum(val, p)
        if g is not None:
            for q in range(g.shape[0]):
                c = np.abs((b[q] + t1.conj() * g[q, 0])[:, None] + (ph.conj() * g[q, 1])[None, :]) ** 2
                val = np.where(c <= eta[q], val, -np.inf)
        j = np.unravel_index(np.argmax(val), val.shape)
        if val[j] > best:
            best, arg = val[j], np.array([t1[j[0]], ph[j[1]]])
    return best, arg


# -- acceptance reporting -----------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
