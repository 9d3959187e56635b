import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsradar.sdp import (SdpError, SdpProblem, SdpStatus, dump_sdp, load_sdp, psd_factor,
                          sample_gaussian, solve_maxmin_sdp)

from conftest import crandn


def rank_one(rng, n, scale=1.0):
    a = crandn(rng, n)
    return scale * np.outer(a, a.conj())


def homogenized(h, a):
    n = h.size
    H = np.zeros((n + 1, n + 1), complex)
    H[:n, :n] = np.outer(h, h.conj())
    H[:n, n] = h * np.conj(a)
    H[n, :n] = h.conj() * a
    return H


def check_optimal(p, sol):
    assert sol.status is SdpStatus.OPTIMAL
    X = sol.X_opt
    lam = np.linalg.eigvalsh(X)
    assert lam[0] >= -1e-9 * max(np.linalg.norm(X), 1.0)
    assert p.max_violation(X) <= 1e-7
    assert 0 <= sol.duality_gap <= 1e-7 * (1 + abs(sol.objective_value))


def test_identity_objective():
    p = SdpProblem(2, [(np.eye(2), 0.0)], trace_bound=1.0)
    sol = solve_maxmin_sdp(p)
    check_optimal(p, sol)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)


def test_symmetric_split():
    p = SdpProblem(2, [(np.diag([1.0, 0.0]), 0.0), (np.diag([0.0, 1.0]), 0.0)], trace_bound=1.0)
    sol = solve_maxmin_sdp(p)
    check_optimal(p, sol)
    assert sol.objective_value == pytest.approx(0.5, abs=1e-7)
    assert np.allclose(sol.X_opt, np.diag([0.5, 0.5]), atol=1e-6)


def test_unit_diagonal_matches_phase_grid():
    h, a = np.array([1.0, 1.0], complex), 0.0
    p = SdpProblem(3, [(homogenized(h, a), abs(a) ** 2)], unit_diagonal=True)
    sol = solve_maxmin_sdp(p)
    check_optimal(p, sol)
    g = np.arange(0, 2 * np.pi, 1e-3)
    th1, th2 = np.meshgrid(np.exp(1j * g), np.exp(1j * g), indexing="ij")
    grid = np.max(np.abs(a + th1.conj() * h[0] + th2.conj() * h[1]) ** 2)
    assert sol.objective_value == pytest.approx(grid, rel=1e-3)
    assert np.allclose(np.real(np.diag(sol.X_opt)), 1.0, atol=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_matched_filter_limit(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    kappa = 10 ** rng.uniform(-3, 3)
    A = rank_one(rng, n) + (rank_one(rng, n) if seed % 2 else 0)
    sol = solve_maxmin_sdp(SdpProblem(n, [(A, 0.0)], trace_bound=kappa))
    lam, V = np.linalg.eigh(A)
    assert sol.objective_value == pytest.approx(kappa * lam[-1], rel=1e-6)
    if lam[-1] - lam[-2 if n > 1 else -1] > 1e-3 * lam[-1] or n == 1:
        v = V[:, -1]
        assert np.allclose(sol.X_opt, kappa * np.outer(v, v.conj()), atol=1e-5 * kappa)


def random_problem(rng, unit_diagonal):
    n = int(rng.integers(2, 8))
    L, Q = int(rng.integers(1, 4)), int(rng.integers(0, 3))
    if unit_diagonal:
        A = []
        for _ in range(L):
            a = complex(*rng.normal(size=2))
            A.append((homogenized(crandn(rng, n - 1), a), abs(a) ** 2))
        C = []
        for _ in range(Q):
            g, b = crandn(rng, n - 1), 0.3 * complex(*rng.normal(size=2))
            C.append((homogenized(g, b), rng.uniform(0.5, 3) * n - abs(b) ** 2))
        return SdpProblem(n, A, inequality_terms=C, unit_diagonal=True)
    A = [(rank_one(rng, n), 0.0) for _ in range(L)]
    C = [(rank_one(rng, n), 10 ** rng.uniform(-3, 0)) for _ in range(Q)]
    return SdpProblem(n, A, trace_bound=10 ** rng.uniform(-1, 1), inequality_terms=C)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.booleans())
def test_solution_contract(seed, unit):
    p = random_problem(np.random.default_rng(seed), unit)
    sol = solve_maxmin_sdp(p)
    assert sol.status is not SdpStatus.INFEASIBLE
    assert p.max_violation(sol.X_opt) <= 1e-6
    # weak duality: the objective never exceeds the certified dual bound
    assert sol.objective_value <= sol.dual_bound + 1e-6 * (1 + abs(sol.dual_bound))
    if sol.status is SdpStatus.OPTIMAL:
        check_optimal(p, sol)
        if unit:
            assert np.allclose(np.real(np.diag(sol.X_opt)), 1.0, atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_scaling_equivariance(seed):
    rng = np.random.default_rng(100 + seed)
    p = random_problem(rng, False)
    s = 37.5
    q = SdpProblem(p.dim, [(s * A, s * c) for A, c in p.objective_terms],
                   trace_bound=p.trace_bound, inequality_terms=p.inequality_terms)
    a, b = solve_maxmin_sdp(p), solve_maxmin_sdp(q)
    assert b.objective_value == pytest.approx(s * a.objective_value, rel=1e-6)


def test_certified_infeasible_trace_form():
    rng = np.random.default_rng(0)
    p = SdpProblem(3, [(rank_one(rng, 3), 0.0)], trace_bound=1.0,
                   inequality_terms=[(np.eye(3), -1.0)])
    assert solve_maxmin_sdp(p).status is SdpStatus.INFEASIBLE


def test_certified_infeasible_unit_diagonal():
    rng = np.random.default_rng(0)
    # tr(X) = n for any unit-diagonal X, so tr(I X) <= n - 1 cannot hold
    p = SdpProblem(4, [(rank_one(rng, 4), 0.0)], unit_diagonal=True,
                   inequality_terms=[(np.eye(4), 3.0)])
    assert solve_maxmin_sdp(p).status is SdpStatus.INFEASIBLE


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_cross_check_external_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(77)
    for i in range(30):
        p = random_problem(rng, bool(i % 2))
        ours = solve_maxmin_sdp(p)
        n = p.dim
        X, t = cp.Variable((n, n), hermitian=True), cp.Variable()
        cons = [X >> 0]
        cons += [cp.real(cp.trace(A @ X)) + c >= t for A, c in p.objective_terms]
        cons += [cp.real(cp.trace(C @ X)) <= d for C, d in p.inequality_terms]
        cons += [cp.real(cp.trace(X)) <= p.trace_bound] if p.trace_bound else [cp.real(cp.diag(X)) == 1]
        prob = cp.Problem(cp.Maximize(t), cons)
        try:
            prob.solve(solver="CLARABEL")
        except cp.error.SolverError:
            continue
        if prob.status != "optimal":
            continue
        ref = prob.value
        assert p.max_violation(ours.X_opt) <= 1e-7
        # ours must be at least as good as the external optimum ...
        assert ours.objective_value >= ref - 1e-5 * (1 + abs(ref))
        # ... and can only beat it by as much as the external point violates the constraints
        their_viol = p.max_violation(X.value)
        assert ours.objective_value <= ref + (1e-5 + 100 * max(their_viol, 0)) * (1 + abs(ref))


def test_problem_validation():
    with pytest.raises(SdpError, match="Hermitian"):
        SdpProblem(2, [(np.array([[1, 1], [0, 1]], complex), 0.0)], trace_bound=1.0)
    with pytest.raises(SdpError, match="exactly one"):
        SdpProblem(2, [(np.eye(2), 0.0)], trace_bound=1.0, unit_diagonal=True)
    with pytest.raises(SdpError, match="exactly one"):
        SdpProblem(2, [(np.eye(2), 0.0)])
    with pytest.raises(SdpError):
        SdpProblem(2, [], trace_bound=1.0)
    with pytest.raises(SdpError):
        SdpProblem(2, [(np.eye(3), 0.0)], trace_bound=1.0)


def test_dump_round_trip(tmp_path):
    p = random_problem(np.random.default_rng(5), True)
    path = tmp_path / "sdp.json"
    sol = solve_maxmin_sdp(p, dump_path=str(path))
    back = load_sdp(path.read_text())
    assert back.dim == p.dim and back.unit_diagonal
    for (A, c), (B, d) in zip(p.objective_terms, back.objective_terms):
        assert np.array_equal(A, B) and c == d
    assert solve_maxmin_sdp(back).objective_value == pytest.approx(sol.objective_value, rel=1e-12)


def test_gaussian_covariance():
    rng = np.random.default_rng(0)
    xs = sample_gaussian(np.eye(4), 100_000, rng)
    emp = xs.T @ xs.conj() / xs.shape[0]
    assert np.max(np.abs(emp - np.eye(4))) < 0.03
    # circular: pseudo-covariance vanishes
    assert np.max(np.abs(xs.T @ xs / xs.shape[0])) < 0.03


def test_gaussian_rank_one_collinear(rng):
    v = crandn(rng, 5)
    xs = sample_gaussian(np.outer(v, v.conj()), 200, rng)
    coef = xs @ v.conj() / np.vdot(v, v)
    assert np.allclose(xs, coef[:, None] * v[None, :], atol=1e-10)


def test_gaussian_zero_covariance(rng):
    assert not sample_gaussian(np.zeros((3, 3)), 10, rng).any()


def test_indefinite_rejected():
    with pytest.raises(SdpError, match="indefinite"):
        psd_factor(np.diag([1.0, -1e-3]))
    # tiny negative eigenvalues from solver tolerance are clipped
    F = psd_factor(np.diag([1.0, -1e-12]))
    assert np.allclose(F @ F.conj().T, np.diag([1.0, 0.0]))
