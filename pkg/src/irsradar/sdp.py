"""Dense primal-dual interior-point solver for max-min trace-form complex SDPs.

Problem family::

    maximize   min_l  tr(A_l X) + c_l
    subject to tr(C_q X) <= d_q            for every q
               tr(X) <= kappa              (trace-bounded form)   or
               X_ii = 1                    (unit-diagonal form)
               X Hermitian PSD

Internally the max-min goes through an epigraph variable and the problem is
put in standard conic form over (Hermitian PSD cone) x (nonnegative orthant)::

    min  <c, x>   s.t.  A(X) + G x = b,   X >= 0,  x >= 0

which is solved with a Mehrotra predictor-corrector HKM path-following method
from an infeasible start. Hermitian matrices are handled natively in complex
arithmetic; the Schur complement is real because every constraint is real.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg as sla

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-9


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


class SdpError(ValueError):
    pass


def _check_hermitian(M: np.ndarray, n: int, what: str) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.shape != (n, n):
        raise SdpError(f"{what} has shape {M.shape}, expected {(n, n)}")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
        raise SdpError(f"{what} is not Hermitian")
    return M


@dataclass
class SdpProblem:
    """Problem data; see the module docstring for the meaning of each field."""

    dim: int
    objective_terms: list[tuple[np.ndarray, float]]
    trace_bound: float | None = None
    inequality_terms: list[tuple[np.ndarray, float]] = field(default_factory=list)
    unit_diagonal: bool = False

    def __post_init__(self) -> None:
        n = self.dim
        if n < 1:
            raise SdpError("dim must be positive")
        if not self.objective_terms:
            raise SdpError("at least one objective term is required")
        if (self.trace_bound is None) == (not self.unit_diagonal):
            raise SdpError("exactly one of trace_bound / unit_diagonal must be active")
        if self.trace_bound is not None and not self.trace_bound > 0:
            raise SdpError("trace_bound must be positive")
        self.objective_terms = [(_check_hermitian(A, n, f"A[{i}]"), float(c))
                                for i, (A, c) in enumerate(self.objective_terms)]
        self.inequality_terms = [(_check_hermitian(C, n, f"C[{i}]"), float(d))
                                 for i, (C, d) in enumerate(self.inequality_terms)]

    def objective(self, X: np.ndarray) -> float:
        return min(float(np.real(np.vdot(A, X))) + c for A, c in self.objective_terms)

    def max_violation(self, X: np.ndarray) -> float:
        """Largest constraint violation of X, each measured relative to 1 + |rhs|."""
        v = 0.0
        for C, d in self.inequality_terms:
            v = max(v, (np.real(np.vdot(C, X)) - d) / (1 + abs(d)))
        if self.trace_bound is not None:
            v = max(v, (np.real(np.trace(X)) - self.trace_bound) / (1 + self.trace_bound))
        else:
            v = max(v, float(np.abs(np.real(np.diag(X)) - 1).max()) / 2)
        return float(v)


@dataclass
class SdpSolution:
    X_opt: np.ndarray
    objective_value: float
    status: SdpStatus
    duality_gap: float
    iterations: int
    dual_bound: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


# -- standard-form assembly -----------------------------------------------------

@dataclass
class _StdForm:
    F: np.ndarray          # (m_d, n, n) dense Hermitian constraint matrices
    ndiag: int             # number of trailing X_ii rows (0 or n)
    G: np.ndarray          # (m, p) orthant coefficients
    b: np.ndarray
    c: np.ndarray
    n: int
    var_scale: float       # X_original = var_scale * X
    obj_scale: float       # objective_original = obj_scale * (t_lb + s)
    t_lb: float
    congruence: np.ndarray | None = None   # X_original = var_scale * W Xt W


def _standard_form(p: SdpProblem) -> _StdForm | None:
    """Scale and assemble. Returns None when a constraint is trivially infeasible."""
    n = p.dim
    trace_mode = p.trace_bound is not None
    vs = float(p.trace_bound) if trace_mode else 1.0
    trmax = 1.0 if trace_mode else float(n)

    A = [A * vs for A, _ in p.objective_terms]
    c = np.array([ci for _, ci in p.objective_terms])
    eig = [np.linalg.eigvalsh(Ai) for Ai in A]
    upper = np.array([trmax * e[-1] + ci for e, ci in zip(eig, c)])
    lower = np.array([trmax * min(e[0], 0.0) + ci for e, ci in zip(eig, c)])
    # the optimum is at most min(upper); scaling by it keeps objective values O(1)
    sig = upper.min()
    if not sig > 0:
        sig = max(np.abs(upper).max(), np.abs(lower).max())
    if not sig > 0:
        sig = 1.0
    A = [Ai / sig for Ai in A]
    c = c / sig
    t_lb = float(lower.min() / sig)

    scaled_ineq = []
    for C, d in p.inequality_terms:
        Cs = C * vs
        nrm = np.linalg.norm(Cs)
        if nrm == 0:
            if d < 0:
                return None
            continue
        r = abs(d) if abs(d) > 1e-12 * trmax * nrm else trmax * nrm
        scaled_ineq.append((Cs / r, d / r))

    # Tight clutter bounds give rows of wildly different norms (||C|| kappa / eta can
    # reach 1e10). In the trace form the congruence X = W Xt W with
    # W = (I + sum_q C_q)^(-1/2) is an exact change of variables that
    # brings every row back to O(1) norm; the unit-diagonal form keeps W = I.
    W = None
    if trace_mode and scaled_ineq:
        P = np.eye(n, dtype=complex) + sum(Cq for Cq, _ in scaled_ineq)
        lam, V = np.linalg.eigh((P + P.conj().T) / 2)
        W = (V / np.sqrt(lam)) @ V.conj().T
        W = (W + W.conj().T) / 2
        cong = lambda M: W @ M @ W
    else:
        cong = lambda M: M

    # epigraph rows tr(A_l X) + c_l - s - w_l = t_lb, each divided by its own upper
    # bound so a blocked target and a strong one see rows of similar size
    omega = np.maximum(1.0, upper / sig) if upper.min() > 0 else np.ones(len(A))
    rows_F, rows_b, ineq = [], [], []
    for Ai, ci, om in zip(A, c, omega):
        rows_F.append(cong(Ai) / om)
        rows_b.append((t_lb - ci) / om)
    for Cq, dq in scaled_ineq:
        rows_F.append(cong(Cq))
        rows_b.append(dq)
        ineq.append(len(rows_F) - 1)
    if trace_mode:
        rows_F.append(cong(np.eye(n, dtype=complex)))
        rows_b.append(1.0)
    m_d = len(rows_F)
    ndiag = 0 if trace_mode else n
    m = m_d + ndiag

    L = len(A)
    p_lp = 1 + L + len(ineq) + (1 if trace_mode else 0)
    G = np.zeros((m, p_lp))
    G[:L, 0] = -1.0 / omega               # epigraph shift s = t - t_lb
    G[np.arange(L), 1 + np.arange(L)] = -1.0
    for j, row in enumerate(ineq):
        G[row, 1 + L + j] = 1.0
    if trace_mode:
        G[m_d - 1, p_lp - 1] = 1.0
    b = np.concatenate([np.asarray(rows_b, float), np.ones(ndiag)])
    cvec = np.zeros(p_lp)
    cvec[0] = -1.0
    F = np.asarray(rows_F, complex)
    F = (F + np.conj(np.swapaxes(F, 1, 2))) / 2
    return _StdForm(F=F, ndiag=ndiag, G=G, b=b, c=cvec, n=n,
                    var_scale=vs, obj_scale=float(sig), t_lb=t_lb, congruence=W)


# -- interior-point core -------------------------------------------------------------

def _psd_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha*dX PSD (X positive definite)."""
    Lx = np.linalg.cholesky(X)
    W = sla.solve_triangular(Lx, dX, lower=True)
    W = sla.solve_triangular(Lx, W.conj().T, lower=True)
    lam = np.linalg.eigvalsh((W + W.conj().T) / 2)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _lp_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    return np.inf if not neg.any() else float(np.min(-x[neg] / dx[neg]))


def _ipm(sf: _StdForm, tol: float, max_iter: int):
    F, G, b, c, n, nd = sf.F, sf.G, sf.b, sf.c, sf.n, sf.ndiag
    m_d = F.shape[0]
    m = b.size
    p = G.shape[1]
    eye = np.eye(n)

    def A_op(X):
        out = np.empty(m)
        out[:m_d] = np.einsum("kij,ji->k", F, X).real
        if nd:
            out[m_d:] = np.diag(X).real
        return out

    def AT_op(y):
        S = np.einsum("k,kij->ij", y[:m_d], F)
        if nd:
            S = S + np.diag(y[m_d:])
        return S

    normF = np.linalg.norm(F.reshape(m_d, -1), axis=1)
    row_norm = np.concatenate([normF, np.ones(nd)])
    nb, nc = np.linalg.norm(b), np.linalg.norm(c)
    xi = max(10.0, np.sqrt(n), float(np.max(n * (1 + np.abs(b)) / (1 + row_norm))))
    et = max(10.0, np.sqrt(n), float(normF.max(initial=0.0)), nc)
    X = xi * eye.astype(complex)
    Z = et * eye.astype(complex)
    x = np.full(p, xi)
    z = np.full(p, et)
    y = np.zeros(m)

    status = SdpStatus.MAX_ITERATIONS
    info: dict = {}
    best = None
    best_merit = np.inf
    stall = 0
    it = 0
    for it in range(max_iter + 1):
        rp = b - A_op(X) - G @ x
        Rd = -AT_op(y) - Z
        Rd = (Rd + Rd.conj().T) / 2
        rd = c - G.T @ y - z
        gap = float(np.real(np.vdot(X, Z)) + x @ z)
        mu = gap / (n + p)
        pobj, dobj = float(c @ x), float(b @ y)
        relp = np.linalg.norm(rp) / (1 + nb)
        reld = np.sqrt(np.linalg.norm(Rd) ** 2 + np.linalg.norm(rd) ** 2) / (1 + nc)
        relgap = gap / (1 + abs(pobj) + abs(dobj))
        # the same gap measured in the caller's units, relative to 1 + |objective|
        relgap_user = sf.obj_scale * gap / (1 + sf.obj_scale * abs(sf.t_lb - pobj))
        info = dict(relp=relp, reld=reld, gap=gap, pobj=pobj, dobj=dobj)
        if relp < tol and reld < tol and max(relgap, relgap_user) < tol:
            status = SdpStatus.OPTIMAL
            break
        merit = max(relp, reld, relgap, relgap_user)
        if merit < best_merit:
            best_merit, stall = merit, 0
            best = (X, x, y, Z, z, it, info)
        else:
            stall += 1
        if stall >= 8:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        if dobj > 0:
            cert = (np.linalg.norm(Rd) + np.linalg.norm(rd) + nc) / dobj
            if cert < 1e-8:
                status = SdpStatus.INFEASIBLE
                break
        if it == max_iter:
            break

        try:
            Lz = np.linalg.cholesky(Z)
            Zi = sla.cho_solve((Lz, True), eye.astype(complex))
            Zi = (Zi + Zi.conj().T) / 2
            P = np.matmul(np.matmul(X, F), Zi)
            M = np.zeros((m, m))
            M[:m_d, :m_d] = np.einsum("iab,jba->ij", F, P).real
            if nd:
                Mdg = np.diagonal(P, axis1=1, axis2=2).real
                M[:m_d, m_d:] = Mdg
                M[m_d:, :m_d] = Mdg.T
                M[m_d:, m_d:] = (X * Zi.T).real
            M += (G * (x / z)) @ G.T
            M = (M + M.T) / 2
            try:
                Mf = sla.cho_factor(M)
            except np.linalg.LinAlgError:
                M += np.eye(m) * (1e-14 * np.trace(M) / m)
                Mf = sla.cho_factor(M)
        except (np.linalg.LinAlgError, ValueError):
            status = SdpStatus.NUMERICAL_FAILURE
            break

        XRd = X @ Rd

        def direction(Kmat, kvec):
            T = (Kmat - XRd) @ Zi
            rhs = rp - A_op(T) - G @ ((kvec - x * rd) / z)
            dy = sla.cho_solve(Mf, rhs)
            dZ = Rd - AT_op(dy)
            dZ = (dZ + dZ.conj().T) / 2
            dz = rd - G.T @ dy
            dX = (Kmat - X @ dZ) @ Zi
            dX = (dX + dX.conj().T) / 2
            dx = (kvec - x * dz) / z
            return dX, dx, dy, dZ, dz

        try:
            XZ = X @ Z
            dXa, dxa, dya, dZa, dza = direction(-XZ, -x * z)
            ap = min(1.0, _psd_step(X, dXa), _lp_step(x, dxa))
            ad = min(1.0, _psd_step(Z, dZa), _lp_step(z, dza))
            mu_aff = (np.real(np.vdot(X + ap * dXa, Z + ad * dZa))
                      + (x + ap * dxa) @ (z + ad * dza)) / (n + p)
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
            Kmat = sigma * mu * eye - XZ - dXa @ dZa
            kvec = sigma * mu - x * z - dxa * dza
            dX, dx, dy, dZ, dz = direction(Kmat, kvec)
            gamma = 0.9 + 0.09 * min(1.0, 1.0 - sigma) if it > 0 else 0.9
            ap = min(1.0, gamma * _psd_step(X, dX), gamma * _lp_step(x, dx))
            ad = min(1.0, gamma * _psd_step(Z, dZ), gamma * _lp_step(z, dz))
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        if not (np.isfinite(ap) and np.isfinite(ad)) or max(ap, ad) < 1e-12:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        X = X + ap * dX
        x = x + ap * dx
        y = y + ad * dy
        Z = Z + ad * dZ
        z = z + ad * dz
        X = (X + X.conj().T) / 2
        Z = (Z + Z.conj().T) / 2

    if status is not SdpStatus.OPTIMAL and status is not SdpStatus.INFEASIBLE and best is not None:
        # ill-conditioned tail: hand back the most accurate iterate seen
        X, x, y, Z, z, _, info = best
    return X, x, y, Z, z, status, it, info


def solve_maxmin_sdp(p: SdpProblem, tol: float = 1e-7, max_iter: int = 100,
                     dump_path: str | None = None) -> SdpSolution:
    """Solve ``p``; X_opt, objective and gap are reported in the problem's own units."""
    sf = _standard_form(p)
    n = p.dim
    if sf is None:
        sol = SdpSolution(X_opt=np.zeros((n, n), complex), objective_value=float("nan"),
                          status=SdpStatus.INFEASIBLE, duality_gap=float("nan"), iterations=0)
    else:
        X, x, y, Z, z, status, it, info = _ipm(sf, tol, max_iter)
        if status is SdpStatus.INFEASIBLE:
            X_opt = np.zeros((n, n), complex)
            obj = float("nan")
        else:
            if sf.congruence is not None:
                X = sf.congruence @ X @ sf.congruence
                X = (X + X.conj().T) / 2
            X_opt = sf.var_scale * X
            obj = p.objective(X_opt)
        sol = SdpSolution(
            X_opt=X_opt, objective_value=obj, status=status,
            duality_gap=sf.obj_scale * max(info.get("gap", np.nan), 0.0),
            iterations=it,
            dual_bound=sf.obj_scale * (sf.t_lb - info.get("dobj", np.nan)),
            primal_residual=info.get("relp", np.nan),
            dual_residual=info.get("reld", np.nan),
        )
        if status is not SdpStatus.OPTIMAL:
            log.debug("sdp n=%d finished with %s after %d iterations: %s", n, status.value, it, info)
    if dump_path is not None:
        with open(dump_path, "w") as fh:
            fh.write(dump_sdp(p, sol))
    return sol


# -- sampling ------------------------------------------------------------------

def psd_factor(X: np.ndarray) -> np.ndarray:
    """F with F F^H = X up to round-off.

    Eigenvalues within 1e-9*lambda_max of zero are set to zero; anything more
    negative than that means X is indefinite.
    """
    X = (np.asarray(X, complex) + np.asarray(X, complex).conj().T) / 2
    lam, V = np.linalg.eigh(X)
    lmax = max(lam[-1], 0.0)
    if lam[0] < -PSD_TOL * lmax or (lmax == 0 and lam[0] < 0):
        raise SdpError(f"matrix is indefinite (min eigenvalue {lam[0]:.3e}, max {lam[-1]:.3e})")
    # eigenvalues at round-off level, of either sign, are dropped: their square
    # roots would otherwise inject ~1e-8 relative noise into every sample
    lam = np.where(lam > PSD_TOL * lmax, lam, 0.0)
    return V * np.sqrt(lam)


def sample_gaussian(X: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` draws of CN(0, X), returned as rows of a (count, n) array."""
    Fm = psd_factor(X)
    n = Fm.shape[0]
    zz = (rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))) / np.sqrt(2)
    return zz @ Fm.T


# -- debug dump ------------------------------------------------------------------

def _mat(M: np.ndarray) -> list:
    M = np.asarray(M, complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in M]


def dump_sdp(p: SdpProblem, sol: SdpSolution | None = None) -> str:
    """JSON dump of a problem (and optionally its solution); entries are [re, im]."""
    doc = {
        "dim": p.dim,
        "trace_bound": p.trace_bound,
        "unit_diagonal": p.unit_diagonal,
        "objective_terms": [{"A": _mat(A), "c": c} for A, c in p.objective_terms],
        "inequality_terms": [{"C": _mat(C), "d": d} for C, d in p.inequality_terms],
    }
    if sol is not None:
        doc["solution"] = {
            "X": _mat(sol.X_opt), "objective_value": sol.objective_value,
            "status": sol.status.value, "duality_gap": sol.duality_gap,
            "iterations": sol.iterations,
        }
    return json.dumps(doc)


def load_sdp(text: str) -> SdpProblem:
    doc = json.loads(text)

    def mat(a):
        a = np.asarray(a, float)
        return a[..., 0] + 1j * a[..., 1]

    return SdpProblem(
        dim=doc["dim"],
        objective_terms=[(mat(t["A"]), t["c"]) for t in doc["objective_terms"]],
        trace_bound=doc["trace_bound"],
        inequality_terms=[(mat(t["C"]), t["d"]) for t in doc["inequality_terms"]],
        unit_diagonal=doc["unit_diagonal"],
    )
