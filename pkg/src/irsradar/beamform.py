"""Joint transmit / IRS phase design by alternating semidefinite relaxation.

The active step fixes the IRS phases and designs the transmit beamformer t;
the passive step fixes t and designs the concatenated unit-modulus phase
vector theta. Each step lifts its QCQP to an SDP, solves it, and recovers a
rank-one candidate by Gaussian randomization.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import ChannelSet, tx_irs_departure
from .scenario import Scenario
from .sdp import SdpProblem, SdpSolution, SdpStatus, sample_gaussian, solve_maxmin_sdp

log = logging.getLogger(__name__)

POWER_SLACK = 1e-9


class DesignStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


class InfeasibleDesign(RuntimeError):
    """No feasible candidate could be produced."""

    def __init__(self, message: str, margin: float = float("nan"), iteration: int | None = None):
        super().__init__(message)
        self.margin = margin
        self.iteration = iteration


@dataclass
class Beamformer:
    t: np.ndarray

    @property
    def power(self) -> float:
        return float(np.real(np.vdot(self.t, self.t)))


@dataclass
class PhaseProfile:
    """Concatenated IRS phases; segment k holds the diagonal of Theta_k.

    The phases in radians are the stored representation, so every entry has
    unit modulus by construction; ``theta`` renders them as complex numbers.
    """

    phases: np.ndarray  # (N*K,) radians in (-pi, pi]
    num_irs: int

    def __post_init__(self) -> None:
        ph = np.asarray(self.phases, dtype=float).ravel()
        if not np.all(np.isfinite(ph)):
            raise ValueError("phases must be finite")
        inside = (ph > -np.pi) & (ph <= np.pi)
        self.phases = np.where(inside, ph, np.angle(np.exp(1j * ph)))
        if self.num_irs and ph.size % self.num_irs:
            raise ValueError("phase vector length must be a multiple of the IRS count")
        if self.num_irs == 0 and ph.size:
            raise ValueError("phases given for zero surfaces")

    @classmethod
    def identity(cls, K: int, N: int) -> "PhaseProfile":
        return cls(np.zeros(K * N), K)

    @classmethod
    def from_vector(cls, theta, K: int) -> "PhaseProfile":
        """Keep only the argument of each (nonzero) entry of a complex vector."""
        th = np.asarray(theta, complex).ravel()
        if np.any(th == 0):
            raise ValueError("phase entries must be nonzero")
        return cls(np.angle(th), K)

    @property
    def theta(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    @property
    def per_irs(self) -> np.ndarray:
        """(K, N) view; row k is the diagonal of Theta_k."""
        if self.num_irs == 0:
            return np.zeros((0, 0), complex)
        return self.theta.reshape(self.num_irs, -1)


@dataclass
class DesignResult:
    beamformer: Beamformer
    phases: PhaseProfile
    min_power_trajectory: list[float]
    iterations: int
    status: DesignStatus
    per_target_power: np.ndarray
    per_clutter_power: np.ndarray
    stage_ms: dict[str, float] = field(default_factory=dict)
    sdp_statuses: list[str] = field(default_factory=list)
    note: str = ""

    @property
    def min_power(self) -> float:
        if self.status is DesignStatus.INFEASIBLE:
            return float("nan")
        return float(self.per_target_power.min())

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "min_power_watts": self.min_power,
            "min_power_trajectory": list(map(float, self.min_power_trajectory)),
            "per_target_power_watts": self.per_target_power.tolist(),
            "per_clutter_power_watts": self.per_clutter_power.tolist(),
            "tx_power_watts": self.beamformer.power,
            "beamformer": [[float(z.real), float(z.imag)] for z in self.beamformer.t],
            "phases_rad": self.phases.phases.tolist(),
            "stage_ms": self.stage_ms,
            "note": self.note,
        }


# -- effective channels ------------------------------------------------------------

def _effective_rows(v_t: np.ndarray, v_i: np.ndarray, ch: ChannelSet, theta: PhaseProfile) -> np.ndarray:
    """Rows r with r @ t = (v_t^T + sum_k v_ik^T Theta_k^H D_k) t; v_t (P, M), v_i (K, P, N)."""
    rows = np.array(v_t, complex, copy=True)
    for k, th in enumerate(theta.per_irs):
        rows += (v_i[k] * th.conj()) @ ch.D[k]
    return rows


def target_rows(ch: ChannelSet, theta: PhaseProfile) -> np.ndarray:
    return _effective_rows(ch.h_t, ch.h_i, ch, theta)


def clutter_rows(ch: ChannelSet, theta: PhaseProfile) -> np.ndarray:
    return _effective_rows(ch.g_t, ch.g_i, ch, theta)


def illumination_power(ch: ChannelSet, t: Beamformer, theta: PhaseProfile,
                       obj: tuple[str, int]) -> float:
    """|(v^T + sum_k v_k^T Theta_k^H D_k) t|^2 for obj = ("target", l) or ("clutter", q)."""
    kind, idx = obj
    if kind == "target":
        if not 0 <= idx < ch.L:
            raise IndexError(f"target index {idx} out of range")
        row = _effective_rows(ch.h_t[idx:idx + 1], ch.h_i[:, idx:idx + 1], ch, theta)
    elif kind == "clutter":
        if not 0 <= idx < ch.Q:
            raise IndexError(f"clutter index {idx} out of range")
        row = _effective_rows(ch.g_t[idx:idx + 1], ch.g_i[:, idx:idx + 1], ch, theta)
    else:
        raise ValueError(f"unknown object kind {kind!r}")
    return float(abs(row[0] @ t.t) ** 2)


def powers(ch: ChannelSet, t: Beamformer, theta: PhaseProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-target and per-clutter illumination powers."""
    pt = np.abs(target_rows(ch, theta) @ t.t) ** 2
    pc = np.abs(clutter_rows(ch, theta) @ t.t) ** 2
    return pt, pc


def _canonical_phase(t: np.ndarray) -> np.ndarray:
    """Rotate so the first nonzero entry is real and nonnegative."""
    nz = np.flatnonzero(np.abs(t) > 0)
    if nz.size == 0:
        return t
    out = t * np.exp(-1j * np.angle(t[nz[0]]))
    out[nz[0]] = abs(t[nz[0]])   # pin the reference entry to an exact real
    return out


def _fit_budget(t: np.ndarray, kappa: float) -> np.ndarray:
    """Shrink t by a few ulps until the recomputed t^H t is <= kappa in floating point.

    Scaling onto the budget lands on it only to round-off, which at large
    kappa is far more than an absolute 1e-9 W.
    """
    for _ in range(64):
        p = float(np.vdot(t, t).real)
        if p <= kappa:
            return t
        t = t * (np.sqrt(kappa / p) * (1.0 - 4 * np.finfo(float).eps))
    raise RuntimeError("could not fit the beamformer inside the power budget")


# -- active step ---------------------------------------------------------------------

def build_active_sdp(ch: ChannelSet, theta: PhaseProfile, kappa: float, eta) -> SdpProblem:
    """Lift the transmit subproblem: A_l = a_l a_l^H with a_l^H the effective target row."""
    eta = np.broadcast_to(np.asarray(eta, float), (ch.Q,))
    a_h = target_rows(ch, theta)      # rows are a_l^H
    b_h = clutter_rows(ch, theta)
    A = [(np.outer(r.conj(), r), 0.0) for r in a_h]
    B = [(np.outer(r.conj(), r), float(e)) for r, e in zip(b_h, eta)]
    return SdpProblem(dim=ch.M, objective_terms=A, trace_bound=float(kappa), inequality_terms=B)


def randomize_active(T: np.ndarray, ch: ChannelSet, theta: PhaseProfile, kappa: float, eta,
                     trials: int, rng: np.random.Generator) -> Beamformer:
    """Gaussian randomization for the transmit beamformer.

    Each draw xi ~ CN(0, T) is scaled by the largest of xi^H xi / kappa and
    xi^H B_q xi / eta_q, which makes it feasible; the draw with the best
    worst-case target power wins (first index on ties).
    """
    if trials < 1:
        raise ValueError("need at least one randomization trial")
    eta = np.broadcast_to(np.asarray(eta, float), (ch.Q,))
    a_h = target_rows(ch, theta)
    b_h = clutter_rows(ch, theta)
    xi = sample_gaussian(T, trials, rng)                     # (I, M)
    ratios = [np.sum(np.abs(xi) ** 2, axis=1) / kappa]
    if ch.Q:
        ratios.append((np.abs(xi @ b_h.T) ** 2 / eta).T)    # (Q, I)
    ratio = np.max(np.vstack(ratios), axis=0)
    ok = ratio > 0
    if not ok.any():
        return Beamformer(np.zeros(ch.M, complex))
    scale = np.zeros(trials)
    scale[ok] = 1.0 / np.sqrt(ratio[ok])
    xs = xi * scale[:, None]
    obj = np.min(np.abs(xs @ a_h.T) ** 2, axis=1)
    best = int(np.argmax(obj))
    return Beamformer(_fit_budget(_canonical_phase(xs[best]), kappa))


# -- passive step -----------------------------------------------------------------------

@dataclass
class PassiveData:
    """Stacked passive-step quantities for a fixed beamformer."""

    h: np.ndarray        # (L, NK)  stacked h_i o (D_k t)
    g: np.ndarray        # (Q, NK)
    a: np.ndarray        # (L,) direct target terms h_t^T t
    b: np.ndarray        # (Q,) direct clutter terms g_t^T t
    eta: np.ndarray
    problem: SdpProblem

    @property
    def direct_violation(self) -> np.ndarray:
        """Clutter scatterers whose direct path alone already exceeds the bound."""
        return np.abs(self.b) ** 2 > self.eta


def _homogenized(v: np.ndarray, s: complex) -> np.ndarray:
    n = v.size
    H = np.zeros((n + 1, n + 1), complex)
    H[:n, :n] = np.outer(v, v.conj())
    H[:n, n] = v * np.conj(s)
    H[n, :n] = v.conj() * s
    return H


def build_passive_sdp(ch: ChannelSet, t: Beamformer, eta) -> PassiveData:
    """Lift the phase subproblem to an (NK+1)-dimensional unit-diagonal SDP.

    With theta_bar = [theta; 1], theta_bar^H H_l theta_bar + |a_l|^2 equals
    |a_l + theta^H h_l|^2, the target power for that phase choice.
    """
    eta = np.broadcast_to(np.asarray(eta, float), (ch.Q,)).copy()
    Dt = np.einsum("knm,m->kn", ch.D, t.t)                               # (K, N)
    h = np.concatenate([ch.h_i[k] * Dt[k] for k in range(ch.K)], axis=1) if ch.K else np.zeros((ch.L, 0))
    g = np.concatenate([ch.g_i[k] * Dt[k] for k in range(ch.K)], axis=1) if ch.K else np.zeros((ch.Q, 0))
    a = ch.h_t @ t.t
    b = ch.g_t @ t.t
    n = h.shape[1] + 1
    obj = [(_homogenized(h[l], a[l]), float(abs(a[l]) ** 2)) for l in range(ch.L)]
    ineq = [(_homogenized(g[q], b[q]), float(eta[q] - abs(b[q]) ** 2)) for q in range(ch.Q)]
    prob = SdpProblem(dim=n, objective_terms=obj, inequality_terms=ineq, unit_diagonal=True)
    data = PassiveData(h=h, g=g, a=a, b=b, eta=eta, problem=prob)
    if data.direct_violation.any():
        log.debug("direct clutter path exceeds eta for q=%s", np.flatnonzero(data.direct_violation))
    return data


def randomize_passive(Theta: np.ndarray, data: PassiveData, trials: int,
                      rng: np.random.Generator, num_irs: int) -> PhaseProfile:
    """Gaussian randomization for the phase vector.

    Draws are scaled by the largest xi^H G_q xi / (eta_q - |b_q|^2), projected
    onto unit modulus relative to the last (homogenizing) entry, re-checked
    against the clutter bounds and the infeasible ones discarded. Raises
    InfeasibleDesign carrying the smallest clutter overshoot if none survive.
    """
    if trials < 1:
        raise ValueError("need at least one randomization trial")
    xi = sample_gaussian(Theta, trials, rng)                              # (I, NK+1)
    denom = data.eta - np.abs(data.b) ** 2
    if data.g.shape[0] and np.all(denom > 0):
        # only xi^H V xi with V = [g; b][g; b]^H - |b|^2 e e^T is needed
        last = xi[:, -1:]
        gb = np.abs(xi[:, :-1].conj() @ data.g.T + last.conj() * data.b) ** 2
        quad = gb - np.abs(data.b) ** 2 * np.abs(last) ** 2              # (I, Q)
        s = np.max(quad / denom, axis=1)
        pos = s > 0
        xi[pos] = xi[pos] / np.sqrt(s[pos])[:, None]
    last = xi[:, -1]
    good = np.abs(last) > 0
    ang = np.angle(xi[good, :-1] / last[good, None])
    cand = np.exp(1j * ang)                                                # theta candidates
    tgt = np.abs(data.a[None, :] + cand.conj() @ data.h.T) ** 2           # (I', L)
    obj = tgt.min(axis=1)
    if data.g.shape[0]:
        clt = np.abs(data.b[None, :] + cand.conj() @ data.g.T) ** 2
        over = np.max(clt - data.eta[None, :], axis=1)
        feasible = over <= 0
    else:
        over = np.zeros(cand.shape[0])
        feasible = np.ones(cand.shape[0], bool)
    if not feasible.any():
        raise InfeasibleDesign("no randomized phase candidate meets the clutter bounds",
                               margin=float(over.min()) if over.size else float("nan"))
    obj = np.where(feasible, obj, -np.inf)
    best = int(np.argmax(obj))
    return PhaseProfile(ang[best], num_irs)


# -- designs ----------------------------------------------------------------------------------

def _usable(sol: SdpSolution) -> bool:
    return sol.status is not SdpStatus.INFEASIBLE and np.all(np.isfinite(sol.X_opt))


def _result(ch, t, theta, traj, iters, status, stage, sdp_st, note="") -> DesignResult:
    pt, pc = powers(ch, t, theta)
    return DesignResult(beamformer=t, phases=theta, min_power_trajectory=traj, iterations=iters,
                        status=status, per_target_power=pt, per_clutter_power=pc,
                        stage_ms=stage, sdp_statuses=sdp_st, note=note)


def _initial_phases(ch: ChannelSet, s: Scenario, rng: np.random.Generator) -> PhaseProfile:
    if s.phase_init == "random":
        return PhaseProfile(rng.uniform(0, 2 * np.pi, ch.K * ch.N), ch.K)
    return PhaseProfile.identity(ch.K, ch.N)


def active_step(ch: ChannelSet, theta: PhaseProfile, s: Scenario, rng: np.random.Generator,
                stage: dict, sdp_st: list) -> Beamformer:
    t0 = time.perf_counter()
    prob = build_active_sdp(ch, theta, s.kappa, s.eta)
    sol = solve_maxmin_sdp(prob)
    t1 = time.perf_counter()
    sdp_st.append(sol.status.value)
    if not _usable(sol):
        # X = 0 is always feasible here, so this only happens on solver breakdown
        raise InfeasibleDesign(f"active SDP returned {sol.status.value}")
    t = randomize_active(sol.X_opt, ch, theta, s.kappa, s.eta, s.randomization_trials, rng)
    stage["active_sdp_ms"] = stage.get("active_sdp_ms", 0.0) + 1e3 * (t1 - t0)
    stage["active_rand_ms"] = stage.get("active_rand_ms", 0.0) + 1e3 * (time.perf_counter() - t1)
    return t


def passive_step(ch: ChannelSet, t: Beamformer, s: Scenario, rng: np.random.Generator,
                 stage: dict, sdp_st: list) -> PhaseProfile:
    t0 = time.perf_counter()
    data = build_passive_sdp(ch, t, s.eta)
    sol = solve_maxmin_sdp(data.problem)
    t1 = time.perf_counter()
    sdp_st.append(sol.status.value)
    stage["passive_sdp_ms"] = stage.get("passive_sdp_ms", 0.0) + 1e3 * (t1 - t0)
    if not _usable(sol):
        raise InfeasibleDesign(f"passive SDP returned {sol.status.value}")
    try:
        theta = randomize_passive(sol.X_opt, data, s.randomization_trials, rng, ch.K)
    finally:
        stage["passive_rand_ms"] = stage.get("passive_rand_ms", 0.0) + 1e3 * (time.perf_counter() - t1)
    return theta


def _min_power(ch, t, theta) -> float:
    return float(np.min(np.abs(target_rows(ch, theta) @ t.t) ** 2))


def joint_design(ch: ChannelSet, s: Scenario, rng: np.random.Generator | None = None) -> DesignResult:
    """Alternate active and passive steps until the best min power stalls.

    An update is kept only if it strictly raises the best worst-case target
    power, so the trajectory is non-decreasing. Iteration j counts as
    converged when it raises the best value by less than epsilon relative to
    the value it started from (iteration 0 starts from the first active
    iterate).
    """
    rng = np.random.default_rng(s.rng_seed) if rng is None else rng
    stage: dict[str, float] = {}
    sdp_st: list[str] = []
    theta = _initial_phases(ch, s, rng)
    t = None
    best = -np.inf
    traj: list[float] = []
    status = DesignStatus.MAX_ITERATIONS
    iters = 0
    for j in range(s.max_iterations):
        iters = j + 1
        try:
            t_new = active_step(ch, theta, s, rng, stage, sdp_st)
        except InfeasibleDesign as exc:
            if t is None:
                exc.iteration = j
                raise
            t_new = None
        if t_new is not None:
            p = _min_power(ch, t_new, theta)
            if t is None or p > best:
                t, best = t_new, p
        # iteration 0 is measured from its own active iterate, later ones from the last record
        ref = traj[-1] if traj else best
        if ch.K:
            try:
                th_new = passive_step(ch, t, s, rng, stage, sdp_st)
            except InfeasibleDesign as exc:
                log.debug("passive step %d kept previous phases: %s", j, exc)
                th_new = None
            if th_new is not None:
                p = _min_power(ch, t, th_new)
                if p > best:
                    theta, best = th_new, p
        traj.append(best)
        gain = best - ref
        if gain < s.convergence_tol * abs(ref) or (ref == 0 and gain == 0):
            status = DesignStatus.CONVERGED
            break
    return _result(ch, t, theta, traj, iters, status, stage, sdp_st)


def active_only_design(ch: ChannelSet, s: Scenario, rng: np.random.Generator | None = None) -> DesignResult:
    """One active step with every Theta_k fixed to the identity."""
    rng = np.random.default_rng(s.rng_seed) if rng is None else rng
    stage: dict[str, float] = {}
    sdp_st: list[str] = []
    theta = PhaseProfile.identity(ch.K, ch.N)
    if s.phase_init == "random":
        rng.uniform(0, 2 * np.pi, ch.K * ch.N)  # keep the stream aligned with joint_design
    t = active_step(ch, theta, s, rng, stage, sdp_st)
    return _result(ch, t, theta, [_min_power(ch, t, theta)], 1, DesignStatus.CONVERGED, stage, sdp_st)


def no_irs_design(ch: ChannelSet, s: Scenario, rng: np.random.Generator | None = None) -> DesignResult:
    """Active SDR on the direct paths only, as for a radar without surfaces."""
    rng = np.random.default_rng(s.rng_seed) if rng is None else rng
    bare = ch.without_irs()
    stage: dict[str, float] = {}
    sdp_st: list[str] = []
    theta = PhaseProfile.identity(0, 0)
    if s.phase_init == "random":
        rng.uniform(0, 2 * np.pi, ch.K * ch.N)
    t = active_step(bare, theta, s, rng, stage, sdp_st)
    return _result(bare, t, theta, [_min_power(bare, t, theta)], 1, DesignStatus.CONVERGED, stage, sdp_st)


def passive_only_beam(s: Scenario) -> Beamformer:
    """Full-power beam steered at the first IRS: t = sqrt(kappa) * d_t."""
    return Beamformer(_fit_budget(_canonical_phase(np.sqrt(s.kappa) * tx_irs_departure(s, 0)), s.kappa))


def passive_only_design(ch: ChannelSet, s: Scenario, rng: np.random.Generator | None = None) -> DesignResult:
    """Fix t towards the first IRS and run one passive step."""
    rng = np.random.default_rng(s.rng_seed) if rng is None else rng
    stage: dict[str, float] = {}
    sdp_st: list[str] = []
    t = passive_only_beam(s)
    theta0 = PhaseProfile.identity(ch.K, ch.N)
    try:
        theta = passive_step(ch, t, s, rng, stage, sdp_st)
    except InfeasibleDesign as exc:
        return _result(ch, t, theta0, [], 1, DesignStatus.INFEASIBLE, stage, sdp_st, note=str(exc))
    return _result(ch, t, theta, [_min_power(ch, t, theta)], 1, DesignStatus.CONVERGED, stage, sdp_st)


DESIGNS = {
    "joint": joint_design,
    "active_only": active_only_design,
    "passive_only": passive_only_design,
    "no_irs": no_irs_design,
}
