"""Geometric line-of-sight channel model with log-normal path gains and beamwidth blockage.

All arrays are half-wavelength ULAs laid along the x-axis; positions are
planar (x, y) metres and azimuths are measured counter-clockwise from +x.
The steering vector takes the angle off array broadside (+y), which for an
azimuth ``phi`` is ``pi/2 - phi``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

HPBW_FACTOR = 1.772  # 3 dB beamwidth of an n-element half-wavelength ULA ~ 1.772/n rad


def ula_steering(angle: float, n_elements: int) -> np.ndarray:
    """Unit-norm ULA response, entry m = exp(j*pi*m*sin(angle)) / sqrt(n)."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    m = np.arange(n_elements)
    return np.exp(1j * np.pi * m * np.sin(angle)) / np.sqrt(n_elements)


def azimuth(src, dst) -> np.ndarray:
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = dst - src
    return np.arctan2(d[..., 1], d[..., 0])


def broadside_angle(az):
    return np.pi / 2 - az


def beamwidth_3db(n_elements: int) -> float:
    return HPBW_FACTOR / n_elements


def path_loss_db(distance: float, params, xi: float = 0.0) -> float:
    """rho = a + 10*b*log10(d) + xi."""
    a, b, _ = params
    return a + 10.0 * b * np.log10(distance) + xi


def sample_path_gain(distance: float, params, rng: np.random.Generator,
                     xi: float | None = None) -> complex:
    """Draw one complex path gain alpha ~ CN(0, 10^(-rho/10)).

    The shadowing term xi ~ N(0, sigma_db^2) is drawn from ``rng`` unless
    given explicitly.
    """
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    if xi is None:
        xi = rng.normal(0.0, params[2])
    var = 10.0 ** (-0.1 * path_loss_db(distance, params, xi))
    re, im = rng.normal(size=2)
    return complex(np.sqrt(var / 2.0) * (re + 1j * im))


def _angular_blockage(origin, objects: np.ndarray, half_width: float) -> np.ndarray:
    """Flag 0 for every object that has a nearer object within ``half_width`` of its azimuth."""
    objects = np.asarray(objects, dtype=float).reshape(-1, 2)
    rel = objects - np.asarray(origin, dtype=float)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(dist == 0):
        raise ValueError("an object coincides with the array position")
    az = np.arctan2(rel[:, 1], rel[:, 0])
    diff = np.angle(np.exp(1j * (az[:, None] - az[None, :])))
    close = np.abs(diff) < half_width
    np.fill_diagonal(close, False)
    # blocked[i] if some j is close and strictly nearer
    nearer = dist[None, :] < dist[:, None]
    blocked = np.any(close & nearer, axis=1)
    return (~blocked).astype(np.int8)


def blockage_mask(s: Scenario, targets) -> np.ndarray:
    """Blockage flags of the TX-origin paths, ordered targets first then clutter."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    objects = np.vstack([targets, np.asarray(s.clutter_positions, dtype=float).reshape(-1, 2)])
    return _angular_blockage(s.tx_position, objects, beamwidth_3db(s.M) / 2.0)


@dataclass
class ChannelSet:
    """One realization of every channel in the scene.

    Shapes: h_t (L, M), h_i (K, L, N), g_t (Q, M), g_i (K, Q, N), D (K, N, M).
    ``gamma_tx`` holds the L+Q TX-path flags (targets first); ``gamma_irs``
    the (K, L+Q) IRS-path flags, all ones unless IRS blockage is enabled.
    """

    h_t: np.ndarray
    h_i: np.ndarray
    g_t: np.ndarray
    g_i: np.ndarray
    D: np.ndarray
    gamma_tx: np.ndarray
    target_positions: np.ndarray
    gamma_irs: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.h_t.shape[0]

    @property
    def Q(self) -> int:
        return self.g_t.shape[0]

    @property
    def M(self) -> int:
        return self.h_t.shape[1]

    @property
    def K(self) -> int:
        return self.D.shape[0]

    @property
    def N(self) -> int:
        return self.D.shape[1]

    def without_irs(self) -> "ChannelSet":
        """The same scene with the surfaces removed (K = 0)."""
        return ChannelSet(
            h_t=self.h_t, g_t=self.g_t,
            h_i=np.zeros((0, self.L, 0), complex), g_i=np.zeros((0, self.Q, 0), complex),
            D=np.zeros((0, 0, self.M), complex),
            gamma_tx=self.gamma_tx, target_positions=self.target_positions,
            gamma_irs=np.zeros((0, self.L + self.Q), np.int8),
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.h_t, self.h_i, self.g_t, self.g_i, self.D, self.gamma_tx):
            a = np.ascontiguousarray(arr)
            h.update(str(a.shape).encode())
            h.update(a.tobytes())
        return h.hexdigest()[:16]


def realize_channels(s: Scenario, targets, rng: np.random.Generator,
                     gamma_override: np.ndarray | None = None) -> ChannelSet:
    """Draw one channel realization for the given target positions.

    Three child streams are derived from ``rng`` (target paths, TX-IRS links,
    clutter paths) so scenes that differ only in their clutter layout share
    the target and TX-IRS draws.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    L, Q, K, M, N = targets.shape[0], s.Q, s.K, s.M, s.N
    params = s.pathloss_params
    tx = np.asarray(s.tx_position, dtype=float)
    irs = np.asarray(s.irs_positions, dtype=float).reshape(-1, 2)
    clutter = np.asarray(s.clutter_positions, dtype=float).reshape(-1, 2)

    gamma = blockage_mask(s, targets) if gamma_override is None else np.asarray(gamma_override)
    if gamma.shape != (L + Q,):
        raise ValueError(f"gamma must have {L + Q} entries")
    gamma_irs = np.ones((K, L + Q), dtype=np.int8)
    if s.irs_path_blockage:
        objects = np.vstack([targets, clutter])
        for k in range(K):
            gamma_irs[k] = _angular_blockage(irs[k], objects, beamwidth_3db(N) / 2.0)

    seeds = rng.integers(0, 2**63, size=3)
    rng_t, rng_d, rng_c = (np.random.default_rng(int(x)) for x in seeds)

    def tx_path(pos, g, r):
        alpha = sample_path_gain(np.hypot(*(pos - tx)), params, r)
        return np.sqrt(M) * alpha * g * ula_steering(broadside_angle(azimuth(tx, pos)), M)

    def irs_path(k, pos, g, r):
        alpha = sample_path_gain(np.hypot(*(pos - irs[k])), params, r)
        return np.sqrt(N) * alpha * g * ula_steering(broadside_angle(azimuth(irs[k], pos)), N)

    h_t = np.zeros((L, M), complex)
    h_i = np.zeros((K, L, N), complex)
    for l in range(L):
        h_t[l] = tx_path(targets[l], gamma[l], rng_t)
        for k in range(K):
            h_i[k, l] = irs_path(k, targets[l], gamma_irs[k, l], rng_t)

    D = np.zeros((K, N, M), complex)
    for k in range(K):
        alpha = sample_path_gain(np.hypot(*(irs[k] - tx)), params, rng_d)
        d_r = ula_steering(broadside_angle(azimuth(irs[k], tx)), N)
        d_t = ula_steering(broadside_angle(azimuth(tx, irs[k])), M)
        D[k] = np.sqrt(M * N) * alpha * np.outer(d_r, d_t.conj())

    g_t = np.zeros((Q, M), complex)
    g_i = np.zeros((K, Q, N), complex)
    for q in range(Q):
        g_t[q] = tx_path(clutter[q], gamma[L + q], rng_c)
        for k in range(K):
            g_i[k, q] = irs_path(k, clutter[q], gamma_irs[k, L + q], rng_c)

    return ChannelSet(h_t=h_t, h_i=h_i, g_t=g_t, g_i=g_i, D=D,
                      gamma_tx=gamma.astype(np.int8), target_positions=targets,
                      gamma_irs=gamma_irs)


def tx_irs_departure(s: Scenario, k: int = 0) -> np.ndarray:
    """Departure steering vector d_t of the TX towards IRS ``k``."""
    return ula_steering(broadside_angle(azimuth(s.tx_position, s.irs_positions[k])), s.M)


# -- channel dump -------------------------------------------------------------

_ARRAYS = ("h_t", "h_i", "g_t", "g_i", "D")


def _encode(a: np.ndarray) -> dict:
    flat = np.asarray(a, complex).ravel(order="C")
    return {"shape": list(a.shape), "data": [[float(z.real), float(z.imag)] for z in flat]}


def _decode(d: dict) -> np.ndarray:
    data = np.asarray(d["data"], dtype=float).reshape(-1, 2)
    out = np.empty(data.shape[0], complex)
    out.real, out.imag = data[:, 0], data[:, 1]   # keeps signed zeros, unlike re + 1j*im
    return out.reshape(d["shape"])


def dump_channels(ch: ChannelSet) -> str:
    """Serialize a realization as JSON; complex arrays are row-major [re, im] pairs."""
    doc = {name: _encode(getattr(ch, name)) for name in _ARRAYS}
    doc["gamma_tx"] = ch.gamma_tx.astype(int).tolist()
    doc["gamma_irs"] = None if ch.gamma_irs is None else ch.gamma_irs.astype(int).tolist()
    doc["target_positions"] = np.asarray(ch.target_positions, float).tolist()
    return json.dumps(doc)


def load_channels(text: str) -> ChannelSet:
    doc = json.loads(text)
    arrays = {name: _decode(doc[name]) for name in _ARRAYS}
    L, Q = arrays["h_t"].shape[0], arrays["g_t"].shape[0]
    K = arrays["D"].shape[0]
    gi = doc.get("gamma_irs")
    return ChannelSet(
        **arrays,
        gamma_tx=np.asarray(doc["gamma_tx"], dtype=np.int8),
        target_positions=np.asarray(doc["target_positions"], float).reshape(L, 2),
        gamma_irs=np.asarray(gi, dtype=np.int8).reshape(K, L + Q) if gi is not None else None,
    )
