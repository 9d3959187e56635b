"""Monte Carlo sweep over transmit power for the four designs.

Realization ``r`` of a sweep seeded with ``seed`` draws its targets and
channels from ``default_rng([seed, r])``; every design then runs on that same
ChannelSet with its own stream ``default_rng([seed, r, 1])``. Sharing the
design stream makes joint and active-only start from the same first iterate,
and the channel hash stored on each record makes the pairing checkable.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beamform import DESIGNS, DesignResult, DesignStatus, InfeasibleDesign
from .channel import ChannelSet, realize_channels
from .scenario import Scenario, sample_target_positions
from .sdp import SdpError

log = logging.getLogger(__name__)

DESIGN_NAMES = tuple(DESIGNS)
RECORD_COLUMNS = ("design", "kappa_watts", "realization", "seed", "min_power_watts",
                  "feasible", "iterations", "wall_ms")
SUMMARY_COLUMNS = ("design", "kappa_watts", "mean_min_power_watts", "pb", "n_infeasible")


class SweepError(ValueError):
    pass


@dataclass
class SweepSpec:
    scenario: Scenario
    kappa_values: list[float]
    num_realizations: int = 50
    designs: tuple[str, ...] = DESIGN_NAMES
    seed: int = 0
    workers: int = 1
    record_timing: bool = False
    keep_results: bool = False

    def __post_init__(self) -> None:
        self.kappa_values = [float(k) for k in self.kappa_values]
        self.designs = tuple(self.designs)
        self.validate()

    def validate(self) -> None:
        if not self.kappa_values:
            raise SweepError("kappa_values must be nonempty")
        if any(not k > 0 for k in self.kappa_values):
            raise SweepError("every kappa must be > 0")
        if any(b <= a for a, b in zip(self.kappa_values, self.kappa_values[1:])):
            raise SweepError("kappa_values must be strictly increasing")
        if isinstance(self.num_realizations, bool) or int(self.num_realizations) != self.num_realizations \
                or self.num_realizations < 1:
            raise SweepError("num_realizations must be a positive integer")
        if not self.designs:
            raise SweepError("at least one design is required")
        unknown = [d for d in self.designs if d not in DESIGNS]
        if unknown:
            raise SweepError(f"unknown designs {unknown}; choose from {list(DESIGNS)}")
        if len(set(self.designs)) != len(self.designs):
            raise SweepError("designs must not repeat")
        if self.workers < 1:
            raise SweepError("workers must be >= 1")


@dataclass
class Record:
    design: str
    kappa: float
    realization: int
    seed: int
    min_power: float          # NaN when infeasible
    feasible: bool
    iterations: int
    wall_ms: float | None
    status: str
    channel_hash: str
    note: str = ""
    result: DesignResult | None = None

    @property
    def delivered_power(self) -> float:
        """Min power with an infeasible design counted as no admissible illumination."""
        return self.min_power if self.feasible else 0.0


@dataclass
class MetricsReport:
    spec: SweepSpec
    records: list[Record] = field(default_factory=list)

    def cell(self, design: str, kappa: float) -> list[Record]:
        return [r for r in self.records if r.design == design and r.kappa == kappa]

    def mean_min_power(self, design: str, kappa: float) -> float:
        """Mean over feasible realizations; NaN if none were feasible."""
        vals = [r.min_power for r in self.cell(design, kappa) if r.feasible]
        return float(np.mean(vals)) if vals else float("nan")

    def n_infeasible(self, design: str, kappa: float) -> int:
        return sum(not r.feasible for r in self.cell(design, kappa))

    def cells(self) -> list[tuple[str, float]]:
        return [(d, k) for d in self.spec.designs for k in self.spec.kappa_values]


# -- running ----------------------------------------------------------------------------

def _realization(spec: SweepSpec, r: int) -> list[Record]:
    s0 = spec.scenario
    rng = np.random.default_rng([spec.seed, r])
    targets = sample_target_positions(s0, s0.L, rng)
    ch = realize_channels(s0, targets, rng)
    digest = ch.fingerprint()
    out = []
    for kappa in spec.kappa_values:
        s = s0.replace(power_budget=kappa)
        for name in spec.designs:
            out.append(_run_design(name, ch, s, spec, r, kappa, digest))
    return out


def _run_design(name: str, ch: ChannelSet, s: Scenario, spec: SweepSpec, r: int,
                kappa: float, digest: str) -> Record:
    rng = np.random.default_rng([spec.seed, r, 1])
    t0 = time.perf_counter()
    note = ""
    try:
        res = DESIGNS[name](ch, s, rng)
    except (InfeasibleDesign, SdpError, np.linalg.LinAlgError) as exc:
        res = None
        note = f"{type(exc).__name__}: {exc}"
        log.warning("realization %d design %s kappa %g failed: %s", r, name, kappa, exc)
    wall = 1e3 * (time.perf_counter() - t0)
    feasible = res is not None and res.status is not DesignStatus.INFEASIBLE
    return Record(
        design=name, kappa=kappa, realization=r, seed=spec.seed,
        min_power=res.min_power if feasible else float("nan"),
        feasible=feasible,
        iterations=res.iterations if res is not None else 0,
        wall_ms=wall if spec.record_timing else None,
        status=res.status.value if res is not None else "error",
        channel_hash=digest,
        note=note or (res.note if res is not None else ""),
        result=res if spec.keep_results else None,
    )


def _sort_key(rec: Record):
    return (DESIGN_NAMES.index(rec.design), rec.kappa, rec.realization)


def run_sweep(spec: SweepSpec) -> MetricsReport:
    """Run every requested design on R paired realizations for each kappa."""
    spec.validate()
    rs = range(spec.num_realizations)
    if spec.workers == 1:
        chunks = [_realization(spec, r) for r in rs]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_realization, [spec] * len(rs), rs))
    records = sorted((rec for chunk in chunks for rec in chunk), key=_sort_key)
    return MetricsReport(spec=spec, records=records)


def probability_of_blockage(report: MetricsReport, threshold: float | None = None) -> dict:
    """Fraction of realizations per (design, kappa) with min power strictly below threshold.

    Infeasible realizations count as blocked.
    """
    if threshold is None:
        threshold = report.spec.scenario.blockage_threshold
    out = {}
    for d, k in report.cells():
        cell = report.cell(d, k)
        if not cell:
            continue
        blocked = sum((not r.feasible) or r.min_power < threshold for r in cell)
        out[(d, k)] = blocked / len(cell)
    return out


# -- emission ----------------------------------------------------------------------------

def _num(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


def summary_rows(report: MetricsReport) -> list[dict]:
    pb = probability_of_blockage(report)
    return [{
        "design": d,
        "kappa_watts": k,
        "mean_min_power_watts": report.mean_min_power(d, k),
        "pb": pb[(d, k)],
        "n_infeasible": report.n_infeasible(d, k),
    } for d, k in report.cells() if (d, k) in pb]


def record_rows(report: MetricsReport) -> list[dict]:
    return [{
        "design": r.design,
        "kappa_watts": r.kappa,
        "realization": r.realization,
        "seed": r.seed,
        "min_power_watts": r.min_power,
        "feasible": r.feasible,
        "iterations": r.iterations,
        "wall_ms": r.wall_ms,
    } for r in report.records]


def _csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, float) or v is None else
                    str(v).lower() if isinstance(v, bool) else v
                    for v in (row[c] for c in columns)])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)   # JSON has no NaN; keep it as the string "nan"
    return v


def emit_report(report: MetricsReport, fmt: str = "csv") -> dict[str, str]:
    """Render the report as documents keyed "records" and "summary".

    ``csv`` gives two CSV tables; ``text`` gives the same rows as JSON lists.
    """
    if not report.records:
        raise SweepError("cannot emit an empty report")
    rec, summ = record_rows(report), summary_rows(report)
    if fmt == "csv":
        return {"records": _csv(rec, RECORD_COLUMNS), "summary": _csv(summ, SUMMARY_COLUMNS)}
    if fmt == "text":
        dump = lambda rows: json.dumps([{k: _json_value(v) for k, v in row.items()} for row in rows],
                                       indent=1) + "\n"
        return {"records": dump(rec), "summary": dump(summ)}
    raise SweepError(f"unknown format {fmt!r}; use csv or text")


def parse_summary(text: str, fmt: str = "csv") -> list[dict]:
    """Read an emitted aggregate table back into typed rows."""
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    elif fmt == "text":
        rows = json.loads(text)
    else:
        raise SweepError(f"unknown format {fmt!r}")
    return [{
        "design": row["design"],
        "kappa_watts": float(row["kappa_watts"]),
        "mean_min_power_watts": float(row["mean_min_power_watts"]),
        "pb": float(row["pb"]),
        "n_infeasible": int(row["n_infeasible"]),
    } for row in rows]


def parse_records(text: str, fmt: str = "csv") -> list[dict]:
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    elif fmt == "text":
        rows = json.loads(text)
    else:
        raise SweepError(f"unknown format {fmt!r}")
    out = []
    for row in rows:
        feas = row["feasible"]
        wall = row["wall_ms"]
        out.append({
            "design": row["design"],
            "kappa_watts": float(row["kappa_watts"]),
            "realization": int(row["realization"]),
            "seed": int(row["seed"]),
            "min_power_watts": float(row["min_power_watts"]),
            "feasible": feas if isinstance(feas, bool) else feas == "true",
            "iterations": int(row["iterations"]),
            "wall_ms": None if wall in ("", None) else float(wall),
        })
    return out


# -- profiles ----------------------------------------------------------------------------

PROFILES = {
    # desk scale is the default; the reference scale is supported but slow
    "desk": dict(num_tx_antennas=16, num_irs_elements=16, num_targets=2, randomization_trials=1000),
    "paper": dict(num_tx_antennas=64, num_irs_elements=100, num_targets=2, randomization_trials=5000),
}
PROFILE_REALIZATIONS = {"desk": 50, "paper": 100}


def apply_profile(s: Scenario, name: str) -> Scenario:
    try:
        return s.replace(**PROFILES[name])
    except KeyError:
        raise SweepError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def design_single(s: Scenario, seed: int, designs=DESIGN_NAMES, realization: int = 0) -> dict:
    """Run one realization (the one a sweep with this seed uses at index ``realization``)."""
    rng = np.random.default_rng([seed, realization])
    targets = sample_target_positions(s, s.L, rng)
    ch = realize_channels(s, targets, rng)
    out = {"seed": seed, "realization": realization, "kappa_watts": s.kappa,
           "target_positions": targets.tolist(), "gamma_tx": ch.gamma_tx.tolist(),
           "channel_hash": ch.fingerprint(), "designs": {}}
    for name in designs:
        try:
            res = DESIGNS[name](ch, s, np.random.default_rng([seed, realization, 1]))
            out["designs"][name] = res.to_dict()
        except InfeasibleDesign as exc:
            out["designs"][name] = {"status": "infeasible", "note": str(exc)}
    return out
