import csv
import io
import json

import numpy as np
import pytest

from irsradar.channel import realize_channels
from irsradar.harness import (RECORD_COLUMNS, SUMMARY_COLUMNS, MetricsReport, Record, SweepError,
                              SweepSpec, apply_profile, emit_report, parse_records, parse_summary,
                              probability_of_blockage, run_sweep)
from irsradar.scenario import Scenario, sample_target_positions

TINY = Scenario(num_tx_antennas=4, num_irs_elements=3, randomization_trials=100, max_iterations=5)


def tiny_spec(**kw):
    base = dict(scenario=TINY, kappa_values=[1e6, 1e12], num_realizations=3, seed=11)
    base.update(kw)
    return SweepSpec(**base)


@pytest.mark.parametrize("kw, match", [
    (dict(kappa_values=[]), "nonempty"),
    (dict(kappa_values=[2.0, 1.0]), "increasing"),
    (dict(kappa_values=[1.0, 1.0]), "increasing"),
    (dict(kappa_values=[-1.0]), "> 0"),
    (dict(num_realizations=0), "positive"),
    (dict(designs=("joint", "greedy")), "unknown"),
    (dict(designs=()), "at least one"),
    (dict(workers=0), "workers"),
])
def test_spec_validation(kw, match):
    with pytest.raises(SweepError, match=match):
        tiny_spec(**kw)


def test_matched_filter_single_realization():
    s = TINY.replace(num_targets=1, clutter_positions=(), clutter_bounds=())
    spec = SweepSpec(scenario=s, kappa_values=[3.0], num_realizations=1, designs=("no_irs",), seed=4)
    rep = run_sweep(spec)
    rng = np.random.default_rng([4, 0])
    ch = realize_channels(s, sample_target_positions(s, 1, rng), rng)
    assert ch.gamma_tx[0] == 1
    expected = 3.0 * np.linalg.norm(ch.h_t[0]) ** 2
    assert rep.mean_min_power("no_irs", 3.0) == pytest.approx(expected, rel=1e-6)


def test_deterministic_and_worker_independent():
    a = emit_report(run_sweep(tiny_spec()))
    b = emit_report(run_sweep(tiny_spec()))
    c = emit_report(run_sweep(tiny_spec(workers=2)))
    assert a == b == c


def test_paired_channels_and_sorting():
    rep = run_sweep(tiny_spec())
    assert len(rep.records) == 4 * 2 * 3
    by_r = {}
    for r in rep.records:
        by_r.setdefault(r.realization, set()).add(r.channel_hash)
    assert all(len(h) == 1 for h in by_r.values())
    assert len({next(iter(h)) for h in by_r.values()}) == 3
    keys = [(r.design, r.kappa, r.realization) for r in rep.records]
    assert keys[:3] == [("joint", 1e6, 0), ("joint", 1e6, 1), ("joint", 1e6, 2)]
    for d, k in rep.cells():
        assert len(rep.cell(d, k)) == 3


def _report(values, feasible=None):
    spec = SweepSpec(scenario=TINY, kappa_values=[1.0], num_realizations=len(values), designs=("joint",))
    feasible = feasible or [True] * len(values)
    recs = [Record("joint", 1.0, i, 0, v if f else float("nan"), f, 1, None, "converged", "x")
            for i, (v, f) in enumerate(zip(values, feasible))]
    return MetricsReport(spec, recs)


def test_pb_counting():
    assert probability_of_blockage(_report([0.0, 0.0]))[("joint", 1.0)] == 1.0
    assert probability_of_blockage(_report([0.0, 0.0]), threshold=0.0)[("joint", 1.0)] == 0.0
    pb = probability_of_blockage(_report([0.4e-6, 0.6e-6, 0.3e-6]), threshold=0.5e-6)
    assert pb[("joint", 1.0)] == pytest.approx(2 / 3)


def test_infeasible_counts_blocked_and_leaves_mean():
    rep = _report([1.0, 2.0, 5.0], feasible=[True, True, False])
    assert probability_of_blockage(rep, threshold=0.5)[("joint", 1.0)] == pytest.approx(1 / 3)
    assert rep.mean_min_power("joint", 1.0) == pytest.approx(1.5)
    assert rep.n_infeasible("joint", 1.0) == 1
    assert [r.delivered_power for r in rep.records] == [1.0, 2.0, 0.0]


def test_all_infeasible_mean_is_nan_and_round_trips():
    rep = _report([1.0, 1.0], feasible=[False, False])
    for fmt in ("csv", "text"):
        row = parse_summary(emit_report(rep, fmt)["summary"], fmt)[0]
        assert np.isnan(row["mean_min_power_watts"]) and row["pb"] == 1.0 and row["n_infeasible"] == 2


def test_schema_one_cell():
    rep = run_sweep(tiny_spec(kappa_values=[1e9], designs=("no_irs",), num_realizations=4))
    docs = emit_report(rep, "csv")
    rec = list(csv.reader(io.StringIO(docs["records"])))
    summ = list(csv.reader(io.StringIO(docs["summary"])))
    assert tuple(rec[0]) == RECORD_COLUMNS and len(rec) == 1 + 4
    assert tuple(summ[0]) == SUMMARY_COLUMNS and len(summ) == 1 + 1
    assert all(row[-1] == "" for row in rec[1:])  # wall_ms blank unless timing was requested


def test_timing_fills_wall_ms():
    rep = run_sweep(tiny_spec(kappa_values=[1e9], designs=("no_irs",), num_realizations=2, record_timing=True))
    rows = parse_records(emit_report(rep)["records"])
    assert all(r["wall_ms"] > 0 for r in rows)


@pytest.mark.parametrize("fmt", ["csv", "text"])
def test_parse_back_reproduces_aggregates(fmt):
    rep = run_sweep(tiny_spec())
    docs = emit_report(rep, fmt)
    rows = parse_summary(docs["summary"], fmt)
    pb = probability_of_blockage(rep)
    for row in rows:
        d, k = row["design"], row["kappa_watts"]
        mean = rep.mean_min_power(d, k)
        assert (np.isnan(mean) and np.isnan(row["mean_min_power_watts"])) or row["mean_min_power_watts"] == mean
        assert row["pb"] == pb[(d, k)] and row["n_infeasible"] == rep.n_infeasible(d, k)
    recs = parse_records(docs["records"], fmt)
    assert len(recs) == len(rep.records)
    for a, b in zip(recs, rep.records):
        assert a["feasible"] == b.feasible and a["iterations"] == b.iterations
        assert (np.isnan(b.min_power) and np.isnan(a["min_power_watts"])) or a["min_power_watts"] == b.min_power


def test_text_format_is_json():
    docs = emit_report(run_sweep(tiny_spec(num_realizations=1)), "text")
    assert isinstance(json.loads(docs["summary"]), list)


def test_emit_errors():
    rep = MetricsReport(tiny_spec(), [])
    with pytest.raises(SweepError):
        emit_report(rep)
    with pytest.raises(SweepError):
        emit_report(run_sweep(tiny_spec(num_realizations=1)), "xml")


def test_profiles():
    s = apply_profile(Scenario(), "desk")
    assert (s.M, s.N, s.L, s.randomization_trials) == (16, 16, 2, 1000)
    s = apply_profile(s, "paper")
    assert (s.M, s.N, s.randomization_trials) == (64, 100, 5000)
    with pytest.raises(SweepError):
        apply_profile(s, "huge")
