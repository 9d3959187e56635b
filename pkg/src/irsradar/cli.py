"""Command line entry point: ``irsradar sweep | design | validate``.

Exit codes: 0 success, 1 configuration error, 2 runtime or solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import (DESIGN_NAMES, PROFILE_REALIZATIONS, SweepError, SweepSpec, apply_profile,
                      design_single, emit_report, run_sweep)
from .scenario import PRESETS, Scenario, ScenarioError, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

DEFAULT_KAPPA = (1e4, 1e13, 5)


class ConfigError(Exception):
    pass


def _scenario(args) -> Scenario:
    if args.scenario:
        try:
            text = Path(args.scenario).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file: {exc}") from exc
        s = load_scenario(text)
    else:
        s = Scenario()
    profile = getattr(args, "profile", None) or ("file" if args.scenario else "desk")
    if profile != "file":
        s = apply_profile(s, profile)
    preset = getattr(args, "preset", "custom")
    if preset != "custom":
        s = s.with_preset(preset)
    return s


def _designs(text: str) -> tuple[str, ...]:
    names = tuple(d.strip() for d in text.split(",") if d.strip())
    bad = [d for d in names if d not in DESIGN_NAMES]
    if bad or not names:
        raise ConfigError(f"unknown designs {bad}; choose from {','.join(DESIGN_NAMES)}")
    return names


def _summary_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_summary{out.suffix or '.csv'}")


def cmd_sweep(args) -> int:
    s = _scenario(args)
    if args.kappa_steps < 1:
        raise ConfigError("--kappa-steps must be >= 1")
    if not (args.kappa_start > 0 and args.kappa_stop >= args.kappa_start):
        raise ConfigError("need 0 < --kappa-start <= --kappa-stop")
    kappas = np.geomspace(args.kappa_start, args.kappa_stop, args.kappa_steps).tolist()
    if args.realizations is None:
        profile = args.profile or ("file" if args.scenario else "desk")
        args.realizations = PROFILE_REALIZATIONS.get(profile, 50)
    spec = SweepSpec(scenario=s, kappa_values=kappas, num_realizations=args.realizations,
                     designs=_designs(args.designs), seed=args.seed, workers=args.workers,
                     record_timing=args.timing)
    report = run_sweep(spec)
    docs = emit_report(report, args.format)
    if args.out:
        out = Path(args.out)
        out.write_text(docs["records"])
        _summary_path(out).write_text(docs["summary"])
        print(f"wrote {out} and {_summary_path(out)}", file=sys.stderr)
    else:
        sys.stdout.write(docs["summary"])
    return EXIT_OK


def cmd_design(args) -> int:
    s = _scenario(args)
    if args.kappa is not None:
        s = s.replace(power_budget=args.kappa)
    doc = design_single(s, args.seed, _designs(args.designs), args.realization)
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def cmd_validate(args) -> int:
    s = _scenario(args)
    print(f"ok: M={s.M} N={s.N} K={s.K} L={s.L} Q={s.Q} kappa={s.kappa:g} W")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsradar",
                                description="IRS-assisted radar beamforming simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, presets=True):
        sp.add_argument("--scenario", help="YAML scenario file (defaults to the reference setup)")
        sp.add_argument("--profile", choices=("desk", "paper", "file"),
                        help="array/trial sizes; default desk without --scenario, file with it")
        if presets:
            sp.add_argument("--preset", choices=(*PRESETS, "custom"), default="custom",
                            help="clutter layout; custom keeps the scenario's own")

    sw = sub.add_parser("sweep", help="Monte Carlo sweep over transmit power")
    common(sw)
    sw.add_argument("--designs", default=",".join(DESIGN_NAMES))
    sw.add_argument("--kappa-start", type=float, default=DEFAULT_KAPPA[0], help="watts")
    sw.add_argument("--kappa-stop", type=float, default=DEFAULT_KAPPA[1], help="watts")
    sw.add_argument("--kappa-steps", type=int, default=DEFAULT_KAPPA[2],
                    help="log-spaced points between start and stop")
    sw.add_argument("--realizations", type=int, help="R (default 50 desk, 100 paper)")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", help="records file; the aggregate goes next to it as *_summary")
    sw.add_argument("--format", choices=("csv", "text"), default="csv")
    sw.add_argument("--timing", action="store_true",
                    help="fill wall_ms (output is then no longer bitwise reproducible)")
    sw.set_defaults(func=cmd_sweep)

    de = sub.add_parser("design", help="run all designs on one realization and print JSON")
    common(de)
    de.add_argument("--seed", type=int, default=0)
    de.add_argument("--realization", type=int, default=0)
    de.add_argument("--kappa", type=float, help="override the power budget (watts)")
    de.add_argument("--designs", default=",".join(DESIGN_NAMES))
    de.set_defaults(func=cmd_design)

    va = sub.add_parser("validate", help="check a scenario file")
    common(va)
    va.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, SweepError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report anything else as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
