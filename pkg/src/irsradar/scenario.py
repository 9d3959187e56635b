"""Experiment configuration: geometry, array sizes, budgets and target placement."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

Point = tuple[float, float]

Q3_CLUTTER: tuple[Point, ...] = ((-75.0, 125.0), (0.0, 125.0), (75.0, 125.0))
Q9_CLUTTER: tuple[Point, ...] = (
    (-75.0, 100.0), (0.0, 100.0), (75.0, 100.0),
    (-75.0, 125.0), (0.0, 125.0), (75.0, 125.0),
    (-75.0, 150.0), (0.0, 150.0), (75.0, 150.0),
)
PRESETS: dict[str, tuple[Point, ...]] = {"q3": Q3_CLUTTER, "q9": Q9_CLUTTER}

DEFAULT_ETA = 0.5e-6


class ScenarioError(ValueError):
    """Raised when a configuration cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class Scenario:
    tx_position: Point = (0.0, 0.0)
    irs_positions: tuple[Point, ...] = ((-130.0, 75.0), (130.0, 75.0))
    clutter_positions: tuple[Point, ...] = Q3_CLUTTER
    target_box: tuple[float, float, float, float] = (-75.0, 75.0, 150.0, 250.0)
    num_tx_antennas: int = 64
    num_irs_elements: int = 100
    num_targets: int = 2
    power_budget: float = 1.0
    clutter_bounds: tuple[float, ...] = (DEFAULT_ETA,) * 3
    convergence_tol: float = 1e-3
    randomization_trials: int = 5000
    max_iterations: int = 20
    blockage_threshold: float = 0.5e-6
    pathloss_params: tuple[float, float, float] = (64.0, 2.0, 5.8)
    rng_seed: int = 0
    irs_path_blockage: bool = False
    phase_init: str = "identity"

    def __post_init__(self) -> None:
        # normalise list-ish inputs so equality and hashing behave
        object.__setattr__(self, "tx_position", _point(self.tx_position))
        object.__setattr__(self, "irs_positions", tuple(_point(p) for p in self.irs_positions))
        object.__setattr__(self, "clutter_positions", tuple(_point(p) for p in self.clutter_positions))
        object.__setattr__(self, "target_box", tuple(float(v) for v in self.target_box))
        object.__setattr__(self, "clutter_bounds", tuple(float(v) for v in self.clutter_bounds))
        object.__setattr__(self, "pathloss_params", tuple(float(v) for v in self.pathloss_params))
        self.validate()

    # paper-style short names
    @property
    def M(self) -> int:
        return self.num_tx_antennas

    @property
    def N(self) -> int:
        return self.num_irs_elements

    @property
    def K(self) -> int:
        return len(self.irs_positions)

    @property
    def L(self) -> int:
        return self.num_targets

    @property
    def Q(self) -> int:
        return len(self.clutter_positions)

    @property
    def kappa(self) -> float:
        return self.power_budget

    @property
    def eta(self) -> np.ndarray:
        return np.asarray(self.clutter_bounds, dtype=float)

    def validate(self) -> None:
        if len(self.target_box) != 4:
            raise ScenarioError("target_box must be (x_min, x_max, y_min, y_max)")
        x0, x1, y0, y1 = self.target_box
        if not (x1 > x0 and y1 > y0):
            raise ScenarioError("target_box must have positive area")
        for name in ("num_tx_antennas", "num_irs_elements", "num_targets",
                     "randomization_trials", "max_iterations"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ScenarioError(f"{name} must be a positive integer, got {v!r}")
        if len(self.clutter_bounds) != len(self.clutter_positions):
            raise ScenarioError(
                f"clutter_bounds has {len(self.clutter_bounds)} entries but there are "
                f"{len(self.clutter_positions)} clutter positions")
        if any(not eta > 0 for eta in self.clutter_bounds):
            raise ScenarioError("every clutter bound eta_q must be > 0")
        if not self.power_budget > 0:
            raise ScenarioError(f"power budget kappa must be > 0, got {self.power_budget}")
        if not self.convergence_tol > 0:
            raise ScenarioError(f"convergence tolerance must be > 0, got {self.convergence_tol}")
        if not self.blockage_threshold >= 0:
            raise ScenarioError("blockage_threshold must be >= 0")
        if len(self.pathloss_params) != 3 or self.pathloss_params[2] < 0:
            raise ScenarioError("pathloss params must be (a, b, sigma_db) with sigma_db >= 0")
        if self.phase_init not in ("identity", "random"):
            raise ScenarioError(f"phase_init must be 'identity' or 'random', got {self.phase_init!r}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ScenarioError("seed must fit in an unsigned 64-bit integer")

    def replace(self, **changes: Any) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_preset(self, name: str) -> "Scenario":
        """Swap in one of the built-in clutter layouts, keeping the per-clutter bound."""
        try:
            clutter = PRESETS[name]
        except KeyError:
            raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        eta = self.clutter_bounds[0] if self.clutter_bounds else DEFAULT_ETA
        return self.replace(clutter_positions=clutter, clutter_bounds=(eta,) * len(clutter))


def _point(p: Any) -> Point:
    try:
        x, y = p
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise ScenarioError(f"expected a 2D point, got {p!r}") from None


# config key -> Scenario field
_KEYS = {
    "tx_position": "tx_position",
    "irs_positions": "irs_positions",
    "clutter_positions": "clutter_positions",
    "target_box": "target_box",
    "M": "num_tx_antennas",
    "N": "num_irs_elements",
    "L": "num_targets",
    "kappa_watts": "power_budget",
    "eta_watts": "clutter_bounds",
    "epsilon": "convergence_tol",
    "trials_I": "randomization_trials",
    "max_iterations": "max_iterations",
    "blockage_threshold_watts": "blockage_threshold",
    "seed": "rng_seed",
    "irs_path_blockage": "irs_path_blockage",
    "phase_init": "phase_init",
}
_PATHLOSS_KEYS = ("pathloss_a", "pathloss_b", "pathloss_sigma_db")


def load_scenario(config_text: str) -> Scenario:
    """Parse a flat YAML key/value document into a validated Scenario.

    ``L`` (the number of targets) is required because the reference setup
    does not fix it; every other missing key keeps the reference default. ``eta_watts`` may be
    a list (one bound per clutter scatterer) or a single number that is
    broadcast; when omitted every scatterer gets 0.5 uW.
    """
    try:
        raw = yaml.safe_load(config_text) if config_text.strip() else {}
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must be a mapping of keys to values")

    unknown = set(raw) - set(_KEYS) - set(_PATHLOSS_KEYS)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    if "L" not in raw:
        raise ScenarioError("missing required key L (number of targets)")

    kwargs: dict[str, Any] = {}
    for key, fname in _KEYS.items():
        if key in raw:
            kwargs[fname] = raw[key]

    defaults = Scenario.__dataclass_fields__
    if any(k in raw for k in _PATHLOSS_KEYS):
        base = defaults["pathloss_params"].default
        kwargs["pathloss_params"] = tuple(
            raw.get(k, base[i]) for i, k in enumerate(_PATHLOSS_KEYS))

    q = len(kwargs.get("clutter_positions", defaults["clutter_positions"].default))
    eta = kwargs.get("clutter_bounds")
    if eta is None:
        kwargs["clutter_bounds"] = (DEFAULT_ETA,) * q
    elif isinstance(eta, (int, float)):
        kwargs["clutter_bounds"] = (float(eta),) * q

    try:
        return Scenario(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"bad value type in scenario: {exc}") from exc


def serialize_scenario(s: Scenario) -> str:
    """Inverse of :func:`load_scenario`."""
    doc: dict[str, Any] = {
        "tx_position": list(s.tx_position),
        "irs_positions": [list(p) for p in s.irs_positions],
        "clutter_positions": [list(p) for p in s.clutter_positions],
        "target_box": list(s.target_box),
        "M": s.num_tx_antennas,
        "N": s.num_irs_elements,
        "L": s.num_targets,
        "kappa_watts": s.power_budget,
        "eta_watts": list(s.clutter_bounds),
        "epsilon": s.convergence_tol,
        "trials_I": s.randomization_trials,
        "max_iterations": s.max_iterations,
        "blockage_threshold_watts": s.blockage_threshold,
        "pathloss_a": s.pathloss_params[0],
        "pathloss_b": s.pathloss_params[1],
        "pathloss_sigma_db": s.pathloss_params[2],
        "seed": int(s.rng_seed),
        "irs_path_blockage": s.irs_path_blockage,
        "phase_init": s.phase_init,
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def sample_target_positions(s: Scenario, count: int, rng: np.random.Generator,
                            box: tuple[float, float, float, float] | None = None) -> np.ndarray:
    """Draw ``count`` target positions uniformly over the scenario's target box.

    ``box`` overrides the scenario box (a zero-area box pins the targets).
    Returns an array of shape (count, 2).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    x0, x1, y0, y1 = s.target_box if box is None else box
    if x1 < x0 or y1 < y0:
        raise ValueError(f"invalid box {box}")
    xs = rng.uniform(x0, x1, size=count)
    ys = rng.uniform(y0, y1, size=count)
    return np.column_stack([xs, ys])
