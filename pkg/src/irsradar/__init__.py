"""Joint transmit and IRS phase-shift design for a multi-target radar.

Modules: ``scenario`` (geometry and configuration), ``channel`` (channel
realizations), ``sdp`` (complex Hermitian SDP solver and randomization),
``beamform`` (alternating design and baselines) and ``harness`` (Monte Carlo
sweeps over transmit power).
"""

from .beamform import (DESIGNS, Beamformer, DesignResult, DesignStatus, InfeasibleDesign,
                       PhaseProfile, joint_design)
from .channel import ChannelSet, realize_channels
from .harness import MetricsReport, SweepSpec, emit_report, probability_of_blockage, run_sweep
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "DESIGNS", "Beamformer", "ChannelSet", "DesignResult", "DesignStatus", "InfeasibleDesign",
    "MetricsReport", "PhaseProfile", "Scenario", "SweepSpec", "emit_report", "joint_design",
    "load_scenario", "probability_of_blockage", "realize_channels", "run_sweep",
]
