"""Homodyne-free characterization of Gaussian light from no-click statistics.

Squeezing variance, purity and logarithmic negativity are recovered from
the probability that on/off detectors behind variable beam splitters do
not click.
"""

__version__ = "0.1.0"

from .core import (
    CONVENTION,
    GaussianState,
    coherent,
    make_state,
    squeezed_vacuum,
    thermal,
    two_mode_squeezed_vacuum,
    vacuum,
)
from .entanglement import NegativityReport, Verdict, measure_negativity_pipeline
from .errors import ClicklessError
from .estimator import Observation, estimate_from_tally, estimate_multimode, estimate_single_mode
from .optics import (
    DetectorSetting,
    SettingSchedule,
    TallyTable,
    fock_no_click_oracle,
    multimode_no_click_probability,
    no_click_probability,
    simulate_tallies,
)

__all__ = [
    "CONVENTION", "ClicklessError", "DetectorSetting", "GaussianState", "NegativityReport",
    "Observation", "SettingSchedule", "TallyTable", "Verdict", "coherent", "estimate_from_tally",
    "estimate_multimode", "estimate_single_mode", "fock_no_click_oracle", "make_state",
    "measure_negativity_pipeline", "multimode_no_click_probability", "no_click_probability",
    "simulate_tallies", "squeezed_vacuum", "thermal", "two_mode_squeezed_vacuum", "vacuum",
]
