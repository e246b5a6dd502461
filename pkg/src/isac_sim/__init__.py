"""Sensing-assisted communication through an intelligent omni-surface on a vehicle."""

from .config import ConfigError, SystemConfig, parse_config, reference_config
from .optimizer import SearchSpec, optimize_slot
from .rates import SlotContext
from .simulation import SCHEMES, TrajectoryResult, run_trajectory, sweep_power, validate_snr_convergence

__version__ = "0.1.0"
