"""Latency and reliability of grant-free uplink access with massive MIMO and HARQ."""

from .config import ConfigError, HarqScheme, SystemConfig
from .analytical import lafp, lafp_curve
from .simulator import FailureCurve, run_trials

__all__ = ["ConfigError", "HarqScheme", "SystemConfig", "lafp", "lafp_curve", "FailureCurve", "run_trials"]
