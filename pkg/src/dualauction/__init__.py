"""Discrete-event simulator of a wireless blockchain with a dual auction fee mechanism."""

from .config import Mechanism, SimConfig, make_config
from .engine import RunResult, run
from .metrics import RunMetrics, compute_metrics

__all__ = ["Mechanism", "SimConfig", "make_config", "RunResult", "run", "RunMetrics", "compute_metrics"]
__version__ = "0.1.0"
