"""Timeliness analysis of periodic clients sharing a preemptive edge server.

Exact latency, peak-age and expected-age metrics under processor sharing and
FIFO scheduling, verified against an independent discrete-event simulator.
"""

__version__ = "0.1.0"

from .metrics import DistributionCurve, jain_index, percentile
from .scenario import Policy, Scenario, ScenarioError, load_scenario, validate

__all__ = [
    "DistributionCurve",
    "Policy",
    "Scenario",
    "ScenarioError",
    "jain_index",
    "load_scenario",
    "percentile",
    "validate",
    "__version__",
]
