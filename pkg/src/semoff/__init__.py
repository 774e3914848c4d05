"""Slotted-time simulator and optimization library for semantic-extraction
task offloading in a multi-SBS MEC system.

Two time scales: user admission is decided once per long slot, while user
association, bandwidth, and computing allocations are re-optimized every
short slot against a drift-plus-penalty objective over three tandem queues.
"""

__version__ = "0.1.0"

from .scenario import ScenarioConfig, Topology, load_config, place_topology, step_mobility
from .tasks import TaskType, StsDemand, complexity, required_compute
from .queues import QueueState, DriftRecord, lyapunov
from .allocator import AllocationDecision, DelayBreakdown
from .engine import LtsRecord, StsRecord, run, run_baseline, emit_metrics

__all__ = [
    "ScenarioConfig",
    "Topology",
    "load_config",
    "place_topology",
    "step_mobility",
    "TaskType",
    "StsDemand",
    "complexity",
    "required_compute",
    "QueueState",
    "DriftRecord",
    "lyapunov",
    "AllocationDecision",
    "DelayBreakdown",
    "LtsRecord",
    "StsRecord",
    "run",
    "run_baseline",
    "emit_metrics",
]
