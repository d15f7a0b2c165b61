"""Discrete-time simulator of opportunistic dissemination in mobile ad-hoc
networks: collision channel, bounded-speed adversarial mobility, window
connectivity audits, randomized transmission protocols, closed-form budget
bounds, and a seeded experiment harness."""

from .adversaries import AdversarySpec, ScriptedTable, build_initial_layout, make_adversary
from .bounds import bound_report, ub_budget
from .channel import resolve_slot
from .connectivity import AuditReport, audit_alpha_beta
from .core import (
    GeometryError,
    MotionError,
    ParamError,
    ScheduleError,
    SimConfig,
    Trace,
    WorldState,
    read_trace,
    write_trace,
)
from .engine import RunResult, run
from .experiments import ExperimentPlan, fit_scaling, run_sweep
from .protocols import ProtocolSpec

__version__ = "0.1.0"

__all__ = [
    "AdversarySpec",
    "AuditReport",
    "ExperimentPlan",
    "GeometryError",
    "MotionError",
    "ParamError",
    "ProtocolSpec",
    "RunResult",
    "ScheduleError",
    "ScriptedTable",
    "SimConfig",
    "Trace",
    "WorldState",
    "audit_alpha_beta",
    "bound_report",
    "build_initial_layout",
    "fit_scaling",
    "make_adversary",
    "read_trace",
    "resolve_slot",
    "run",
    "run_sweep",
    "ub_budget",
    "write_trace",
    "__version__",
]
