"""Peak age of information for TETRA short-data status updates: closed forms,
an abstract single-server simulator, and a slot-level TMO/DMO protocol simulator."""
from .analytic import paoi, paoi_npr, paoi_pr, paoi_prrt, preemption_prob
from .core import Discipline, ModelParams, ParameterError, RngStream, SlotClock, Update
from .metrics import AoiTracker, LossLedger, RunResult, summarize
from .abstract_queue import simulate_abstract
from .scenario import ScenarioConfig, build, load_config, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AoiTracker", "Discipline", "LossLedger", "ModelParams", "ParameterError", "RngStream",
    "RunResult", "ScenarioConfig", "SlotClock", "Update", "build", "load_config", "paoi",
    "paoi_npr", "paoi_pr", "paoi_prrt", "preemption_prob", "run_scenario", "simulate_abstract",
    "summarize",
]
