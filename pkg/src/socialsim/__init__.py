"""Theory-driven generative social agents in a discrete-time city simulation."""

from .cognition import CognitionBackend, CognitionRequest, CognitionResponse
from .cognition.oracle import OracleBackend
from .config import RunConfig, load_config, parse_config
from .engine import RunResult, Simulation, run, step
from .world import WorldState, apply_restriction_schedule, build_world, load_world

__version__ = "0.1.0"

__all__ = [
    "CognitionBackend",
    "CognitionRequest",
    "CognitionResponse",
    "OracleBackend",
    "RunConfig",
    "RunResult",
    "Simulation",
    "WorldState",
    "apply_restriction_schedule",
    "build_world",
    "load_config",
    "load_world",
    "parse_config",
    "run",
    "step",
]
