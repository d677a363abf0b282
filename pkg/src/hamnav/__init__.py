"""Hand-drawn map navigation: sketch parsing, topological localization and
planning, and a deterministic grid-world evaluation harness."""

__version__ = "0.1.0"

from . import errors
from .pipeline import AblationFlags, PipelineConfig, run
from .reasoning import OracleBackend, OracleRules, RemoteBackend, RemoteConfig
from .simulator import DistortionConfig, distort, ground_truth_sketch, load_world

__all__ = [
    "errors",
    "AblationFlags",
    "PipelineConfig",
    "run",
    "OracleBackend",
    "OracleRules",
    "RemoteBackend",
    "RemoteConfig",
    "DistortionConfig",
    "distort",
    "ground_truth_sketch",
    "load_world",
]
