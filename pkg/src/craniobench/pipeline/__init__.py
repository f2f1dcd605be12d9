from .config import PipelineConfig, SelectionConfig, OperatorSpec, ConfigError, load_config, save_config
from .cache import CaseRecord, Repository, build_cache
from .run import ReconstructionRun, RunManifest, run_reconstruction, evaluate_case

__all__ = [
    "PipelineConfig",
    "SelectionConfig",
    "OperatorSpec",
    "ConfigError",
    "load_config",
    "save_config",
    "CaseRecord",
    "Repository",
    "build_cache",
    "ReconstructionRun",
    "RunManifest",
    "run_reconstruction",
    "evaluate_case",
]
