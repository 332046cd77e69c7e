from .config import ExperimentConfig, load_config, shipped_config
from .experiment import RunResult, run_experiment, scale_to_snr
from .report import aggregate

__all__ = ["ExperimentConfig", "RunResult", "aggregate", "load_config",
           "run_experiment", "scale_to_snr", "shipped_config"]
