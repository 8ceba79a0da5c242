from .configs import BatchConfig, CorruptionSpec, OnlineConfig, RobustConfig, SynthConfig
from .reports import MetricsReport, StepRecord

__all__ = [
    "BatchConfig",
    "CorruptionSpec",
    "OnlineConfig",
    "RobustConfig",
    "SynthConfig",
    "MetricsReport",
    "StepRecord",
]
