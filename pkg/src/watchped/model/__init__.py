"""The three-branch crossing-intention model."""

from .config import ArchConfig, desk_config, full_config, load_config
from .params import (
    ConvLayer,
    Cnn1Params,
    Cnn2Params,
    ModelParams,
    load_cnn1_file,
    load_cnn2_file,
)
from .branches import (
    MODES,
    RunContext,
    FeatureVector,
    CrossingPrediction,
    non_vision_forward,
    vision_forward,
    pooled_context_sequence,
    sensor_cnn1_forward,
    sensor_cnn1_logits,
    sensor_cnn2_encode,
    sensor_cnn2_logits,
    sensor_branch_forward,
    initial_fusion,
    final_fusion,
    window_probability,
    predict,
)

__all__ = [
    "ArchConfig",
    "desk_config",
    "full_config",
    "load_config",
    "ConvLayer",
    "Cnn1Params",
    "Cnn2Params",
    "ModelParams",
    "load_cnn1_file",
    "load_cnn2_file",
    "MODES",
    "RunContext",
    "FeatureVector",
    "CrossingPrediction",
    "non_vision_forward",
    "vision_forward",
    "pooled_context_sequence",
    "sensor_cnn1_forward",
    "sensor_cnn1_logits",
    "sensor_cnn2_encode",
    "sensor_cnn2_logits",
    "sensor_branch_forward",
    "initial_fusion",
    "final_fusion",
    "window_probability",
    "predict",
]
