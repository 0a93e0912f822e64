"""Training loops, metrics and the stratified evaluation report."""

from .dataset import (
    WindowRecord,
    distance_stratum,
    windows_from_episode,
    load_suite,
    split_dataset,
)
from .metrics import compute_metrics, roc_points, auc_trapezoid
from .loop import (
    TrainConfig,
    cut_stream_windows,
    activity_streams,
    train_sensor_cnn1,
    evaluate_cnn1,
    cnn2_training_windows,
    train_sensor_cnn2,
    train_full,
    evaluate_model,
    CNN2_FRAME,
    CNN2_HOP,
)
from .report import (
    ABSTENTION_MODES,
    StratumRow,
    EvalReport,
    stratified_report,
    write_report_csv,
    read_report_csv,
    long_format_rows,
)

__all__ = [
    "WindowRecord",
    "distance_stratum",
    "windows_from_episode",
    "load_suite",
    "split_dataset",
    "compute_metrics",
    "roc_points",
    "auc_trapezoid",
    "TrainConfig",
    "cut_stream_windows",
    "activity_streams",
    "train_sensor_cnn1",
    "evaluate_cnn1",
    "cnn2_training_windows",
    "train_sensor_cnn2",
    "train_full",
    "evaluate_model",
    "CNN2_FRAME",
    "CNN2_HOP",
    "ABSTENTION_MODES",
    "StratumRow",
    "EvalReport",
    "stratified_report",
    "write_report_csv",
    "read_report_csv",
    "long_format_rows",
]
