from .classical import CNN_WIDTHS, build_classical_cnn, build_resnet9, flatten_dim
from .hybrid import GRAD_METHODS, HybridDetector, build_hybrid, hybrid_forward
from .pipeline import DetectorBank, TwoStageResult, build_detector, evaluate_two_stage, joint_label, two_stage_detect
from .training import HistoryRow, TrainConfig, TrainResult, evaluate, history_csv, logits, predict, train

__all__ = [
    "CNN_WIDTHS",
    "DetectorBank",
    "GRAD_METHODS",
    "HistoryRow",
    "HybridDetector",
    "TrainConfig",
    "TrainResult",
    "TwoStageResult",
    "build_classical_cnn",
    "build_detector",
    "build_hybrid",
    "build_resnet9",
    "evaluate",
    "evaluate_two_stage",
    "flatten_dim",
    "history_csv",
    "hybrid_forward",
    "joint_label",
    "logits",
    "predict",
    "train",
    "two_stage_detect",
]
