from .agreement import AgreementResult, ExpertAnnotationMatrix, expert_agreement
from .classification import ConfusionMatrix, confusion
from .detection import IOU_THRESHOLDS, DetectionEvalResult, coco_map
from .kfold import repeated_stratified_kfold
from .wilcoxon import WilcoxonMethod, WilcoxonResult, wilcoxon_signed_rank

__all__ = [
    "AgreementResult",
    "ConfusionMatrix",
    "DetectionEvalResult",
    "ExpertAnnotationMatrix",
    "IOU_THRESHOLDS",
    "WilcoxonMethod",
    "WilcoxonResult",
    "coco_map",
    "confusion",
    "expert_agreement",
    "repeated_stratified_kfold",
    "wilcoxon_signed_rank",
]
