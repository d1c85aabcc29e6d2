"""Black-box certification of patch defenses when the patch size is unknown."""
from .classifier import AttackerPolicy, Classifier, Scene, WorstCaseClassifier
from .errors import (AssumptionViolation, BridgeError, GenerationError, IBCDError,
                     InvalidConfig, InvalidGeometry, InvalidInput, UndefinedRate)
from .estimator import EstimationResult, aggregate_estimate, build_schedule, estimate_patch_size
from .geometry import MaskSchedule, MaskSet, Rect, generate_mask_set
from .kernels import BACKEND
from .pipeline import ExperimentConfig, Report, run_ibcd
from .scenes import synth_scenes

__version__ = "0.1.0"

__all__ = [
    "AttackerPolicy", "Classifier", "Scene", "WorstCaseClassifier",
    "AssumptionViolation", "BridgeError", "GenerationError", "IBCDError", "InvalidConfig",
    "InvalidGeometry", "InvalidInput", "UndefinedRate",
    "EstimationResult", "aggregate_estimate", "build_schedule", "estimate_patch_size",
    "MaskSchedule", "MaskSet", "Rect", "generate_mask_set", "BACKEND",
    "ExperimentConfig", "Report", "run_ibcd", "synth_scenes",
]
