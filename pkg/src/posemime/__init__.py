"""posemime: learn gesture models from demonstrated skeleton sequences,
generate reference gestures, score imitation attempts, and run the staged
imitation-game session protocol over a skeleton-frame stream."""

__version__ = "0.1.0"

from .gmm import (
    GmmModel,
    GmmPoint,
    TrainingConfig,
    fit_em,
    gaussian_density,
    generate_trajectory,
    gmr_condition,
    load_model,
    responsibilities,
    save_model,
)
from .manifold import Euclidean, ManifoldPoint, Product, Sphere, TangentVector
from .scoring import Calibration, ScoreReport, Verdict, calibrate, score_sequence
from .skeleton import (
    Body14Frame,
    BodyPart,
    EncodingKind,
    Keypoint,
    PoseEncoding,
    encode_pose,
    encode_sequence,
    normalize_frame,
)

__all__ = [
    "__version__",
    "Body14Frame",
    "BodyPart",
    "Calibration",
    "EncodingKind",
    "Euclidean",
    "GmmModel",
    "GmmPoint",
    "Keypoint",
    "ManifoldPoint",
    "PoseEncoding",
    "Product",
    "ScoreReport",
    "Sphere",
    "TangentVector",
    "TrainingConfig",
    "Verdict",
    "calibrate",
    "encode_pose",
    "encode_sequence",
    "fit_em",
    "gaussian_density",
    "generate_trajectory",
    "gmr_condition",
    "load_model",
    "normalize_frame",
    "responsibilities",
    "save_model",
    "score_sequence",
]
