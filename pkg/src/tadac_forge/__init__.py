"""Dataset construction and evaluation toolkit for quality-annotated images.

Subpackages cover image primitives, the 19x5 synthetic distortion bank,
appearance measurement and binning, seeded annotation text generation,
saliency/overlap crop pairing, contrastive loss math, and the ridge +
rank-correlation evaluation protocol, all tied together by the
``tadac-forge`` command line.
"""

__version__ = "0.1.0"

from .appearance import (
    AppearanceProfile,
    Level,
    MetricKind,
    bin_level,
    brightness,
    colorfulness,
    contrast,
    profile,
    sharpness,
)
from .distortions import (
    DistortionSpec,
    DistortionType,
    apply_distortion,
    distortion_parameters,
)
from .imaging import CropWindow, ImageBuffer, crop, load_image, save_image
from .losses import (
    image_image_batch_loss,
    image_text_batch_loss,
    info_nce,
    info_nce_grad_query,
    joint_loss,
    PairBatch,
)
from .pairing import (
    PairingConfig,
    PairRecord,
    SaliencyMap,
    build_pair_manifest,
    ola_pair,
    saliency_crop,
    saliency_proxy,
)
from .regression import (
    EvaluationReport,
    SplitProtocol,
    evaluate,
    plcc,
    ridge_fit,
    select_lambda,
    srocc,
)

__all__ = [
    "AppearanceProfile",
    "Level",
    "MetricKind",
    "bin_level",
    "brightness",
    "colorfulness",
    "contrast",
    "profile",
    "sharpness",
    "DistortionSpec",
    "DistortionType",
    "apply_distortion",
    "distortion_parameters",
    "CropWindow",
    "ImageBuffer",
    "crop",
    "load_image",
    "save_image",
    "image_image_batch_loss",
    "image_text_batch_loss",
    "info_nce",
    "info_nce_grad_query",
    "joint_loss",
    "PairBatch",
    "PairingConfig",
    "PairRecord",
    "SaliencyMap",
    "build_pair_manifest",
    "ola_pair",
    "saliency_crop",
    "saliency_proxy",
    "EvaluationReport",
    "SplitProtocol",
    "evaluate",
    "plcc",
    "ridge_fit",
    "select_lambda",
    "srocc",
    "__version__",
]
