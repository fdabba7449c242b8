"""Multi-biometric recognition from face and ear images.

Eigenspace (PCA) feature extraction per modality, normalized
cross-correlation quality gating, Euclidean nearest-neighbor matching, and
two-level decision fusion: majority vote within a modality, AND across
modalities. Includes a threshold-sweep evaluation harness reporting
recognition rate, FAR, and FRR.
"""

from .eigenspace import (
    EigenModel,
    FeatureVector,
    load_model,
    project,
    reconstruct,
    save_model,
    train,
)
from .evaluation import (
    AttemptRecord,
    EvaluationReport,
    Protocol,
    best_threshold,
    default_thresholds,
    rates,
    sweep,
    write_sweep_csv,
)
from .fusion import FusedDecision, FusionPolicy, ModalityVerdict, and_fuse, fuse_attempt, majority
from .gallery import (
    DatasetManifest,
    EnrollmentStore,
    SubjectEntry,
    enroll,
    load_store,
    save_store,
    scan_dataset,
)
from .images import ImageSample, Modality, bilinear_resize, load_image, luminance, make_sample, write_pgm
from .matching import (
    Decision,
    DecisionPolicy,
    DecisionReason,
    MatchScore,
    euclidean,
    identify,
    verify,
)
from .pipeline import SplitSpec, parse_split, run_evaluation, split_manifest, train_models
from .quality import QualityPolicy, QualityScore, assess, ncc
from .synthetic import generate_dataset

__version__ = "0.1.0"

__all__ = [
    "AttemptRecord",
    "DatasetManifest",
    "Decision",
    "DecisionPolicy",
    "DecisionReason",
    "EigenModel",
    "EnrollmentStore",
    "EvaluationReport",
    "FeatureVector",
    "FusedDecision",
    "FusionPolicy",
    "ImageSample",
    "MatchScore",
    "Modality",
    "ModalityVerdict",
    "Protocol",
    "QualityPolicy",
    "QualityScore",
    "SplitSpec",
    "SubjectEntry",
    "and_fuse",
    "assess",
    "best_threshold",
    "bilinear_resize",
    "default_thresholds",
    "enroll",
    "euclidean",
    "fuse_attempt",
    "generate_dataset",
    "identify",
    "load_image",
    "load_model",
    "load_store",
    "luminance",
    "majority",
    "make_sample",
    "ncc",
    "parse_split",
    "project",
    "rates",
    "reconstruct",
    "run_evaluation",
    "save_model",
    "save_store",
    "scan_dataset",
    "split_manifest",
    "sweep",
    "train",
    "train_models",
    "verify",
    "write_pgm",
    "write_sweep_csv",
    "__version__",
]
