"""mvas: 3D motion generation by multi-view ancestral sampling of a 2D motion diffusion model."""

__version__ = "0.1.0"

from . import errors
from .diffusion import (
    NoiseSchedule,
    TrainingBatch,
    ancestral_sample_2d,
    cosine_schedule,
    forward_sample,
    posterior_coefficients,
    posterior_step,
    predict_x0,
    training_loss,
)
from .denoiser import (
    Architecture,
    Denoiser,
    TrainConfig,
    build_denoiser,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .evaluation import (
    MetricsReport,
    bone_length_consistency,
    diversity,
    evaluate_2d,
    evaluate_projected,
    extract_features,
    extract_features_many,
    feature_dim,
    fid,
    precision_recall,
    random_projection_protocol,
)
from .geometry import (
    CameraView,
    camera_from_angles,
    make_camera_ring,
    orthographic_perspective_gap,
    orthographic_project,
    perspective_jacobian,
    perspective_project,
    project_noise,
)
from .mas import (
    MasConfig,
    MasTrace,
    TriangulationConfig,
    mas_sample,
    mas_sample_dynamic_views,
    replay_view,
    triangulate,
    triangulate_info,
)
from .sds import SdsConfig, sds_generate, sds_gradient
from .synthdata import (
    BuiltDataset,
    CameraDistParams,
    DatasetManifest,
    MotionFamilyParams,
    Skeleton,
    apply_corruption,
    audit,
    build_dataset,
    corrupt_records,
    default_skeleton,
    family_params,
    load_dataset,
    load_motions,
    load_sidecar,
    sample_motion3d,
    save_dataset,
    save_motions,
    save_sidecar,
    write_manifest_text,
)

__all__ = [
    "__version__",
    "errors",
    # geometry
    "CameraView",
    "camera_from_angles",
    "make_camera_ring",
    "orthographic_perspective_gap",
    "orthographic_project",
    "perspective_jacobian",
    "perspective_project",
    "project_noise",
    # diffusion
    "NoiseSchedule",
    "TrainingBatch",
    "ancestral_sample_2d",
    "cosine_schedule",
    "forward_sample",
    "posterior_coefficients",
    "posterior_step",
    "predict_x0",
    "training_loss",
    # denoiser
    "Architecture",
    "Denoiser",
    "TrainConfig",
    "build_denoiser",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    # mas
    "MasConfig",
    "MasTrace",
    "TriangulationConfig",
    "mas_sample",
    "mas_sample_dynamic_views",
    "replay_view",
    "triangulate",
    "triangulate_info",
    # sds
    "SdsConfig",
    "sds_generate",
    "sds_gradient",
    # synthdata
    "BuiltDataset",
    "CameraDistParams",
    "DatasetManifest",
    "MotionFamilyParams",
    "Skeleton",
    "apply_corruption",
    "audit",
    "build_dataset",
    "corrupt_records",
    "default_skeleton",
    "family_params",
    "load_dataset",
    "load_motions",
    "load_sidecar",
    "sample_motion3d",
    "save_dataset",
    "save_motions",
    "save_sidecar",
    "write_manifest_text",
    # evaluation
    "MetricsReport",
    "bone_length_consistency",
    "diversity",
    "evaluate_2d",
    "evaluate_projected",
    "extract_features",
    "extract_features_many",
    "feature_dim",
    "fid",
    "precision_recall",
    "random_projection_protocol",
]
