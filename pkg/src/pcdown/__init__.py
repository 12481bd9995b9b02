"""Task-oriented point cloud downsampling.

Learns a relaxed, column-stochastic sampling matrix end-to-end against a
frozen task network (classification / reconstruction / registration) and
provides classical samplers, metrics, and a training/eval harness.
"""

from .cloud import (
    DownsampleResult,
    PointCloud,
    RigidTransform,
    add_gaussian_noise,
    make_synthetic,
    random_rigid_transform,
)
from .config import RunConfig, preset
from .errors import ConfigurationError, DatasetError, DivergenceError
from .features import FeatureMap, PointFeatureEncoder, extract_features
from .losses import LossWeights, chamfer_loss, emd_loss, subset_loss, task_loss, total_loss
from .metrics import (
    chamfer_distance,
    classification_accuracy,
    earth_mover_distance,
    mean_rotation_error_deg,
    normalized_reconstruction_error,
)
from .report import EpochRow, RunReport
from .samplers import (
    SamplerSpec,
    fps_completion,
    fps_sample,
    match_to_subset,
    random_sample,
    run_sampler,
    voxel_sample,
)
from .sampling import (
    DownsampleNet,
    SamplingMatrix,
    SparseSamplingMatrix,
    anneal_softmax,
    downsample,
    orthogonality_gap,
    regress_sampled,
    sparse_apply,
    sparsify,
    truncate_columns,
)
from .tasks import (
    MFoldConfig,
    MFoldingNet,
    MlpAutoencoder,
    PointNetClassifier,
    RegistrationNet,
    TaskHead,
    classify,
    reconstruct,
    register,
)

__version__ = "0.1.0"
