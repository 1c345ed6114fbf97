"""dosekit: differentiable dose objectives, DVH metrics, and desk-scale
dose-mimicking experiments on synthetic phantoms."""

__version__ = "0.1.0"

from .errors import (
    BoundsError,
    ConfigError,
    CropInfeasibleError,
    DataError,
    DivergenceError,
    DosekitError,
    GeometryError,
    NormalizationError,
    NumericalError,
    UnitError,
)
from .losses import (
    DvhLossSpec,
    LossConfig,
    LossValueGrad,
    MomentSpec,
    dvh_loss_grad,
    dvh_vector_approx,
    finite_difference_gradcheck,
    mae_loss_grad,
    moment,
    moment_loss_grad,
    sigmoid_volume_at_dose,
    total_loss_grad,
)
from .metrics import (
    DvhCriterion,
    MetricsReport,
    clinical_report,
    compute_report,
    dose_at_cc,
    dose_at_percent,
    dose_score,
    dvh_score,
    exact_dvh_curve,
    homogeneity_index,
    paddick_ci,
)
from .mimic import (
    AdamState,
    MimicResult,
    OptimizerConfig,
    adam_step,
    benchmark_loss_iteration,
    midpoint_convexity_probe,
    mimic_dose,
    restart_study,
    schedule_lr,
)
from .mvol import load_case, read_grid, read_mask, save_case, write_grid, write_mask
from .phantom import PhantomSpec, generate_dataset, generate_phantom
from .preprocess import (
    CANONICAL_OARS,
    PreprocessConfig,
    clip_rescale_ct,
    normalize_ptv_mean,
    one_hot_structures,
    prepare_case,
)
from .tinymodel import (
    ModelConfig,
    TrainConfig,
    TrainResult,
    evaluate_holdout,
    init_params,
    load_checkpoint,
    predict_dose,
    save_checkpoint,
    train,
)
from .volume import (
    CaseBundle,
    Grid3,
    GridGeometry,
    StructureMask,
    crop_mask,
    crop_region,
    resample_mask,
    trilinear_resample,
    voxel_volume_cc,
)
