"""k-NN entropy and Bhattacharyya-profile anomaly detection for sensor data."""

from .density import (
    Dataset,
    DensityEstimate,
    SplitDataset,
    SupportBounds,
    ball_volume,
    boundary_correct,
    default_k,
    estimate_density,
    kth_nn_distance,
    kth_nn_distances,
    renormalize,
    resample_on_grid,
    split_dataset,
)
from .entropy import (
    EntropyEstimate,
    EstimateEnsemble,
    RateModel,
    beta_entropy_closed_form,
    bias_corrected_entropy,
    confidence_interval,
    gaussian_entropy_closed_form,
    normalized_scores,
    plug_in_entropy,
    predicted_rates,
)
from .divergence import (
    DistanceProfile,
    GaussianSummary,
    bhattacharyya,
    kl_divergence,
    windowed_bhattacharyya,
)
from .detection import (
    DetectionReport,
    Threshold,
    detect_series,
    detect_windows,
    scan_statistic,
    threshold_from_training,
)
from .synthetic import (
    AnomalySpec,
    MixtureSpec,
    analytic_pdf,
    gen_beta,
    gen_gaussian,
    gen_mixture,
    inject_anomalies,
)
from .evaluation import convergence_sweep, qq_against_normal, roc_curve
from .pipeline import entropy_pipeline, density_on_common_grid, temporal_detection

__version__ = "0.1.0"
