"""Reconstruction of probabilistic segmentation maps from same/different judgments."""

__version__ = "0.1.0"

from .data import (
    AggregatedCounts,
    Block,
    PairSet,
    ResponseDataset,
    Violation,
    aggregate_responses,
    validate_dataset,
)
from .errors import ContractViolation, DataError, FitDiverged
from .grid import GridSpec
from .harness import (
    ContourMap,
    SweepConfig,
    UncertaintyStudyConfig,
    contour_fscore,
    run_sweep,
    sample_pairset,
    simulate_responses,
    subsample_maps,
    uncertainty_study,
    welch_test,
)
from .inference import (
    FitConfig,
    FitResult,
    bce_loss,
    fit_annealed,
    fit_nonparametric,
    grad_bce,
    grad_se,
    neighbor_kernel,
    reg_penalty,
    se_loss,
    stationarity_report,
)
from .parametric import (
    FeatureMaps,
    LogisticParams,
    VarianceParams,
    differential_variance,
    fit_parametric,
    logistic_probmaps,
    rgb_features,
    variance_reparam,
    wavelet_energy_features,
)
from .synthesis import (
    MapGenParams,
    TextureParams,
    generate_probmaps,
    synthesize_rgb_clusters,
    synthesize_texture,
)
from .maps import (
    ProbMaps,
    SegMap,
    align_labels,
    argmax_segmap,
    entropy_map,
    mae_aligned,
    mean_entropy,
    onehot_maps,
    prob_same,
    uniform_maps,
)

__all__ = [
    "AggregatedCounts",
    "Block",
    "ContourMap",
    "ContractViolation",
    "DataError",
    "FeatureMaps",
    "FitConfig",
    "FitDiverged",
    "FitResult",
    "GridSpec",
    "LogisticParams",
    "MapGenParams",
    "PairSet",
    "ProbMaps",
    "ResponseDataset",
    "SegMap",
    "SweepConfig",
    "TextureParams",
    "UncertaintyStudyConfig",
    "VarianceParams",
    "Violation",
    "aggregate_responses",
    "align_labels",
    "argmax_segmap",
    "bce_loss",
    "contour_fscore",
    "differential_variance",
    "entropy_map",
    "fit_annealed",
    "fit_nonparametric",
    "fit_parametric",
    "generate_probmaps",
    "grad_bce",
    "grad_se",
    "logistic_probmaps",
    "mae_aligned",
    "mean_entropy",
    "neighbor_kernel",
    "onehot_maps",
    "prob_same",
    "reg_penalty",
    "rgb_features",
    "run_sweep",
    "sample_pairset",
    "se_loss",
    "simulate_responses",
    "stationarity_report",
    "subsample_maps",
    "synthesize_rgb_clusters",
    "synthesize_texture",
    "uncertainty_study",
    "uniform_maps",
    "validate_dataset",
    "variance_reparam",
    "wavelet_energy_features",
    "welch_test",
]
