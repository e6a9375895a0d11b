"""Validation of variance-based uncertainty estimates for regression models.

Checks three complementary targets on paired (error, uncertainty) data:
average calibration of the z-scores, consistency (calibration
conditional on the uncertainty) and adaptivity (calibration conditional
on input features), using binned statistics with rigorous confidence
intervals and a binomial test on the fraction of valid bins.
"""

from .binning import (AUTO, Bin, BinPartition, equal_count_bins, resolve_bin_count,
                      sliding_window, stratified_bins)
from .dataset import (Dataset, Provenance, StrataProfile, load_dataset,
                      rank_correlation, stratification_profile, zscores)
from .errors import (ConstantInputError, InsufficientSampleError, LoadError,
                     PartitionError, SpecError, UQCheckError)
from .local_analysis import (ACFSeries, AverageCalibration, LZResult,
                             PerturbationSummary, ReliabilityCurve, UNCERTAINTY,
                             ZM, ZMS, ZVAR, acf, average_calibration_report,
                             fraction_valid, lz_analysis, rce, reliability_diagram,
                             reorder_perturbation)
from .report import (AnalysisConfig, ValidationReport, emit_cloud_series,
                     emit_plot_series, run_validate)
from .stats_core import (EnsembleSpec, Interval, StatEstimate, binomial_fv_interval,
                         ensemble_target_variance, substream, z_mean, z_mean_squares,
                         z_variance)
from .synth import (Constant, Defect, EnsembleErrors, LinkedFeature, LogUniform,
                    NormalErrors, Strata, SynthSpec, UniformFeature,
                    generate, generate_calibrated, generate_ensemble_dataset,
                    inject_miscalibration, write_dataset)

__version__ = "0.1.0"

__all__ = [
    "ACFSeries", "AUTO", "AnalysisConfig", "AverageCalibration", "Bin",
    "BinPartition", "Constant", "ConstantInputError", "Dataset", "Defect",
    "EnsembleErrors", "EnsembleSpec", "InsufficientSampleError", "Interval",
    "LZResult", "LinkedFeature", "LoadError", "LogUniform", "NormalErrors",
    "PartitionError", "PerturbationSummary", "Provenance", "ReliabilityCurve",
    "SpecError", "StatEstimate", "Strata", "StrataProfile", "SynthSpec",
    "UNCERTAINTY", "UQCheckError", "UniformFeature", "ValidationReport",
    "ZM", "ZMS", "ZVAR", "acf", "average_calibration_report",
    "binomial_fv_interval", "emit_cloud_series", "emit_plot_series",
    "ensemble_target_variance", "equal_count_bins", "fraction_valid",
    "generate", "generate_calibrated", "generate_ensemble_dataset",
    "inject_miscalibration", "load_dataset", "lz_analysis", "rank_correlation",
    "rce", "reliability_diagram", "reorder_perturbation", "resolve_bin_count",
    "run_validate", "sliding_window", "stratification_profile",
    "stratified_bins", "substream", "write_dataset", "z_mean",
    "z_mean_squares", "z_variance", "zscores",
]
