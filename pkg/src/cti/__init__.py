"""Conformal regression with thresholded interquantile intervals.

Fit a multi-output quantile model, score calibration responses by the
length of the interquantile interval they fall into, calibrate a length
cutoff at the conformal rank, and predict with the union of all short
intervals: a possibly non-contiguous set with finite-sample marginal
coverage.  Split-conformal and CQR baselines, synthetic scenarios with
exact density level-set oracles, and a benchmarking runner round out
the toolkit.
"""

__version__ = "0.1.0"

from .conformal import (
    BaselineResult,
    PredictionSet,
    Threshold,
    calibrate_threshold,
    cqr,
    harmonic_aggregate,
    harmonic_batch_scores,
    harmonic_predict_set,
    predict_set,
    rank_index,
    set_contains,
    split_conformal,
)
from .data import Dataset, DataSplit, Standardizer, load_csv, split_indices, standardize
from .errors import DataError, FitError, FormatError, NumericError
from .evaluation import (
    LengthHistogram,
    MethodReport,
    aggregate_reports,
    coverage,
    length_histograms,
    mean_size,
)
from .experiment import METHODS, ExperimentConfig, run_experiment, validate_config
from .intervals import (
    BOUNDARY_POLICIES,
    ConformityScore,
    IntervalPartition,
    batch_scores,
    build_partition,
    conformity_score,
    interval_index,
    scores_at,
)
from .quantile import (
    ForestConfig,
    FunctionQuantileModel,
    JointQuantileNetwork,
    PinballConfig,
    QuantileForest,
    QuantileLevels,
    enforce_monotone,
    load_external_grids,
    pinball_loss,
)
from .synthetic import (
    SCENARIOS,
    Bimodal,
    HeteroGauss,
    LogNormal,
    OracleSet,
    Scenario,
    Uniform,
    generate,
    lipschitz_bound,
    make_scenario,
    oracle_expected_length,
    oracle_quantile_model,
    oracle_set,
    oracle_threshold,
    true_density,
    true_quantiles,
)
