"""Identify users across independently collected datasets by matching their
behavior histograms, and evaluate privacy defenses against that attack."""

from .anonymize import ClusterPartition, information_loss, microaggregate, verify_k_anonymity
from .core import (
    Alphabet,
    EventLog,
    EventRecord,
    GroundTruth,
    Histogram,
    HistogramSet,
    aggregate_locations,
    build_histogram,
    filter_active_users,
    histograms_by_user,
    quantize_geo,
    split_by_period,
    suppress_and_renormalize,
)
from .errors import (
    AbsoluteContinuityError,
    ConfigError,
    EmptyStringError,
    FileFormatError,
    HistmatchError,
    InvalidCardinalityError,
    InvalidCoordinateError,
    InvalidKError,
    InvalidOverlapError,
    MetricMismatchError,
    SwapSidesError,
    TooLargeForOracleError,
    ZeroMassAfterSuppressionError,
)
from .harness import (
    AccuracyReport,
    ExperimentConfig,
    ExperimentReport,
    bootstrap_ci,
    cluster_level_accuracy,
    run_experiment,
    user_level_accuracy,
)
from .matcher import (
    BipartiteInstance,
    MatchResult,
    build_instance,
    generalized_log_likelihood,
    match_bruteforce,
    match_cardinality,
    match_greedy,
    match_min_weight,
)
from .metrics import (
    MAX_DIVERGENCE_WEIGHT,
    MetricKind,
    kl_divergence,
    pair_distance,
    pair_weight,
    shannon_entropy,
    weight_cosine,
    weight_dot,
    weight_l1,
    weight_matrix,
    weight_proposed,
)
from .synth import (
    GENERATOR_NAME,
    OverlapSpec,
    PopulationSpec,
    generate_pair,
    location_ids,
    sample_population,
    seeded_generator,
)

__version__ = "0.1.0"

__all__ = [
    "AbsoluteContinuityError",
    "AccuracyReport",
    "Alphabet",
    "BipartiteInstance",
    "ClusterPartition",
    "ConfigError",
    "EmptyStringError",
    "EventLog",
    "EventRecord",
    "ExperimentConfig",
    "ExperimentReport",
    "FileFormatError",
    "GENERATOR_NAME",
    "GroundTruth",
    "Histogram",
    "HistogramSet",
    "HistmatchError",
    "InvalidCardinalityError",
    "InvalidCoordinateError",
    "InvalidKError",
    "InvalidOverlapError",
    "MAX_DIVERGENCE_WEIGHT",
    "MatchResult",
    "MetricKind",
    "MetricMismatchError",
    "OverlapSpec",
    "PopulationSpec",
    "SwapSidesError",
    "TooLargeForOracleError",
    "ZeroMassAfterSuppressionError",
    "aggregate_locations",
    "bootstrap_ci",
    "build_histogram",
    "build_instance",
    "cluster_level_accuracy",
    "filter_active_users",
    "generalized_log_likelihood",
    "generate_pair",
    "histograms_by_user",
    "information_loss",
    "kl_divergence",
    "location_ids",
    "match_bruteforce",
    "match_cardinality",
    "match_greedy",
    "match_min_weight",
    "microaggregate",
    "pair_distance",
    "pair_weight",
    "quantize_geo",
    "run_experiment",
    "sample_population",
    "seeded_generator",
    "shannon_entropy",
    "split_by_period",
    "suppress_and_renormalize",
    "user_level_accuracy",
    "verify_k_anonymity",
    "weight_cosine",
    "weight_dot",
    "weight_l1",
    "weight_matrix",
    "weight_proposed",
]
