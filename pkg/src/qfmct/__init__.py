"""Quadratic-form based multiple contrast tests for multivariate group means."""
from .data import DataError, Dataset, GroupStats, InsufficientSampleError, compute_stats
from .hypotheses import (HypothesisPartition, global_partition, pairwise_group_equality,
                         per_component_equality, tukey_contrast)
from .quadform import QFKind, QStatVector, q_statistic, q_vector
from .resampling import ReplicateMatrix, WeightDist, replicates
from .testing import (TestResult, adjusted_p_values, calibrate_quantiles, classic_ats_global,
                      classic_mct_test, decide, qfmct_test)

__version__ = "0.1.0"

__all__ = [
    "DataError", "Dataset", "GroupStats", "InsufficientSampleError", "compute_stats",
    "HypothesisPartition", "global_partition", "pairwise_group_equality",
    "per_component_equality", "tukey_contrast",
    "QFKind", "QStatVector", "q_statistic", "q_vector",
    "ReplicateMatrix", "WeightDist", "replicates",
    "TestResult", "adjusted_p_values", "calibrate_quantiles", "classic_ats_global",
    "classic_mct_test", "decide", "qfmct_test",
]
