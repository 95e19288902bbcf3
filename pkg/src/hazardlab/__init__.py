"""Discrete-time survival modelling for bags of instance features."""

from ._version import __version__
from .errors import (
    ConfigError,
    HazardLabError,
    InsufficientDataError,
    InvalidInputError,
    NumericError,
    UndefinedMetricError,
    UnsupportedLabelError,
)
from .loss import LossConfig, batch_nll, nll, nll_gradient
from .metrics import (
    KMCurve,
    LogRankConfig,
    MetricsReport,
    brier,
    cd_auc,
    d_calibration,
    evaluate,
    harrell_cindex,
    kaplan_meier,
    logrank_fh,
)
from .risk_strata import StratificationReport, StratSearchConfig, search_boundaries, stratify_and_test
from .survival_core import (
    DEFAULT_RISK_LIMITS,
    DiscreteLabel,
    RiskGroupBoundaries,
    SubjectRecord,
    TimeGrid,
    assign_risk_group,
    assign_risk_groups,
    discretize_label,
    risk_score,
    survival_from_hazard,
)
from .synthcohort import CohortConfig, OracleModel, generate_cohort, generate_stitched_bags, oracle_predictions

__all__ = [
    "__version__", "ConfigError", "HazardLabError", "InsufficientDataError", "InvalidInputError",
    "NumericError", "UndefinedMetricError", "UnsupportedLabelError", "LossConfig", "batch_nll", "nll",
    "nll_gradient", "KMCurve", "LogRankConfig", "MetricsReport", "brier", "cd_auc", "d_calibration",
    "evaluate", "harrell_cindex", "kaplan_meier", "logrank_fh", "StratificationReport",
    "StratSearchConfig", "search_boundaries", "stratify_and_test", "DEFAULT_RISK_LIMITS",
    "DiscreteLabel", "RiskGroupBoundaries", "SubjectRecord", "TimeGrid", "assign_risk_group",
    "assign_risk_groups", "discretize_label", "risk_score", "survival_from_hazard", "CohortConfig",
    "OracleModel", "generate_cohort", "generate_stitched_bags", "oracle_predictions",
]
