"""Dynamic interaction-based reputation with forgetting, cumulative and activity-period factors."""

from .estimators import DIBRMReputation, HistoricalReputation, SOReputationSimulator, rank_agreement_score
from .exceptions import (
    ConfigurationError, CorruptLogError, DataError, DIBRMError, DimensionMismatchError,
    IngestQualityError, InvalidQueryError, NumericOverflowError, SamplingError,
)
from .model import (
    InteractionEvent, InteractionKind, ModelParams, ReputationSeries, UserTrustState,
    apply_interaction, cumulative_component, daily_reputation_series, delta_periods,
    historical_series, reputation_at,
)
from .metrics import MetricReport, RankTable, mu_metric, rank_table, rank_users, sigma_metric
from .timeutil import Window

__version__ = "0.1.0"
