from .gspan import Pattern, canonical_pattern, contains, is_min, mine_frequent, support_count
from .reference import (
    MissingRecords,
    SupportStats,
    important_subgraph,
    null_reference,
    ratio_rank,
    reference_counts,
    support_ratio,
)
from .residual import ResidualInfo, has_residual_link

__all__ = [
    "MissingRecords",
    "Pattern",
    "ResidualInfo",
    "SupportStats",
    "canonical_pattern",
    "contains",
    "has_residual_link",
    "important_subgraph",
    "is_min",
    "mine_frequent",
    "null_reference",
    "ratio_rank",
    "reference_counts",
    "support_count",
    "support_ratio",
]
