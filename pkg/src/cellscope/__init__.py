"""Post-hoc analysis of cell-based NAS search spaces."""
__version__ = "0.1.0"

from .cellspace import (
    DARTS,
    NB201,
    Architecture,
    Cell,
    Edge,
    SpaceSpec,
    get_space,
    parse_genotype,
    serialize_genotype,
    space_cardinality,
    to_dag,
    validate,
)
from .costmodel import NetworkConfig, count_flops, count_params, pareto_front
from .editor import edit_distance, edit_to_compliance
from .importance import aggregate_oi, neighbors, operation_importance
from .pipeline import RunConfig, run_pipeline
from .sampler import ConstraintSet, group_sample, sample
from .surrogate import ConstantEvaluator, SyntheticSurrogate, TabularSurrogate, load_tabular
from .wilcoxon import wilcoxon_signed_rank

__all__ = [
    "DARTS",
    "NB201",
    "Architecture",
    "Cell",
    "ConstantEvaluator",
    "ConstraintSet",
    "Edge",
    "NetworkConfig",
    "RunConfig",
    "SpaceSpec",
    "SyntheticSurrogate",
    "TabularSurrogate",
    "aggregate_oi",
    "count_flops",
    "count_params",
    "edit_distance",
    "edit_to_compliance",
    "get_space",
    "group_sample",
    "load_tabular",
    "neighbors",
    "operation_importance",
    "pareto_front",
    "parse_genotype",
    "run_pipeline",
    "sample",
    "serialize_genotype",
    "space_cardinality",
    "to_dag",
    "validate",
    "wilcoxon_signed_rank",
]
