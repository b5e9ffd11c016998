"""Individually fair graph clustering by contrastive nonnegative matrix tri-factorization."""

__version__ = "0.1.0"

from fairclust.contrastive import ContrastiveSystem, build_contrastive
from fairclust.graph import (
    ClusterLabels,
    Graph,
    GraphFormatError,
    GroupAssignment,
    LengthMismatchError,
    SelfLoopError,
    load_edge_list,
    load_groups,
    validate,
)
from fairclust.metrics import MetricsReport, compute_report
from fairclust.sbm import SbmSpec, generate
from fairclust.solver import (
    FactorPair,
    NumericalError,
    RunResult,
    SolverConfig,
    fit,
)


__all__ = [
    "ClusterLabels",
    "ContrastiveSystem",
    "FactorPair",
    "Graph",
    "GraphFormatError",
    "GroupAssignment",
    "LengthMismatchError",
    "MetricsReport",
    "NumericalError",
    "RunResult",
    "SbmSpec",
    "SelfLoopError",
    "SolverConfig",
    "build_contrastive",
    "compute_report",
    "fit",
    "generate",
    "load_edge_list",
    "load_groups",
    "validate",
]
