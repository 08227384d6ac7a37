"""Adaptive re-ranking over weighted document-affinity graphs."""

from .errors import (
    ConfigError,
    DataError,
    Error,
    FormatError,
    InsufficientPoolError,
    InvalidInputError,
)
from .graph import (
    CorpusGraph,
    DocMap,
    build_knn_graph,
    load_graph,
    prune_graph,
    reweight_graph,
    save_graph,
)
from .relevance import (
    Bm25Scorer,
    Query,
    QrelsOracleScorer,
    Ranking,
    ReplayScorer,
    StubScorer,
    first_stage_retrieve,
    relevance_distribution,
    score_batch,
)
from .schedulers import ScheduleConfig, Trace, rerank
from .setaff import Frontier, TopSet, pop_top, refresh_frontier, set_affinity, update_top_set

__version__ = "0.1.0"

__all__ = [
    "Bm25Scorer",
    "ConfigError",
    "CorpusGraph",
    "DataError",
    "DocMap",
    "Error",
    "FormatError",
    "Frontier",
    "InsufficientPoolError",
    "InvalidInputError",
    "Query",
    "QrelsOracleScorer",
    "Ranking",
    "ReplayScorer",
    "ScheduleConfig",
    "StubScorer",
    "TopSet",
    "Trace",
    "build_knn_graph",
    "first_stage_retrieve",
    "load_graph",
    "pop_top",
    "prune_graph",
    "refresh_frontier",
    "relevance_distribution",
    "rerank",
    "reweight_graph",
    "save_graph",
    "score_batch",
    "set_affinity",
    "update_top_set",
]
