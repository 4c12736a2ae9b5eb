"""Social network analysis of mailing-list archives."""

from .community import Partition, louvain, modularity, project_undirected, subcommunities
from .errors import ConfigError, DataError, DataIntegrityError, ListSNAError, MboxFormatError, StageError
from .graph import CommGraph, attribute_recipient, build_graph, write_dot, write_graphml
from .identity import AliasMap, Identity, levenshtein, resolve_identities
from .mbox import Message, RawMessage, ingest, monthly_counts, normalize_message, parse_mbox
from .metrics import (
    betweenness,
    bc_threshold,
    compute_metrics,
    ego_network,
    in_degree,
    message_share,
    out_degree,
    reciprocity_glr,
    reciprocity_sr,
)
from .pipeline import PipelineConfig, run_pipeline
from .report import render_report
from .stages import StageDataset, read_stage, write_stage
from .threads import Thread, ThreadNode, build_threads, filter_threads
from .topics import TopicQuery, main_actor, topic_graph

__version__ = "0.1.0"

__all__ = [
    "AliasMap", "CommGraph", "ConfigError", "DataError", "DataIntegrityError", "Identity",
    "ListSNAError", "MboxFormatError", "Message", "Partition", "PipelineConfig", "RawMessage",
    "StageDataset", "StageError", "Thread", "ThreadNode", "TopicQuery",
    "attribute_recipient", "bc_threshold", "betweenness", "build_graph", "build_threads",
    "compute_metrics", "ego_network", "filter_threads", "in_degree", "ingest", "levenshtein",
    "louvain", "main_actor", "message_share", "modularity", "monthly_counts", "normalize_message",
    "out_degree", "parse_mbox", "project_undirected", "read_stage", "reciprocity_glr",
    "reciprocity_sr", "render_report", "resolve_identities", "run_pipeline", "subcommunities",
    "topic_graph", "write_dot", "write_graphml", "write_stage",
]
