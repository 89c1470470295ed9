"""Drug side-effect retrieval engine: vector RAG, graph RAG, and the
balanced-benchmark evaluation harness behind them."""

from .backends import (
    CachingProvider,
    ConstantChatBackend,
    DeterministicChatBackend,
    HashingEmbedder,
    HttpChatBackend,
    HttpEmbeddingProvider,
)
from .config import ServiceConfig, build_backend, build_provider, load_config, load_resources
from .entities import ExtractedEntities, extract_entities
from .evaluation import (
    ConfusionMatrix,
    EvalDataset,
    EvalPair,
    MetricsReport,
    build_balanced_dataset,
    build_report,
    compute_metrics,
    emit_report,
    group_breakdown,
    read_dataset_jsonl,
    run_eval,
    write_dataset_jsonl,
)
from .graph import (
    PropertyGraph,
    build_cypher_for_pair,
    build_graph,
    execute_cypher,
    parse_cypher,
)
from .index import VectorIndex, build_index, load_index, save_index, search, top_k
from .kb import (
    KnowledgeBase,
    export_corpus,
    load_kb,
    load_sider,
    load_tsv,
    save_kb,
)
from .pipeline import Answer, PipelineResources, RetrievalVerdict, run_query
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "CachingProvider",
    "ConfusionMatrix",
    "ConstantChatBackend",
    "DeterministicChatBackend",
    "EvalDataset",
    "EvalPair",
    "ExtractedEntities",
    "HashingEmbedder",
    "HttpChatBackend",
    "HttpEmbeddingProvider",
    "KnowledgeBase",
    "MetricsReport",
    "PipelineResources",
    "PropertyGraph",
    "RetrievalVerdict",
    "ServiceConfig",
    "VectorIndex",
    "build_backend",
    "build_balanced_dataset",
    "build_cypher_for_pair",
    "build_graph",
    "build_index",
    "build_provider",
    "build_report",
    "compute_metrics",
    "create_app",
    "emit_report",
    "execute_cypher",
    "export_corpus",
    "extract_entities",
    "group_breakdown",
    "load_config",
    "load_index",
    "load_kb",
    "load_resources",
    "load_sider",
    "load_tsv",
    "parse_cypher",
    "read_dataset_jsonl",
    "run_eval",
    "run_query",
    "save_index",
    "save_kb",
    "search",
    "top_k",
    "write_dataset_jsonl",
]
