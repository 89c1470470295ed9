"""Configuration: a flat key=value file, environment overrides, and the
resource loaders the CLI and HTTP service share.

Precedence, lowest to highest: built-in defaults, config file, PVRAG_*
environment variables, explicit overrides (CLI flags). Credentials never
appear in config values; config names the environment variable that
holds the key, and the HTTP clients read it at call time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .backends import (
    CachingProvider,
    DeterministicChatBackend,
    HashingEmbedder,
    HttpChatBackend,
    HttpEmbeddingProvider,
)
from .errors import ConfigError
from .graph import build_graph
from .index import load_index
from .kb import load_kb
from .pipeline import DEFAULT_K, PIPELINES, PipelineResources

ENV_PREFIX = "PVRAG_"
CONFIG_PATH_ENV = "PVRAG_CONFIG"

_INT_KEYS = {"port", "k", "embed_dimension", "hash_seed", "parallelism"}
_FORBIDDEN_KEYS = {"api_key", "chat_api_key", "embed_api_key", "token", "secret"}


@dataclass
class ServiceConfig:
    data_dir: str = "data"
    kb_path: str = ""  # derived from data_dir when empty
    index_a_path: str = ""
    index_b_path: str = ""
    graph_path: str = ""
    backend: str = "deterministic"  # deterministic | http
    chat_endpoint: str = ""
    chat_model: str = ""
    chat_api_key_env: str = "PVRAG_API_KEY"
    embedder: str = "hash"  # hash | http
    embed_endpoint: str = ""
    embed_model: str = ""
    embed_api_key_env: str = "PVRAG_API_KEY"
    embed_dimension: int = 1536
    hash_seed: int = 9
    embed_cache_dir: str = ""
    host: str = "127.0.0.1"
    port: int = 8000
    default_pipeline: str = "graphrag"
    k: int = DEFAULT_K
    parallelism: int = 4

    def resolved_kb_path(self) -> Path:
        return Path(self.kb_path) if self.kb_path else Path(self.data_dir) / "kb.json"

    def resolved_index_path(self, fmt: str) -> Path:
        explicit = self.index_a_path if fmt == "A" else self.index_b_path
        if explicit:
            return Path(explicit)
        return Path(self.data_dir) / f"index_{fmt.lower()}.jsonl"

    def resolved_graph_path(self) -> Path:
        return Path(self.graph_path) if self.graph_path else Path(self.data_dir) / "graph.jsonl"


def _known_keys() -> set[str]:
    return {f.name for f in fields(ServiceConfig)}


def _parse_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, object] | None = None,
) -> ServiceConfig:
    env = os.environ if env is None else env
    known = _known_keys()
    values: dict[str, object] = {}

    file_path = path or env.get(CONFIG_PATH_ENV)
    if file_path:
        file_path = Path(file_path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")
        for key, raw in _parse_file(file_path).items():
            if key in _FORBIDDEN_KEYS:
                raise ConfigError(
                    f"{file_path}: {key!r} looks like an inline credential; "
                    "set the *_api_key_env name instead and export the key"
                )
            if key not in known:
                raise ConfigError(f"{file_path}: unknown config key {key!r}")
            values[key] = raw

    for key in known:
        env_name = ENV_PREFIX + key.upper()
        if env_name in env:
            values[key] = env[env_name]

    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config override {key!r}")
            values[key] = value

    for key in list(values):
        if key in _INT_KEYS and not isinstance(values[key], int):
            try:
                values[key] = int(str(values[key]))
            except ValueError:
                raise ConfigError(f"config key {key!r} must be an integer") from None

    config = ServiceConfig(**values)  # type: ignore[arg-type]
    if config.backend not in ("deterministic", "http"):
        raise ConfigError("backend must be 'deterministic' or 'http'")
    if config.embedder not in ("hash", "http"):
        raise ConfigError("embedder must be 'hash' or 'http'")
    if config.default_pipeline not in PIPELINES:
        raise ConfigError(f"default_pipeline must be one of {PIPELINES}")
    if config.backend == "http" and not config.chat_endpoint:
        raise ConfigError("backend=http requires chat_endpoint")
    if config.embedder == "http" and not config.embed_endpoint:
        raise ConfigError("embedder=http requires embed_endpoint")
    if config.k < 1:
        raise ConfigError("k must be at least 1")
    return config


def build_provider(config: ServiceConfig):
    if config.embedder == "hash":
        provider = HashingEmbedder(dimension=config.embed_dimension, seed=config.hash_seed)
    else:
        provider = HttpEmbeddingProvider(
            endpoint=config.embed_endpoint,
            model=config.embed_model,
            dimension=config.embed_dimension,
            api_key_env=config.embed_api_key_env,
        )
    if config.embed_cache_dir:
        provider = CachingProvider(provider, config.embed_cache_dir)
    return provider


def build_backend(config: ServiceConfig):
    if config.backend == "deterministic":
        return DeterministicChatBackend()
    return HttpChatBackend(
        endpoint=config.chat_endpoint,
        model=config.chat_model,
        api_key_env=config.chat_api_key_env,
    )


def load_resources(
    config: ServiceConfig,
    need_index_a: bool = False,
    need_index_b: bool = False,
    need_graph: bool = False,
) -> PipelineResources:
    """Load the artifacts a pipeline run needs, with actionable errors.

    The graph is always rebuilt from the knowledge base (it is a pure
    projection); the graph artifact on disk exists for external tools.
    """
    kb_path = config.resolved_kb_path()
    if not kb_path.exists():
        raise ConfigError(
            f"knowledge base not found at {kb_path} (run `pvrag ingest` first)"
        )
    kb = load_kb(kb_path)
    provider = build_provider(config) if (need_index_a or need_index_b) else None

    def load_side(fmt: str):
        path = config.resolved_index_path(fmt)
        if not path.exists():
            raise ConfigError(
                f"vector index not found at {path} "
                f"(run `pvrag index --format {fmt}` first)"
            )
        return load_index(path)

    return PipelineResources(
        kb=kb,
        provider=provider,
        index_a=load_side("A") if need_index_a else None,
        index_b=load_side("B") if need_index_b else None,
        graph=build_graph(kb) if need_graph else None,
        k=config.k,
    )


def resources_for_pipeline(config: ServiceConfig, pipeline: str) -> PipelineResources:
    if pipeline not in PIPELINES:
        raise ConfigError(f"pipeline must be one of {PIPELINES}")
    return load_resources(
        config,
        need_index_a=pipeline == "rag_a",
        need_index_b=pipeline == "rag_b",
        need_graph=pipeline == "graphrag",
    )
