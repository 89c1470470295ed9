"""Embedding providers and chat backends.

Both contracts are small on purpose: an embedding provider turns a batch
of texts into fixed-dimension vectors and owns a fingerprint string that
names everything affecting its output; a chat backend turns one prompt
into one completion. The bundled implementations are fully deterministic
so the whole engine can run hermetically; the HTTP implementations speak
the minimal JSON protocols documented in the README.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

from .errors import BackendUnavailable, InvalidVector, MalformedPrompt
from .prompts import BASELINE_INSTRUCTION, classify_assertion

DEFAULT_DIMENSION = 1536


class EmbeddingProvider(Protocol):
    fingerprint: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class ChatBackend(Protocol):
    name: str
    generation_params: dict

    def complete(self, prompt: str) -> str: ...


class HashingEmbedder:
    """Deterministic signed feature hashing over lowercase word tokens.

    Each token adds +-1 to a few hash-selected coordinates; the sum is
    L2-normalized. Texts sharing more tokens therefore score higher under
    cosine similarity, which is the only property retrieval tests rely
    on. Several coordinates per token keep near-total collisions between
    two short texts out of practical reach.
    """

    def __init__(
        self,
        dimension: int = DEFAULT_DIMENSION,
        seed: int = 9,
        coords_per_token: int = 4,
    ):
        if dimension < 8:
            raise ValueError("dimension too small")
        self.dimension = dimension
        self.seed = seed
        self.coords_per_token = coords_per_token
        self.fingerprint = (
            f"hash-embed/v1?dim={dimension}&seed={seed}&k={coords_per_token}"
        )
        self._token_cache: dict[str, tuple[tuple[int, float], ...]] = {}

    def _token_coords(self, token: str) -> tuple[tuple[int, float], ...]:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        coords = []
        for i in range(self.coords_per_token):
            digest = hashlib.blake2b(
                f"{self.seed}\x1f{i}\x1f{token}".encode("utf-8"), digest_size=9
            ).digest()
            index = int.from_bytes(digest[:8], "big") % self.dimension
            sign = 1.0 if digest[8] & 1 else -1.0
            coords.append((index, sign))
        result = tuple(coords)
        self._token_cache[token] = result
        return result

    @staticmethod
    def tokenize(text: str) -> list[str]:
        out, current = [], []
        for ch in text.lower():
            if ch.isalnum():
                current.append(ch)
            elif current:
                out.append("".join(current))
                current = []
        if current:
            out.append("".join(current))
        return out

    def embed_one(self, text: str) -> list[float]:
        tokens = self.tokenize(text)
        if not tokens:
            raise InvalidVector(f"no tokens in text: {text[:60]!r}")
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            for index, sign in self._token_coords(token):
                vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # all contributions cancelled; nudge one deterministic coord
            vec[self._token_coords(tokens[0])[0][0]] = 1.0
            norm = 1.0
        return (vec / norm).tolist()

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self.embed_one(t) for t in texts]


class HttpEmbeddingProvider:
    """Client for a JSON embeddings endpoint.

    POST {endpoint}/embeddings with {"model": ..., "input": [texts]};
    expects {"data": [{"embedding": [...]}, ...]} in input order. The API
    key is read from the environment at call time, never stored in config.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int = DEFAULT_DIMENSION,
        api_key_env: str = "PVRAG_API_KEY",
        batch_size: int = 128,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.fingerprint = f"http/{model}?dim={dimension}"
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start : start + self.batch_size])
            try:
                resp = self._client.post(
                    f"{self.endpoint}/embeddings",
                    json={"model": self.model, "input": batch},
                    headers=self._headers(),
                )
                resp.raise_for_status()
                payload = resp.json()
            except httpx.HTTPError as exc:
                raise BackendUnavailable(f"embeddings request failed: {exc}")
            data = payload.get("data", [])
            if len(data) != len(batch):
                raise BackendUnavailable(
                    f"expected {len(batch)} embeddings, got {len(data)}"
                )
            vectors.extend([float(x) for x in item["embedding"]] for item in data)
        return vectors


class CachingProvider:
    """On-disk embedding cache keyed by (provider fingerprint, text hash).

    Entries never expire; delete the directory to invalidate. Useful in
    front of a paid HTTP provider, pointless in front of the hasher.
    """

    def __init__(self, inner: EmbeddingProvider, cache_dir: str | Path):
        self.inner = inner
        self.dimension = inner.dimension
        self.fingerprint = inner.fingerprint
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, text: str) -> Path:
        digest = hashlib.blake2b(
            (self.fingerprint + "\x1f" + text).encode("utf-8"), digest_size=16
        ).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out: list[list[float] | None] = []
        missing: list[str] = []
        for text in texts:
            path = self._path(text)
            if path.exists():
                out.append(json.loads(path.read_text(encoding="utf-8")))
            else:
                out.append(None)
                missing.append(text)
        if missing:
            fresh = self.inner.embed(missing)
            it = iter(fresh)
            for i, vec in enumerate(out):
                if vec is None:
                    new = next(it)
                    self._path(texts[i]).write_text(
                        json.dumps(new), encoding="utf-8"
                    )
                    out[i] = new
        return out  # type: ignore[return-value]


class DeterministicChatBackend:
    """Perfectly instruction-following stand-in for a hosted model.

    Retrieval prompts end with an assertion sentence; the completion
    repeats it behind the matching YES/NO lead. No-retrieval prompts get
    a NO: with no supporting material the instruction forbids inferring
    an association. Prompts that fit neither shape raise MalformedPrompt
    rather than producing an arbitrary answer.
    """

    name = "deterministic"
    generation_params = {"temperature": 0.0}

    def complete(self, prompt: str) -> str:
        classified = classify_assertion(prompt)
        if classified is not None:
            lead = "YES" if classified.positive else "NO"
            return f"{lead}, based on the RAG Results: {classified.assertion}"
        if prompt.startswith(BASELINE_INSTRUCTION):
            return (
                "NO, no supporting information was provided, so no "
                "association can be asserted."
            )
        raise MalformedPrompt("prompt carries no recognizable assertion")


class ConstantChatBackend:
    """Degenerate backend answering the same decision to everything."""

    generation_params = {"temperature": 0.0}

    def __init__(self, decision: str = "YES"):
        if decision not in ("YES", "NO"):
            raise ValueError("decision must be YES or NO")
        self.decision = decision
        self.name = f"constant-{decision.lower()}"

    def complete(self, prompt: str) -> str:
        return f"{self.decision}, by configuration."


class HttpChatBackend:
    """Client for a JSON chat-completions endpoint.

    POST {endpoint}/chat/completions with a single user message; reads
    the first choice's message content. Temperature is pinned to 0 (the
    most deterministic setting the protocol offers).
    """

    generation_params = {"temperature": 0.0}

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "PVRAG_API_KEY",
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.name = f"http/{model}"
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            **self.generation_params,
        }
        try:
            resp = self._client.post(
                f"{self.endpoint}/chat/completions",
                json=body,
                headers=self._headers(),
            )
            resp.raise_for_status()
            payload = resp.json()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"chat request failed: {exc}")
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendUnavailable("chat response missing message content")
