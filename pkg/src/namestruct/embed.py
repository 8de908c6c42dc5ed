"""Token embedding providers: hashed character n-grams and a remote HTTP service."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import requests

DEFAULT_HASHED_DIM = 64
DEFAULT_REMOTE_DIM = 768


class ProviderError(RuntimeError):
    """Embedding provider failed to produce a vector."""


def merge_subwords(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Combine subword vectors into one token vector by element-wise addition."""
    if not len(parts):
        raise ValueError("parts is empty")
    dims = {len(p) for p in parts}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    out = np.zeros(dims.pop(), dtype=np.float64)
    for p in parts:
        out += np.asarray(p, dtype=np.float64)
    return out


def _hash_feature(feature: str, dimension: int) -> tuple[int, float]:
    # blake2b rather than hash(): stable across processes and restarts.
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=16).digest()
    index = int.from_bytes(digest[:8], "big") % dimension
    sign = 1.0 if digest[8] & 1 else -1.0
    return index, sign


class HashedNgramProvider:
    """Deterministic dependency-free embeddings from hashed character n-grams.

    Lowercases the token, hashes its 2-grams, 3-grams, and the whole token
    into ``dimension`` buckets with signed accumulation, then scales to unit
    Euclidean norm.
    """

    kind = "hashed-ngram"

    def __init__(self, dimension: int = DEFAULT_HASHED_DIM):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self._memo: dict[str, np.ndarray] = {}

    def config(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}

    def embed_token(self, token: str) -> np.ndarray:
        if not token:
            raise ValueError("token is empty")
        cached = self._memo.get(token)
        if cached is not None:
            return cached
        t = token.lower()
        features = [f"w:{t}"]
        for n in (2, 3):
            features.extend(f"{n}:{t[i:i + n]}" for i in range(len(t) - n + 1))
        vec = np.zeros(self.dimension, dtype=np.float64)
        for feat in features:
            index, sign = _hash_feature(feat, self.dimension)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        vec.flags.writeable = False
        self._memo[token] = vec
        return vec

    def embed_mention(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("tokens is empty")
        return np.stack([self.embed_token(t) for t in tokens])


class RemoteProvider:
    """Client for an HTTP embedding service with an on-disk append-only cache.

    Protocol: POST ``{url}/embed`` with body ``{"tokens": [...]}``; the
    response carries ``{"vectors": [[...], ...]}``, one vector per token with
    the configured width. Responses are cached keyed by (config digest,
    token), so repeat lookups never touch the network.
    """

    kind = "remote"

    def __init__(
        self,
        url: str,
        dimension: int = DEFAULT_REMOTE_DIM,
        cache_path: str | Path | None = None,
        session: requests.Session | None = None,
        timeout: float = 30.0,
    ):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.url = url.rstrip("/")
        self.dimension = dimension
        self.cache_path = Path(cache_path) if cache_path else None
        self.timeout = timeout
        self.request_count = 0
        self._session = session or requests.Session()
        self._cache: dict[str, np.ndarray] = {}
        self._config_digest = hashlib.sha256(
            json.dumps(self.config(), sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]
        if self.cache_path is not None and self.cache_path.exists():
            self._load_cache()

    def config(self) -> dict:
        return {"kind": self.kind, "url": self.url, "dimension": self.dimension}

    def _load_cache(self) -> None:
        with self.cache_path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.get("config") != self._config_digest:
                    continue
                vec = np.asarray(rec["vector"], dtype=np.float64)
                vec.flags.writeable = False
                self._cache[rec["token"]] = vec

    def _append_cache(self, token: str, vec: np.ndarray) -> None:
        if self.cache_path is None:
            return
        rec = {"config": self._config_digest, "token": token, "vector": vec.tolist()}
        with self.cache_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec) + "\n")

    def _fetch(self, tokens: list[str]) -> list[np.ndarray]:
        try:
            resp = self._session.post(
                self.url + "/embed", json={"tokens": tokens}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        self.request_count += 1
        if resp.status_code != 200:
            raise ProviderError(f"embedding service returned HTTP {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(tokens):
            raise ProviderError(
                f"expected {len(tokens)} vectors, got {len(vectors)}"
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ProviderError(
                    f"expected width {self.dimension}, got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ProviderError("embedding service returned non-finite values")
            arr.flags.writeable = False
            out.append(arr)
        return out

    def embed_token(self, token: str) -> np.ndarray:
        if not token:
            raise ValueError("token is empty")
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        vec = self._fetch([token])[0]
        self._cache[token] = vec
        self._append_cache(token, vec)
        return vec

    def embed_mention(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("tokens is empty")
        missing = sorted({t for t in tokens if t not in self._cache})
        if missing:
            for tok, vec in zip(missing, self._fetch(missing)):
                self._cache[tok] = vec
                self._append_cache(tok, vec)
        return np.stack([self._cache[t] for t in tokens])


def embed_token(provider, token: str) -> np.ndarray:
    return provider.embed_token(token)


def embed_mention(provider, tokens: Sequence[str]) -> np.ndarray:
    return provider.embed_mention(tokens)


def build_provider(config: Mapping, cache_path: str | Path | None = None):
    """Instantiate a provider from its serialized config."""
    kind = config.get("kind", "hashed-ngram")
    if kind == "hashed-ngram":
        return HashedNgramProvider(dimension=config.get("dimension", DEFAULT_HASHED_DIM))
    if kind == "remote":
        return RemoteProvider(
            url=config["url"],
            dimension=config.get("dimension", DEFAULT_REMOTE_DIM),
            cache_path=config.get("cache_path", cache_path),
        )
    raise ValueError(f"unknown provider kind {kind!r}")
