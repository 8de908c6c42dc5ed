import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from namestruct.embed import (
    HashedNgramProvider,
    ProviderError,
    RemoteProvider,
    build_provider,
    merge_subwords,
)


class TestMergeSubwords:
    def test_singleton_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(merge_subwords([v]), v)

    def test_additive_inverse(self):
        v = np.array([1.0, -2.0])
        assert np.array_equal(merge_subwords([v, -v]), np.zeros(2))

    def test_elementwise_sum(self):
        out = merge_subwords([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
        assert np.array_equal(out, np.array([4.0, 6.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            merge_subwords([np.zeros(2), np.zeros(3)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            merge_subwords([])


class TestHashedNgramProvider:
    def test_deterministic(self):
        p = HashedNgramProvider(dimension=32)
        assert np.array_equal(p.embed_token("abc"), p.embed_token("abc"))
        # and across independent instances
        q = HashedNgramProvider(dimension=32)
        assert np.array_equal(p.embed_token("abc"), q.embed_token("abc"))

    def test_unit_norm(self):
        p = HashedNgramProvider(dimension=64)
        assert np.linalg.norm(p.embed_token("abc")) == pytest.approx(1.0)

    def test_lowercased(self):
        p = HashedNgramProvider()
        assert np.array_equal(p.embed_token("Abc"), p.embed_token("abc"))

    def test_mention_shape_and_finiteness(self):
        p = HashedNgramProvider(dimension=16)
        out = p.embed_mention(["Apple", "Inc."])
        assert out.shape == (2, 16)
        assert np.all(np.isfinite(out))

    def test_empty_token_rejected(self):
        with pytest.raises(ValueError):
            HashedNgramProvider().embed_token("")

    def test_distinct_tokens_usually_differ(self):
        p = HashedNgramProvider(dimension=64)
        assert not np.array_equal(p.embed_token("apple"), p.embed_token("orange"))


class _EmbedHandler(BaseHTTPRequestHandler):
    dimension = 8
    fail_next = False
    calls = 0

    def do_POST(self):
        type(self).calls += 1
        if type(self).fail_next:
            type(self).fail_next = False
            self.send_response(500)
            self.end_headers()
            return
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        vectors = []
        for token in body["tokens"]:
            rng = np.random.default_rng(abs(hash(token)) % (2**32))
            vectors.append(rng.normal(size=self.dimension).tolist())
        payload = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    _EmbedHandler.calls = 0
    _EmbedHandler.fail_next = False
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestRemoteProvider:
    def test_fetch_and_cache(self, embed_server, tmp_path):
        cache = tmp_path / "cache.jsonl"
        p = RemoteProvider(embed_server, dimension=8, cache_path=cache)
        v1 = p.embed_token("alpha")
        assert v1.shape == (8,)
        assert p.request_count == 1
        assert np.array_equal(p.embed_token("alpha"), v1)
        assert p.request_count == 1  # warm memo, no second call

    def test_disk_cache_survives_restart(self, embed_server, tmp_path):
        cache = tmp_path / "cache.jsonl"
        p = RemoteProvider(embed_server, dimension=8, cache_path=cache)
        v1 = p.embed_token("alpha")
        fresh = RemoteProvider(embed_server, dimension=8, cache_path=cache)
        assert np.array_equal(fresh.embed_token("alpha"), v1)
        assert fresh.request_count == 0

    def test_mention_batches_uncached_tokens(self, embed_server, tmp_path):
        p = RemoteProvider(embed_server, dimension=8, cache_path=tmp_path / "c.jsonl")
        out = p.embed_mention(["a", "b", "a"])
        assert out.shape == (3, 8)
        assert p.request_count == 1
        assert np.array_equal(out[0], out[2])

    def test_http_error_raises_provider_error(self, embed_server):
        p = RemoteProvider(embed_server, dimension=8)
        _EmbedHandler.fail_next = True
        with pytest.raises(ProviderError):
            p.embed_token("boom")
        # caller may retry; the retry succeeds
        assert p.embed_token("boom").shape == (8,)

    def test_connection_failure_raises_provider_error(self):
        p = RemoteProvider("http://127.0.0.1:1", dimension=8, timeout=0.2)
        with pytest.raises(ProviderError):
            p.embed_token("x")

    def test_width_mismatch_rejected(self, embed_server):
        p = RemoteProvider(embed_server, dimension=16)  # server sends 8
        with pytest.raises(ProviderError):
            p.embed_token("x")


class TestBuildProvider:
    def test_hashed_round_trip(self):
        p = build_provider({"kind": "hashed-ngram", "dimension": 24})
        assert p.dimension == 24
        assert build_provider(p.config()).config() == p.config()

    def test_remote_config(self):
        p = build_provider(
            {"kind": "remote", "url": "http://example/", "dimension": 768}
        )
        assert p.url == "http://example"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_provider({"kind": "wavelet"})
