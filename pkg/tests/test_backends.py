import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from fragsel.backends import load_backend, load_backends, request_digest
from fragsel.backends.base import logprobs_request, score_request
from fragsel.backends.http import HttpBackend
from fragsel.backends.mock import MockBackend, mock_from_fixture
from fragsel.errors import (
    BackendFailure,
    BackendTimeout,
    ConfigError,
    FixtureMiss,
    FixtureParseError,
    LengthMismatch,
)
from fragsel.types import Document, EvidenceItem, Query


class TestMock:
    def test_table_hit_and_call_log(self, query):
        mock = MockBackend({"scores": [{"query_id": "q1", "text": "hello", "score": 0.25}]})
        assert mock.score(query, "hello") == 0.25
        assert mock.score(query, "hello") == 0.25
        assert [c.endpoint for c in mock.calls] == ["score", "score"]
        assert mock.calls[0].body == score_request(query, "hello")
        mock.reset_calls()
        assert mock.calls == []

    def test_miss_names_the_request(self, query):
        mock = MockBackend({})
        with pytest.raises(FixtureMiss) as info:
            mock.score(query, "absent")
        assert info.value.key == ("q1", "absent")
        assert isinstance(info.value, BackendFailure)

    def test_digest_fallback(self, query):
        digest = request_digest("score", score_request(query, "raw"))
        mock = MockBackend({"responses": {digest: {"score": 0.5}}})
        assert mock.score(query, "raw") == 0.5

    def test_retrieval_resolves_ids_against_corpus(self, query):
        corpus = {"a": Document.text("a", "A."), "b": Document.image("b", "b.png")}
        mock = MockBackend({"retrievals": [{"query_id": "q1", "doc_ids": ["b", "a", "zz"]}]}, corpus)
        assert [d.id for d in mock.retrieve(query, 2)] == ["b", "a"]
        with pytest.raises(FixtureMiss):
            mock.retrieve(query, 3)

    def test_generate_prefers_matching_context(self, query):
        item = EvidenceItem.coarse(Document.text("d1", "x"))
        mock = MockBackend(
            {
                "answers": [
                    {"query_id": "q1", "context": ["d1"], "answer": "specific"},
                    {"query_id": "q1", "answer": "fallback"},
                ]
            }
        )
        assert mock.generate(query, [item]) == "specific"
        assert mock.generate(query, []) == "fallback"

    def test_logprob_contract_is_checked(self, query):
        mock = MockBackend({"logprobs": [{"query_id": "q1", "fragment": None, "logprobs": [-1.0]}]})
        with pytest.raises((BackendFailure, LengthMismatch)):
            mock.logprobs(query, None, ["a", "b"])

    def test_identical_calls_are_pure(self, query):
        fixture = {"scores": [{"query_id": "q1", "text": "t", "score": 0.7}]}
        a, b = MockBackend(fixture), MockBackend(json.loads(json.dumps(fixture)))
        assert a.score(query, "t") == b.score(query, "t")
        assert a.descriptor == b.descriptor

    def test_malformed_fixture(self, tmp_path):
        with pytest.raises(FixtureParseError):
            MockBackend({"bogus_table": []})
        bad = tmp_path / "f.json"
        bad.write_text("{not json")
        with pytest.raises(FixtureParseError):
            mock_from_fixture(bad)

    def test_fixture_directory_is_merged(self, tmp_path, query):
        (tmp_path / "a.json").write_text(json.dumps({"scores": [{"query_id": "q1", "text": "x", "score": 0.1}]}))
        (tmp_path / "b.json").write_text(json.dumps({"scores": [{"query_id": "q1", "text": "y", "score": 0.2}]}))
        mock = mock_from_fixture(tmp_path)
        assert (mock.score(query, "x"), mock.score(query, "y")) == (0.1, 0.2)


class Stub:
    """Scripted local HTTP server: each route pops (status, body) replies in order."""

    def __init__(self):
        self.script: dict[str, list] = {}
        self.received: list[tuple[str, bytes, dict]] = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                raw = self.rfile.read(int(self.headers["Content-Length"]))
                route = self.path.strip("/")
                stub.received.append((route, raw, dict(self.headers)))
                replies = stub.script.get(route) or [(404, "{}")]
                status, body = replies.pop(0) if len(replies) > 1 else replies[0]
                if status == "hang":
                    threading.Event().wait(body)
                    status, body = 200, "{}"
                data = body if isinstance(body, str) else json.dumps(body)
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data.encode())))
                self.end_headers()
                self.wfile.write(data.encode())

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        threading.Thread(target=self.server.serve_forever, args=(0.02,), daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    s = Stub()
    yield s
    s.close()


def client(stub, **kw):
    sleeps = []
    backend = HttpBackend(stub.url, sleep=sleeps.append, **kw)
    return backend, sleeps


class TestHttp:
    def test_logprobs_round_trip(self, stub, query):
        stub.script["logprobs"] = [(200, {"logprobs": [-0.5, -1.5]})]
        backend, _ = client(stub)
        result = backend.logprobs(query, None, ["Abiy", "Ahmed"])
        assert result.logprobs == (-0.5, -1.5)
        route, raw, headers = stub.received[0]
        assert route == "logprobs"
        assert json.loads(raw) == logprobs_request(query, None, ["Abiy", "Ahmed"])
        assert json.loads(raw)["v"] == 1

    def test_server_error_is_retried(self, stub, query):
        stub.script["score"] = [(500, "oops"), (200, {"score": 0.9})]
        backend, sleeps = client(stub)
        assert backend.score(query, "text") == 0.9
        assert [a for _, a, _ in backend.attempt_log] == [1, 2]
        assert sleeps == [0.5]
        assert stub.received[0][1] == stub.received[1][1]

    def test_gives_up_after_three_attempts(self, stub, query):
        stub.script["score"] = [(503, "busy")]
        backend, sleeps = client(stub)
        with pytest.raises(BackendFailure) as info:
            backend.score(query, "text")
        assert info.value.status == 503
        assert len(stub.received) == 3 and sleeps == [0.5, 1.0]

    def test_client_error_is_not_retried(self, stub, query):
        stub.script["score"] = [(400, "bad request")]
        backend, _ = client(stub)
        with pytest.raises(BackendFailure):
            backend.score(query, "text")
        assert len(stub.received) == 1

    def test_malformed_json(self, stub, query):
        stub.script["score"] = [(200, "not json")]
        backend, _ = client(stub)
        with pytest.raises(BackendFailure, match="malformed"):
            backend.score(query, "text")

    def test_contract_violation(self, stub, query):
        stub.script["logprobs"] = [(200, {"logprobs": [0.5]})]
        backend, _ = client(stub)
        with pytest.raises(BackendFailure):
            backend.logprobs(query, None, ["a"])

    def test_timeout(self, stub, query):
        stub.script["score"] = [("hang", 1.0)]
        backend, _ = client(stub, timeout=0.1, retries=2)
        with pytest.raises(BackendTimeout):
            backend.score(query, "text")
        assert [s for _, _, s in backend.attempt_log] == [None, None]

    def test_bearer_token_from_environment(self, stub, query, monkeypatch):
        monkeypatch.setenv("FRAGSEL_TEST_TOKEN", "s3cret")
        stub.script["score"] = [(200, {"score": 0.1})]
        backend, _ = client(stub, auth_token_env_var="FRAGSEL_TEST_TOKEN")
        backend.score(query, "x")
        headers = {k.lower(): v for k, v in stub.received[0][2].items()}
        assert headers["authorization"] == "Bearer s3cret"

    def test_connection_refused(self, query):
        backend = HttpBackend("http://127.0.0.1:9", sleep=lambda s: None, timeout=1.0)
        with pytest.raises(BackendFailure):
            backend.score(query, "x")

    def test_bad_url(self):
        with pytest.raises(ConfigError):
            HttpBackend("ftp://example")


def test_endpoints_file_assigns_roles(tmp_path, stub, query):
    path = tmp_path / "endpoints.json"
    path.write_text(json.dumps({"endpoints": {"default": {"url": stub.url}, "scorer": {"url": stub.url + "/v2"}}}))
    stub.script["v2/score"] = [(200, {"score": 0.3})]
    backends = load_backends(path)
    assert backends.scorer.score(query, "x") == 0.3
    assert isinstance(load_backend(path, "generator"), HttpBackend)
