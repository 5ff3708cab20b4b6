import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from socialsim.cognition import CognitionRequest, init_basic_needs
from socialsim.cognition.remote import ENV_API_KEY, ENV_BASE_URL, ENV_MODEL, RemoteBackend
from socialsim.errors import CognitionError, ConfigError


class Stub:
    """Chat-completion endpoint replaying scripted replies; records each payload."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.received = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                stub.received.append({"path": self.path, "auth": self.headers.get("Authorization"), "body": body})
                status, content = stub.replies.pop(0) if len(stub.replies) > 1 else stub.replies[0]
                data = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]}).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    made = []

    def make(*replies):
        s = Stub(replies or [(200, "{}")])
        made.append(s)
        return s

    yield make
    for s in made:
        s.close()


PROFILE = {"name": "Ana", "age": 41, "health_status": "good"}


def test_request_shape_and_parsing(stub):
    s = stub((200, 'Sure. {"hunger": 0.4, "fatigue": 0.2}'))
    backend = RemoteBackend(s.url, "test-model", "secret")
    out = init_basic_needs(PROFILE, {"current_time": "08:00", "weather": "rain"}, backend)
    backend.close()
    assert out == {"hunger": 0.4, "fatigue": 0.2}
    sent = s.received[0]
    assert sent["path"] == "/v1/chat/completions" and sent["auth"] == "Bearer secret"
    assert sent["body"]["model"] == "test-model"
    prompt = sent["body"]["messages"][1]["content"]
    assert "Name: Ana" in prompt and "Weather: rain" in prompt


def test_nonconforming_reply_is_retried_then_defaults(stub):
    s = stub((200, "I cannot answer that."))
    out = init_basic_needs(PROFILE, {}, RemoteBackend(s.url, "m"))
    assert out == {"hunger": 0.3, "fatigue": 0.2}
    assert len(s.received) == 2


def test_http_error_becomes_cognition_error(stub):
    s = stub((500, "boom"))
    with pytest.raises(CognitionError):
        RemoteBackend(s.url, "m").respond(CognitionRequest("memory_queries", {"context": {}}))


def test_out_of_range_is_clamped(stub):
    s = stub((200, '{"hunger": 1.3, "fatigue": 0.1}'))
    resp = RemoteBackend(s.url, "m").respond(
        CognitionRequest("init_basic_needs", {"name": "", "age": "", "health_status": "", "current_time": "", "weather": ""}))
    assert resp.structured == {"hunger": 1.0, "fatigue": 0.1} and not resp.conforming


def test_environment_block_for_unused_context(stub):
    s = stub((200, '["q?"]'))
    RemoteBackend(s.url, "m").respond(CognitionRequest("memory_queries", {"context": {}, "weather": "rainy"}))
    msgs = s.received[0]["body"]["messages"]
    assert msgs[-1]["content"].startswith("Environment Context:") and "rainy" in msgs[-1]["content"]


def test_credentials_from_environment():
    with pytest.raises(ConfigError):
        RemoteBackend.from_env({})
    b = RemoteBackend.from_env({ENV_BASE_URL: "http://x/v1/", ENV_MODEL: "m", ENV_API_KEY: "k"})
    assert b.base_url == "http://x/v1" and b.model == "m"
    with pytest.raises(ConfigError):
        RemoteBackend("", "m")


def test_oracle_config_makes_no_network_calls(monkeypatch, fixture_config):
    import httpx

    from socialsim.config import load_config
    from socialsim.experiment import make_backend

    def forbid(*a, **k):
        raise AssertionError("network used")

    monkeypatch.setattr(httpx.Client, "send", forbid)
    backend = make_backend(load_config(fixture_config))
    assert type(backend).__name__ == "OracleBackend"
