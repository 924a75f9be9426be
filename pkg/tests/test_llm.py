import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from elate import LlmError, MockBackend, extract_code
from elate.llm import API_KEY_VAR, HttpChatBackend, TokenUsage

# extract_code ----------------------------------------------------------------


def test_extract_code_fenced_block():
    msg = 'Here you go:\n```\nfeature "f": a + 1\n```\nHope that helps!'
    assert extract_code(msg) == 'feature "f": a + 1'


def test_extract_code_language_tag_and_indent():
    msg = '  ```python\n# idea\nfeature "f": a\n  ```'
    assert extract_code(msg) == '# idea\nfeature "f": a'


def test_extract_code_unterminated_fence_runs_to_end():
    msg = 'intro\n```\nfeature "f": a\nfeature continues'
    assert extract_code(msg) == 'feature "f": a\nfeature continues'


def test_extract_code_no_fence_takes_whole_reply():
    msg = '  feature "f": a * 2  \n'
    assert extract_code(msg) == 'feature "f": a * 2'


def test_extract_code_first_block_wins():
    msg = "```\nfirst\n```\ntext\n```\nsecond\n```"
    assert extract_code(msg) == "first"


def test_extract_code_empty_block():
    assert extract_code("```\n```") == ""


# TokenUsage -----------------------------------------------------------------


def test_token_usage_accumulates():
    usage = TokenUsage()
    usage.add(10, 3)
    usage.add(5, 2)
    assert usage.prompt_tokens == 15
    assert usage.completion_tokens == 5
    assert usage.total_tokens == 20
    assert usage.requests == 2


# MockBackend ----------------------------------------------------------------


def test_mock_backend_replays_in_order():
    backend = MockBackend(["one", "two", "three"])
    assert backend.draw_samples("p", 2) == ["one", "two"]
    assert not backend.exhausted
    assert backend.draw_samples("p", 5) == ["three"]
    assert backend.exhausted
    assert backend.draw_samples("p", 1) == []


def test_mock_backend_counts_words_as_tokens():
    backend = MockBackend(["alpha beta", "gamma"])
    backend.draw_samples("two words", 2)
    assert backend.token_usage.prompt_tokens == 2
    assert backend.token_usage.completion_tokens == 3
    assert backend.token_usage.requests == 1
    backend.clear_history()  # no-op, must not raise


def test_mock_backend_from_script(tmp_path):
    script = tmp_path / "replies.txt"
    script.write_text(
        "first reply\nsecond line\n---\n\n---\nsecond reply\n ---- \nstill second\n---\n",
        encoding="utf-8",
    )
    backend = MockBackend.from_script(script)
    assert backend.responses == [
        "first reply\nsecond line",
        "second reply\n ---- \nstill second",
    ]


def test_mock_backend_from_script_separator_tolerates_spaces(tmp_path):
    script = tmp_path / "replies.txt"
    script.write_text("a\n  ---  \nb\n", encoding="utf-8")
    backend = MockBackend.from_script(script)
    assert backend.responses == ["a", "b"]


# HTTP backend ----------------------------------------------------------------


class _Script:
    """Per-test control block for the stub server."""

    def __init__(self):
        self.statuses: list[int] = []
        self.requests: list[dict] = []
        self.response_payload = None  # None -> well-formed echo

    def next_status(self) -> int:
        return self.statuses.pop(0) if self.statuses else 200


class _Handler(BaseHTTPRequestHandler):
    script: _Script

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.script.requests.append(
            {"auth": self.headers.get("Authorization"), "body": body}
        )
        status = self.script.next_status()
        if status != 200:
            self.send_response(status)
            self.end_headers()
            self.wfile.write(b"server says no")
            return
        if self.script.response_payload is not None:
            payload = self.script.response_payload
        else:
            n = body.get("n", 1)
            payload = {
                "choices": [
                    {"message": {"content": f"reply {i}"}} for i in range(n)
                ],
                "usage": {"prompt_tokens": 7, "completion_tokens": 5},
            }
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub():
    script = _Script()
    handler = type("Handler", (_Handler,), {"script": script})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    yield url, script
    server.shutdown()
    server.server_close()


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv(API_KEY_VAR, "test-key-123")


def _backend(url, **kwargs):
    sleeps: list[float] = []
    backend = HttpChatBackend(
        endpoint=url, model="test-model", sleep=sleeps.append, **kwargs
    )
    return backend, sleeps


def test_http_backend_requires_env_key(monkeypatch, stub):
    url, _ = stub
    monkeypatch.delenv(API_KEY_VAR, raising=False)
    with pytest.raises(LlmError, match=API_KEY_VAR):
        HttpChatBackend(endpoint=url, model="m")


def test_http_backend_success_roundtrip(api_key, stub):
    url, script = stub
    backend, sleeps = _backend(url, temperature=0.7)
    replies = backend.draw_samples("make me a feature", 3)
    assert replies == ["reply 0", "reply 1", "reply 2"]
    assert sleeps == []
    assert len(script.requests) == 1
    request = script.requests[0]
    assert request["auth"] == "Bearer test-key-123"
    assert request["body"]["model"] == "test-model"
    assert request["body"]["n"] == 3
    assert request["body"]["temperature"] == 0.7
    assert request["body"]["messages"] == [
        {"role": "user", "content": "make me a feature"}
    ]
    assert backend.token_usage.prompt_tokens == 7
    assert backend.token_usage.completion_tokens == 5
    assert backend.token_usage.requests == 1


def test_http_backend_accumulates_history(api_key, stub):
    url, script = stub
    backend, _ = _backend(url)
    backend.draw_samples("first prompt", 2)
    backend.draw_samples("second prompt", 1)
    messages = script.requests[1]["body"]["messages"]
    assert [m["role"] for m in messages] == ["user", "assistant", "assistant", "user"]
    assert messages[0]["content"] == "first prompt"
    assert messages[3]["content"] == "second prompt"
    assert backend.token_usage.requests == 2
    assert backend.token_usage.total_tokens == 24

    backend.clear_history()
    backend.draw_samples("fresh prompt", 1)
    assert script.requests[2]["body"]["messages"] == [
        {"role": "user", "content": "fresh prompt"}
    ]


def test_http_backend_retries_on_429(api_key, stub):
    url, script = stub
    script.statuses = [429]
    backend, sleeps = _backend(url)
    replies = backend.draw_samples("p", 1)
    assert replies == ["reply 0"]
    assert sleeps == [1.0]
    assert len(script.requests) == 2


def test_http_backend_retries_exhausted_on_5xx(api_key, stub):
    url, script = stub
    script.statuses = [500, 502, 503, 500]
    backend, sleeps = _backend(url)
    with pytest.raises(LlmError, match="after retries"):
        backend.draw_samples("p", 1)
    assert sleeps == [1.0, 2.0, 4.0]
    assert len(script.requests) == 4


def test_http_backend_client_error_fails_fast(api_key, stub):
    url, script = stub
    script.statuses = [400]
    backend, sleeps = _backend(url)
    with pytest.raises(LlmError, match="HTTP 400"):
        backend.draw_samples("p", 1)
    assert sleeps == []
    assert len(script.requests) == 1


def test_http_backend_malformed_body(api_key, stub):
    url, script = stub
    script.response_payload = {"surprise": True}
    backend, _ = _backend(url)
    with pytest.raises(LlmError, match="malformed"):
        backend.draw_samples("p", 1)


def test_http_backend_connection_errors_retry_then_fail(api_key):
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        dead_port = probe.getsockname()[1]
    backend, sleeps = _backend(f"http://127.0.0.1:{dead_port}/v1")
    with pytest.raises(LlmError, match="after retries"):
        backend.draw_samples("p", 1)
    assert sleeps == [1.0, 2.0, 4.0]
