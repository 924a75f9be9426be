"""Language-model backends that turn prompts into candidate programs.

Two implementations: a scripted mock that replays canned responses (used
for tests and offline runs) and an HTTP chat-completions client. Both
expose the same surface: ``draw_samples(prompt, n)`` returning up to n
response strings, ``clear_history()``, and a ``token_usage`` accumulator.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import requests

API_KEY_VAR = "ELATE_API_KEY"
RESPONSE_SEPARATOR = "---"
RETRY_SLEEPS = (1.0, 2.0, 4.0)


class LlmError(RuntimeError):
    """A backend failed to produce responses after exhausting retries."""


@dataclass
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    requests: int = 0

    def add(self, prompt_tokens: int, completion_tokens: int) -> None:
        self.prompt_tokens += prompt_tokens
        self.completion_tokens += completion_tokens
        self.requests += 1

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


class LlmBackend(Protocol):
    token_usage: TokenUsage

    def draw_samples(self, prompt: str, n: int) -> list[str]: ...

    def clear_history(self) -> None: ...


def extract_code(message: str) -> str:
    """Program text from a model reply.

    The contents of the first fenced code block win (an unterminated fence
    runs to the end of the message); a reply without fences is taken whole.
    """
    lines = message.splitlines()
    start = None
    for i, line in enumerate(lines):
        if line.lstrip().startswith("```"):
            start = i
            break
    if start is None:
        return message.strip()
    body: list[str] = []
    for line in lines[start + 1 :]:
        if line.strip().startswith("```"):
            break
        body.append(line)
    return "\n".join(body).strip()


class MockBackend:
    """Replays a fixed list of responses, in order, across all prompts."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self._cursor = 0
        self.token_usage = TokenUsage()

    @classmethod
    def from_script(cls, path) -> "MockBackend":
        """Load responses from a file, split on lines containing only ---."""
        text = Path(path).read_text(encoding="utf-8")
        chunks: list[str] = []
        current: list[str] = []
        for line in text.splitlines():
            if line.strip() == RESPONSE_SEPARATOR:
                chunks.append("\n".join(current))
                current = []
            else:
                current.append(line)
        chunks.append("\n".join(current))
        responses = [c.strip() for c in chunks if c.strip()]
        return cls(responses)

    @property
    def exhausted(self) -> bool:
        return self._cursor >= len(self.responses)

    def draw_samples(self, prompt: str, n: int) -> list[str]:
        """Next min(n, remaining) scripted responses; empty when exhausted."""
        take = self.responses[self._cursor : self._cursor + n]
        self._cursor += len(take)
        self.token_usage.add(
            len(prompt.split()), sum(len(r.split()) for r in take)
        )
        return list(take)

    def clear_history(self) -> None:
        pass


@dataclass
class HttpChatBackend:
    """Chat-completions client with retry and per-conversation history.

    The API key is read from the ELATE_API_KEY environment variable at
    construction time; it is never read from configuration files. Failed
    requests are retried up to three times (transport errors, 429, and
    5xx) with fixed 1s/2s/4s pauses; the sleep function is injectable so
    tests run instantly.
    """

    endpoint: str
    model: str
    temperature: float = 1.0
    timeout: float = 60.0
    sleep: callable = time.sleep
    token_usage: TokenUsage = field(default_factory=TokenUsage)

    def __post_init__(self):
        key = os.environ.get(API_KEY_VAR, "")
        if not key:
            raise LlmError(
                f"no API key: set the {API_KEY_VAR} environment variable"
            )
        self._api_key = key
        self._history: list[dict] = []

    def clear_history(self) -> None:
        self._history = []

    def _post(self, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(len(RETRY_SLEEPS) + 1):
            if attempt:
                self.sleep(RETRY_SLEEPS[attempt - 1])
            try:
                response = requests.post(
                    self.endpoint,
                    json=payload,
                    headers={
                        "Authorization": f"Bearer {self._api_key}",
                        "Content-Type": "application/json",
                    },
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = LlmError(
                    f"HTTP {response.status_code}: {response.text[:200]}"
                )
                continue
            if response.status_code != 200:
                raise LlmError(
                    f"HTTP {response.status_code}: {response.text[:200]}"
                )
            return response.json()
        raise LlmError(f"request failed after retries: {last_error}")

    def draw_samples(self, prompt: str, n: int) -> list[str]:
        messages = self._history + [{"role": "user", "content": prompt}]
        body = self._post(
            {
                "model": self.model,
                "messages": messages,
                "n": n,
                "temperature": self.temperature,
            }
        )
        try:
            replies = [c["message"]["content"] for c in body["choices"]]
        except (KeyError, TypeError) as exc:
            raise LlmError(f"malformed response body: {exc}") from exc
        usage = body.get("usage", {})
        self.token_usage.add(
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )
        self._history.append({"role": "user", "content": prompt})
        for reply in replies:
            self._history.append({"role": "assistant", "content": reply})
        return replies
