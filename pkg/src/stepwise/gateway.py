"""Provider abstraction with record/replay fixtures.

Replay mode answers every request from fixture files keyed by prompt
fingerprint and never opens a connection. Record mode calls the configured
transport and stores one JSON file per entry (diff-friendly in version
control), grouped in a directory per task. Live mode calls without storing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from .prompts import PromptRequest

MODE_REPLAY = "replay"
MODE_RECORD = "record"
MODE_LIVE = "live"

TOKEN_ENV = "STEPWISE_LLM_TOKEN"


class FixtureMiss(LookupError):
    def __init__(self, fingerprint: str):
        super().__init__(f"no fixture recorded for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class FixtureError(ValueError):
    pass


class ProviderError(RuntimeError):
    def __init__(self, message: str, status: Optional[int] = None,
                 transient: bool = False):
        super().__init__(message)
        self.status = status
        self.transient = transient


class ProviderTimeout(ProviderError):
    def __init__(self, message: str = "provider call timed out"):
        super().__init__(message, status=None, transient=True)


@dataclass(frozen=True)
class FixtureEntry:
    fingerprint: str
    stage: str
    request_text: str
    response_text: str
    recorded_at: str

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "stage": self.stage,
            "requestText": self.request_text,
            "responseText": self.response_text,
            "recordedAt": self.recorded_at,
        }

    @staticmethod
    def from_json(data: dict) -> "FixtureEntry":
        return FixtureEntry(
            fingerprint=data["fingerprint"],
            stage=data["stage"],
            request_text=data["requestText"],
            response_text=data["responseText"],
            recorded_at=data["recordedAt"],
        )


@dataclass
class ProviderConfig:
    mode: str = MODE_REPLAY
    fixture_path: Optional[Path] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    timeout: float = 30.0
    max_retries: int = 2
    token_env: str = TOKEN_ENV
    # injectable transport for tests and fixture synthesis: request -> text
    transport: Optional[Callable[[PromptRequest], str]] = field(
        default=None, repr=False)

    def __post_init__(self):
        if isinstance(self.fixture_path, str):
            self.fixture_path = Path(self.fixture_path)
        if self.mode not in (MODE_REPLAY, MODE_RECORD, MODE_LIVE):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == MODE_REPLAY and self.fixture_path is None:
            raise ValueError("replay mode requires a fixture path")


def load_fixtures(path: str | Path) -> dict[str, FixtureEntry]:
    """All fixture entries under `path`, keyed (uniquely) by fingerprint."""
    root = Path(path)
    entries: dict[str, FixtureEntry] = {}
    if not root.exists():
        return entries
    for i, file in enumerate(sorted(root.rglob("*.json"))):
        try:
            entry = FixtureEntry.from_json(json.loads(file.read_text("utf-8")))
        except (json.JSONDecodeError, KeyError) as exc:
            raise FixtureError(f"corrupt fixture file {file} (entry {i}): {exc}") from exc
        if entry.fingerprint in entries:
            raise FixtureError(f"duplicate fingerprint {entry.fingerprint} in {file}")
        entries[entry.fingerprint] = entry
    return entries


def save_fixtures(entries: dict[str, FixtureEntry], path: str | Path,
                  namespace: str = "") -> None:
    target = Path(path) / namespace if namespace else Path(path)
    target.mkdir(parents=True, exist_ok=True)
    for entry in entries.values():
        out = target / f"{entry.fingerprint}.json"
        out.write_text(json.dumps(entry.to_json(), indent=2) + "\n", "utf-8")


def _http_transport(request: PromptRequest, config: ProviderConfig) -> str:
    """Default chat-completions wire format (see README for the shapes)."""
    import httpx

    token = os.environ.get(config.token_env, "")
    if not token:
        raise ProviderError(f"environment variable {config.token_env} is not set")
    if not config.endpoint:
        raise ProviderError("no endpoint configured for live provider calls")
    body = {
        "model": config.model or "",
        "messages": [{"role": "user", "content": request.rendered_text}],
    }
    try:
        response = httpx.post(
            config.endpoint, json=body, timeout=config.timeout,
            headers={"Authorization": f"Bearer {token}"},
        )
    except httpx.TimeoutException as exc:
        raise ProviderTimeout(str(exc)) from exc
    if response.status_code >= 500:
        raise ProviderError(f"provider returned {response.status_code}",
                            status=response.status_code, transient=True)
    if response.status_code >= 400:
        raise ProviderError(f"provider returned {response.status_code}: {response.text}",
                            status=response.status_code)
    data = response.json()
    try:
        return data["choices"][0]["message"]["content"]
    except (KeyError, IndexError) as exc:
        raise ProviderError(f"unexpected response shape: {exc}") from exc


class Gateway:
    """One provider session; caches the fixture index in replay mode."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self._fixtures: Optional[dict[str, FixtureEntry]] = None

    @property
    def fixtures(self) -> dict[str, FixtureEntry]:
        if self._fixtures is None:
            if self.config.fixture_path is None:
                self._fixtures = {}
            else:
                self._fixtures = load_fixtures(self.config.fixture_path)
        return self._fixtures

    def _call_provider(self, request: PromptRequest) -> str:
        attempts = 0
        while True:
            try:
                if self.config.transport is not None:
                    return self.config.transport(request)
                return _http_transport(request, self.config)
            except ProviderError as exc:
                attempts += 1
                if not exc.transient or attempts > self.config.max_retries:
                    raise

    def complete(self, request: PromptRequest, namespace: str = "") -> str:
        if self.config.mode == MODE_REPLAY:
            entry = self.fixtures.get(request.fingerprint)
            if entry is None:
                raise FixtureMiss(request.fingerprint)
            return entry.response_text
        response = self._call_provider(request)
        if self.config.mode == MODE_RECORD:
            entry = FixtureEntry(
                fingerprint=request.fingerprint,
                stage=request.stage,
                request_text=request.rendered_text,
                response_text=response,
                recorded_at=datetime.now(timezone.utc).isoformat(),
            )
            if self.config.fixture_path is None:
                raise ProviderError("record mode requires a fixture path")
            save_fixtures({entry.fingerprint: entry}, self.config.fixture_path,
                          namespace=namespace)
            self.fixtures[entry.fingerprint] = entry
        return response


def complete(request: PromptRequest, config: ProviderConfig,
             namespace: str = "") -> str:
    """One-shot completion (constructs a transient Gateway)."""
    return Gateway(config).complete(request, namespace=namespace)
