"""Payload execution harness: remote-browser and fixture-replay backends.

Both backends answer the same question: what runtime trace does this exact
payload produce?  The remote backend drives a real browser over the
standard session-oriented automation protocol (create session, navigate to
the instrumented page, run the payload through the page's hook, collect
the trace JSON, tear down).  The fixture backend replays traces previously
recorded for the payload's SHA-256, keyed byte-exactly so stale fixtures
fail loudly instead of silently matching.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from urllib.parse import urlsplit

import requests

from .corpus import digest
from .trace import (
    DEFAULT_ORIGIN,
    RuntimeTrace,
    TraceFormatError,
    trace_from_json,
    traces_match,
)

BACKENDS = ("remote_browser", "fixture")
INJECTION_CONTEXTS = ("html_body", "attribute", "script")

ENDPOINT_ENV = "PAYLOADFORGE_BROWSER_URL"


class HarnessError(Exception):
    """A single evaluation failed; the batch may continue."""


class FixtureMissingError(HarnessError):
    def __init__(self, payload_digest: str):
        super().__init__(f"no fixture recorded for payload {payload_digest}")
        self.digest = payload_digest


class BackendUnavailable(Exception):
    """The configured backend cannot serve any evaluation at all."""


@dataclass(frozen=True)
class HarnessConfig:
    backend: str = "fixture"
    endpoint: str | None = None
    fixture_dir: str | None = None
    page_url: str | None = None
    injection_context: str = "html_body"
    timeout_ms: int = 3000
    settle_ms: int = 500

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend: {self.backend!r}")
        if self.injection_context not in INJECTION_CONTEXTS:
            raise ValueError(f"unknown injection context: {self.injection_context!r}")
        if not (self.timeout_ms > self.settle_ms > 0):
            raise ValueError("need timeout_ms > settle_ms > 0")

    def origin(self) -> str:
        if self.page_url:
            parts = urlsplit(self.page_url)
            if parts.scheme and parts.netloc:
                return f"{parts.scheme}://{parts.netloc}"
        return DEFAULT_ORIGIN


@dataclass(frozen=True)
class EvaluationRecord:
    payload_digest: str
    config: HarnessConfig
    trace: RuntimeTrace


def fixture_path(fixture_dir: str, payload: str) -> str:
    return os.path.join(fixture_dir, f"{digest(payload)}.trace.json")


def missing_fixtures(payloads: list[str], config: HarnessConfig) -> list[str]:
    """Digests of payloads with no fixture file, sorted, duplicates removed."""
    if config.backend != "fixture":
        return []
    if not config.fixture_dir or not os.path.isdir(config.fixture_dir):
        raise BackendUnavailable(f"fixture directory missing: {config.fixture_dir!r}")
    missing = {
        digest(p)
        for p in payloads
        if not os.path.isfile(fixture_path(config.fixture_dir, p))
    }
    return sorted(missing)


def _fixture_evaluate(payload: str, config: HarnessConfig) -> RuntimeTrace:
    if not config.fixture_dir or not os.path.isdir(config.fixture_dir):
        raise BackendUnavailable(f"fixture directory missing: {config.fixture_dir!r}")
    path = fixture_path(config.fixture_dir, payload)
    if not os.path.isfile(path):
        raise FixtureMissingError(digest(payload))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return trace_from_json(text)
    except TraceFormatError as exc:
        raise HarnessError(f"malformed fixture {digest(payload)}: {exc}") from None


# Script given to the automation protocol's async-execute channel.  The
# page's hook runs the payload and resolves with the trace JSON string; the
# protocol-appended callback is the last argument.
_RUN_SCRIPT = (
    "var cb = arguments[arguments.length - 1];"
    "var payload = arguments[0], context = arguments[1];"
    "var timeoutMs = arguments[2], settleMs = arguments[3];"
    "Promise.resolve(window.__harnessRun(payload, context, timeoutMs, settleMs))"
    ".then(cb, function (err) {"
    "cb(JSON.stringify({status:'crashed',duration_ms:0,"
    "events:[{kind:'error',message:String(err)}]}));"
    "});"
)


def _check(resp: requests.Response, what: str) -> dict:
    if resp.status_code // 100 != 2:
        raise HarnessError(f"{what} failed: HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError:
        raise HarnessError(f"{what} returned non-JSON body") from None


def _remote_evaluate(payload: str, config: HarnessConfig) -> RuntimeTrace:
    endpoint = config.endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise BackendUnavailable(
            f"no browser endpoint configured (set endpoint or {ENDPOINT_ENV})"
        )
    base = endpoint.rstrip("/")
    http_timeout = config.timeout_ms / 1000 + 30
    try:
        created = _check(
            requests.post(
                f"{base}/session",
                json={"capabilities": {"alwaysMatch": {}}},
                timeout=http_timeout,
            ),
            "session create",
        )
    except requests.RequestException as exc:
        raise BackendUnavailable(f"browser endpoint unreachable: {exc}") from None
    try:
        session_id = created["value"]["sessionId"]
    except (KeyError, TypeError):
        raise HarnessError("session create response missing value.sessionId") from None
    sess = f"{base}/session/{session_id}"
    try:
        _check(
            requests.post(
                f"{sess}/timeouts",
                json={"script": config.timeout_ms + 5000},
                timeout=http_timeout,
            ),
            "set timeouts",
        )
        _check(
            requests.post(
                f"{sess}/url",
                json={"url": config.page_url or "about:blank"},
                timeout=http_timeout,
            ),
            "navigate",
        )
        result = _check(
            requests.post(
                f"{sess}/execute/async",
                json={
                    "script": _RUN_SCRIPT,
                    "args": [
                        payload,
                        config.injection_context,
                        config.timeout_ms,
                        config.settle_ms,
                    ],
                },
                timeout=http_timeout,
            ),
            "execute",
        )
        raw = result.get("value")
        if not isinstance(raw, str):
            raise HarnessError(f"execute returned non-string trace: {raw!r}")
        try:
            return trace_from_json(raw)
        except TraceFormatError as exc:
            raise HarnessError(f"malformed trace from browser: {exc}") from None
    except requests.RequestException as exc:
        raise HarnessError(f"remote protocol failure: {exc}") from None
    finally:
        try:
            requests.delete(sess, timeout=http_timeout)
        except requests.RequestException:
            pass


def evaluate(payload: str, config: HarnessConfig) -> RuntimeTrace:
    """Run one payload and return its runtime trace."""
    if config.backend == "fixture":
        return _fixture_evaluate(payload, config)
    return _remote_evaluate(payload, config)


def evaluate_record(payload: str, config: HarnessConfig) -> EvaluationRecord:
    return EvaluationRecord(digest(payload), replace(config), evaluate(payload, config))


def evaluate_pair(
    original: str, candidate: str, config: HarnessConfig
) -> tuple[RuntimeTrace, RuntimeTrace, bool]:
    """Evaluate both payloads under one config snapshot and compare traces."""
    try:
        t0 = evaluate(original, config)
    except HarnessError as exc:
        raise HarnessError(f"original payload: {exc}") from exc
    try:
        t1 = evaluate(candidate, config)
    except HarnessError as exc:
        raise HarnessError(f"candidate payload: {exc}") from exc
    return t0, t1, traces_match(t0, t1, origin=config.origin())


def make_evaluator(config: HarnessConfig):
    """Bind a config into the single-argument evaluator used by validation."""

    def _eval(payload: str) -> RuntimeTrace:
        return evaluate(payload, config)

    return _eval
