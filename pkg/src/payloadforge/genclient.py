"""Generator abstraction and runtime match-rate evaluation.

A generator turns a source payload into a candidate obfuscation.  Three
kinds exist: an HTTP endpoint (external model), an oracle stub that
produces a known behavior-preserving rewrite through the chains module,
and a mangler stub that deliberately corrupts the payload.  The two stubs
bound the match-rate metric from both ends in tests.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import requests

from ._rng import SplitMix64, mix
from .chains import RECIPE_IDS, build_chain
from .corpus import Payload, digest
from .harness import HarnessConfig, HarnessError, evaluate_pair
from .trace import MatchReport, canonicalize, match_rate

GENERATOR_KINDS = ("http", "oracle_stub", "mangler_stub")

TOKEN_ENV = "PAYLOADFORGE_GEN_TOKEN"

_SOURCE_PLACEHOLDER = "{{SOURCE}}"


class GenerationError(Exception):
    def __init__(self, source_digest: str, message: str):
        super().__init__(f"generation failed for source {source_digest}: {message}")
        self.source_digest = source_digest


class EvaluationAborted(Exception):
    """Harness-level failure mid-run; partial outcomes are preserved."""

    def __init__(self, message: str, outcomes: list):
        super().__init__(message)
        self.outcomes = outcomes


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    endpoint: str | None = None
    request_template: str | None = None
    response_path: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind: {self.kind!r}")
        if self.kind == "http":
            if not self.endpoint:
                raise ValueError("http generator requires an endpoint")
            if not self.request_template or _SOURCE_PLACEHOLDER not in self.request_template:
                raise ValueError(
                    f"http generator template must contain {_SOURCE_PLACEHOLDER}"
                )
            if not self.response_path:
                raise ValueError("http generator requires a response_path")


@dataclass(frozen=True)
class GenerationOutcome:
    source_id: str
    candidate: str
    matched: bool
    detail: str
    error: str | None = field(default=None)

    def __post_init__(self) -> None:
        if self.matched and self.detail != "matched":
            raise ValueError("matched outcome must carry detail=matched")


def _resolve_pointer(doc, pointer: str):
    """Minimal JSON pointer walk: /a/0/b with ~0 and ~1 unescaping."""
    if pointer == "":
        return doc
    if not pointer.startswith("/"):
        raise KeyError(pointer)
    node = doc
    for raw in pointer[1:].split("/"):
        token = raw.replace("~1", "/").replace("~0", "~")
        if isinstance(node, dict):
            node = node[token]
        elif isinstance(node, list):
            node = node[int(token)]
        else:
            raise KeyError(pointer)
    return node


def _http_generate(spec: GeneratorSpec, source: str) -> str:
    src_digest = digest(source)
    escaped = json.dumps(source, ensure_ascii=False)[1:-1]
    body = spec.request_template.replace(_SOURCE_PLACEHOLDER, escaped)
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    try:
        resp = requests.post(spec.endpoint, data=body.encode("utf-8"), headers=headers, timeout=60)
    except requests.RequestException as exc:
        raise GenerationError(src_digest, f"request failed: {exc}") from None
    if resp.status_code // 100 != 2:
        raise GenerationError(src_digest, f"HTTP {resp.status_code}")
    try:
        doc = resp.json()
    except ValueError:
        raise GenerationError(src_digest, "response is not JSON") from None
    try:
        candidate = _resolve_pointer(doc, spec.response_path)
    except (KeyError, IndexError, ValueError):
        raise GenerationError(
            src_digest, f"response_path {spec.response_path!r} not found"
        ) from None
    if not isinstance(candidate, str):
        raise GenerationError(src_digest, "candidate at response_path is not a string")
    return candidate


def _oracle_generate(spec: GeneratorSpec, source: str) -> str:
    if not source:
        return source
    h = int(digest(source)[:16], 16)
    recipe = RECIPE_IDS[(h + spec.seed) % len(RECIPE_IDS)]
    chain = build_chain(Payload.make(source, "malicious"), recipe, mix(spec.seed, h))
    return chain.p2


def _mangle(source: str) -> str:
    """Drop every 7th character: a guaranteed behavior-breaking control."""
    return "".join(ch for i, ch in enumerate(source) if (i + 1) % 7 != 0)


def generate(spec: GeneratorSpec, source: str) -> str:
    """Produce one candidate obfuscation of source."""
    if spec.kind == "http":
        return _http_generate(spec, source)
    if spec.kind == "oracle_stub":
        return _oracle_generate(spec, source)
    return _mangle(source)


def evaluate_generator(
    spec: GeneratorSpec,
    sources: list[Payload],
    n: int,
    harness: HarnessConfig,
    seed: int,
) -> tuple[MatchReport, list[GenerationOutcome]]:
    """Sample n sources, generate one candidate each, compare runtime traces.

    Generation errors count as non-matched outcomes; harness-level failures
    abort with the outcomes gathered so far attached to the exception.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sources:
        raise ValueError("sources must be non-empty")
    rng = SplitMix64(seed)
    if n <= len(sources):
        idxs = rng.sample(list(range(len(sources))), n)
    else:
        idxs = [rng.below(len(sources)) for _ in range(n)]
    idxs.sort()
    outcomes: list[GenerationOutcome] = []
    for i in idxs:
        source = sources[i]
        try:
            candidate = generate(spec, source.text)
        except GenerationError as exc:
            outcomes.append(
                GenerationOutcome(source.id, "", False, "harness_error", str(exc))
            )
            continue
        try:
            t0, _, matched = evaluate_pair(source.text, candidate, harness)
        except HarnessError as exc:
            raise EvaluationAborted(str(exc), outcomes) from exc
        if matched:
            detail = "matched"
        elif not canonicalize(t0, harness.origin()).events:
            detail = "inconclusive"
        else:
            detail = "non_matched"
        outcomes.append(GenerationOutcome(source.id, candidate, matched, detail))
    report = match_rate([o.matched for o in outcomes])
    return report, outcomes


def outcome_to_json(outcome: GenerationOutcome) -> str:
    obj = {
        "source_id": outcome.source_id,
        "candidate": outcome.candidate,
        "matched": outcome.matched,
        "detail": outcome.detail,
    }
    if outcome.error is not None:
        obj["error"] = outcome.error
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def write_outcomes(outcomes: list[GenerationOutcome], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for outcome in outcomes:
            fh.write(outcome_to_json(outcome))
            fh.write("\n")
