"""Two-step obfuscation chains: build, sample, validate, aggregate, export.

A chain rewrites a malicious source payload P0 into P1 and then P2 using
one of five fixed transform recipes.  Chains whose P2 behaves like P0
under the runtime harness become training pairs; the rest are discarded.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable

from ._rng import SplitMix64, mix
from .corpus import Payload
from .harness import HarnessError
from .trace import DEFAULT_ORIGIN, RuntimeTrace, canonicalize
from .transforms import TransformStep, apply

RECIPES: dict[str, tuple[str, str]] = {
    "R1": ("hex_escape", "split_strings"),
    "R2": ("comment_insertion", "hex_escape"),
    "R3": ("split_strings", "comment_insertion"),
    "R4": ("case_swap", "split_strings"),
    "R5": ("comment_insertion", "case_swap"),
}

RECIPE_IDS = tuple(sorted(RECIPES))

VERDICT_STATUSES = ("matched", "non_matched", "inconclusive", "harness_error")


@dataclass(frozen=True)
class ObfuscationChain:
    source_id: str
    p0: str
    p1: str
    p2: str
    recipe: str
    seed: int
    steps: tuple[TransformStep, TransformStep]


@dataclass(frozen=True)
class ValidationVerdict:
    """Outcome of comparing one chain's P0 and P2 runtime traces.  The trace
    fields are digests of the canonical traces ("" when evaluation failed)."""

    chain: ObfuscationChain
    status: str
    original_trace: str
    obfuscated_trace: str


def build_chain(payload: Payload, recipe: str, seed: int) -> ObfuscationChain:
    """Apply the recipe's two transforms with per-step seeds mix(seed, i)."""
    if payload.label != "malicious":
        raise ValueError("chains are built from malicious sources only")
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe: {recipe!r}")
    name0, name1 = RECIPES[recipe]
    p1, step0 = apply(name0, payload.text, mix(seed, 0))
    p2, step1 = apply(name1, p1, mix(seed, 1))
    return ObfuscationChain(
        source_id=payload.id,
        p0=payload.text,
        p1=p1,
        p2=p2,
        recipe=recipe,
        seed=seed,
        steps=(step0, step1),
    )


def generate_chains(sources: list[Payload], n: int, seed: int) -> list[ObfuscationChain]:
    """n chains with source and recipe drawn uniformly (with replacement)
    from sources x recipes; chain k gets seed mix(seed, k)."""
    if not sources:
        raise ValueError("sources must be non-empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = SplitMix64(seed)
    chains = []
    for k in range(n):
        source = sources[rng.below(len(sources))]
        recipe = RECIPE_IDS[rng.below(len(RECIPE_IDS))]
        chains.append(build_chain(source, recipe, mix(seed, k)))
    return chains


def sample_for_validation(
    chains: list[ObfuscationChain], k: int, seed: int
) -> list[ObfuscationChain]:
    """Seeded uniform sample without replacement, original order preserved."""
    if k > len(chains):
        raise ValueError(f"sample size {k} exceeds population {len(chains)}")
    if k == 0:
        return []
    rng = SplitMix64(seed)
    idxs = rng.sample(list(range(len(chains))), k)
    idxs.sort()
    return [chains[i] for i in idxs]


def _trace_digest(trace: RuntimeTrace, origin: str) -> str:
    canon = canonicalize(trace, origin)
    blob = json.dumps(
        {"status": canon.status, "events": [list(e) for e in canon.events]},
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def validate_chains(
    chains: list[ObfuscationChain],
    evaluate: Callable[[str], RuntimeTrace],
    origin: str = DEFAULT_ORIGIN,
    inconclusive_as_non_matched: bool = False,
    harness_error_type: type[Exception] = HarnessError,
) -> list[ValidationVerdict]:
    """Evaluate each chain's P0 and P2 under the same evaluator and compare.

    Per-chain evaluation failures of harness_error_type become status
    harness_error instead of aborting the batch.  Chains whose original
    trace is event-free are inconclusive (there is no behavior to match)
    unless the reclassification flag demotes them to non_matched.
    """
    verdicts = []
    for chain in chains:
        try:
            t0 = evaluate(chain.p0)
            t2 = evaluate(chain.p2)
        except harness_error_type:
            verdicts.append(ValidationVerdict(chain, "harness_error", "", ""))
            continue
        c0 = canonicalize(t0, origin)
        d0 = _trace_digest(t0, origin)
        d2 = _trace_digest(t2, origin)
        if not c0.events:
            status = "non_matched" if inconclusive_as_non_matched else "inconclusive"
        elif t0.status == t2.status and d0 == d2:
            status = "matched"
        else:
            status = "non_matched"
        verdicts.append(ValidationVerdict(chain, status, d0, d2))
    return verdicts


@dataclass(frozen=True)
class RecipeRow:
    recipe: str
    examples: int
    valid: int
    rate: float


def aggregate_by_recipe(verdicts: list[ValidationVerdict]) -> list[RecipeRow]:
    """Per-recipe (examples, valid, rate) over decisive verdicts only, rate
    rounded to 3 decimals, rows sorted by rate descending."""
    counts: dict[str, list[int]] = {}
    for v in verdicts:
        if v.status not in ("matched", "non_matched"):
            continue
        row = counts.setdefault(v.chain.recipe, [0, 0])
        row[0] += 1
        if v.status == "matched":
            row[1] += 1
    rows = [
        RecipeRow(recipe, examples, valid, round(valid / examples, 3))
        for recipe, (examples, valid) in counts.items()
    ]
    rows.sort(key=lambda r: (-(r.valid / r.examples), r.recipe))
    return rows


def export_pairs(verdicts: list[ValidationVerdict], out: str | os.PathLike) -> int:
    """Write matched chains as {"source","target","recipe","seed","source_id"}
    JSONL; returns the record count."""
    count = 0
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for v in verdicts:
            if v.status != "matched":
                continue
            record = {
                "source": v.chain.p0,
                "target": v.chain.p2,
                "recipe": v.chain.recipe,
                "seed": v.chain.seed,
                "source_id": v.chain.source_id,
            }
            fh.write(json.dumps(record, separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def _step_to_obj(step: TransformStep) -> dict:
    return {
        "name": step.name,
        "seed": step.seed,
        "applied": step.applied,
        "input_digest": step.input_digest,
        "output_digest": step.output_digest,
    }


def chain_to_json(chain: ObfuscationChain) -> str:
    obj = {
        "source_id": chain.source_id,
        "p0": chain.p0,
        "p1": chain.p1,
        "p2": chain.p2,
        "recipe": chain.recipe,
        "seed": chain.seed,
        "steps": [_step_to_obj(s) for s in chain.steps],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def chain_from_json(text: str) -> ObfuscationChain:
    obj = json.loads(text)
    steps = tuple(
        TransformStep(
            name=s["name"],
            seed=s["seed"],
            applied=s["applied"],
            input_digest=s["input_digest"],
            output_digest=s["output_digest"],
        )
        for s in obj["steps"]
    )
    if len(steps) != 2:
        raise ValueError("chain must have exactly 2 steps")
    return ObfuscationChain(
        source_id=obj["source_id"],
        p0=obj["p0"],
        p1=obj["p1"],
        p2=obj["p2"],
        recipe=obj["recipe"],
        seed=obj["seed"],
        steps=steps,
    )


def write_chains(chains: list[ObfuscationChain], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for chain in chains:
            fh.write(chain_to_json(chain))
            fh.write("\n")


def read_chains(path: str | os.PathLike) -> list[ObfuscationChain]:
    chains = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                chains.append(chain_from_json(line))
    return chains


def verdict_to_json(verdict: ValidationVerdict) -> str:
    obj = {
        "status": verdict.status,
        "original_trace": verdict.original_trace,
        "obfuscated_trace": verdict.obfuscated_trace,
        "chain": json.loads(chain_to_json(verdict.chain)),
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def verdict_from_json(text: str) -> ValidationVerdict:
    obj = json.loads(text)
    if obj["status"] not in VERDICT_STATUSES:
        raise ValueError(f"unknown verdict status: {obj['status']!r}")
    return ValidationVerdict(
        chain=chain_from_json(json.dumps(obj["chain"])),
        status=obj["status"],
        original_trace=obj["original_trace"],
        obfuscated_trace=obj["obfuscated_trace"],
    )


def write_verdicts(verdicts: list[ValidationVerdict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for verdict in verdicts:
            fh.write(verdict_to_json(verdict))
            fh.write("\n")


def read_verdicts(path: str | os.PathLike) -> list[ValidationVerdict]:
    verdicts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                verdicts.append(verdict_from_json(line))
    return verdicts
