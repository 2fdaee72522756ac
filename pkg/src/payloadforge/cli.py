"""Pipeline CLI: gen-chains, validate, export-pairs, eval-generator,
train-detector.

One JSON config file drives everything; every seed is explicit in the
resolved config, which is echoed into the output directory so any artifact
can be regenerated from the config alone.  Relative paths in the config
resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction

from . import chains as chains_mod
from . import corpus as corpus_mod
from . import detector as detector_mod
from . import genclient as genclient_mod
from . import harness as harness_mod
from .trace import format_percent, match_rate, relative_improvement

DEFAULT_SEEDS = {"chain": 1, "sample": 2, "split": 3, "forest": 4, "generator": 5}

CHAINS_FILE = "chains.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
SUMMARY_FILE = "validate_summary.txt"
PAIRS_FILE = "pairs.jsonl"
METRICS_FILE = "detector_metrics.csv"
RESOLVED_CONFIG_FILE = "config.resolved.json"


class CliError(Exception):
    pass


@dataclass
class DetectorSettings:
    max_features: int | None
    trees: int
    test_fraction: float
    generated_all: str | None
    generated_valid: str | None


@dataclass
class RunConfig:
    corpus: str
    dedupe: bool
    out: str
    n_chains: int
    validation_sample: int
    eval_n: int
    inconclusive_as_non_matched: bool
    seeds: dict[str, int]
    harness: harness_mod.HarnessConfig
    generators: dict[str, genclient_mod.GeneratorSpec]
    detector: DetectorSettings


def _resolve_path(base_dir: str, path: str | None) -> str | None:
    if path is None:
        return None
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))

    corpus = raw.get("corpus")
    if not corpus:
        raise CliError("config must set 'corpus'")
    seeds = dict(DEFAULT_SEEDS)
    seeds.update(raw.get("seeds", {}))
    unknown = set(seeds) - set(DEFAULT_SEEDS)
    if unknown:
        raise CliError(f"unknown seed names: {sorted(unknown)}")

    hraw = dict(raw.get("harness", {}))
    hraw["fixture_dir"] = _resolve_path(base, hraw.get("fixture_dir"))
    try:
        hconfig = harness_mod.HarnessConfig(**hraw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad harness config: {exc}") from None

    generators: dict[str, genclient_mod.GeneratorSpec] = {}
    for name, graw in raw.get("generators", {}).items():
        try:
            generators[name] = genclient_mod.GeneratorSpec(**graw)
        except (TypeError, ValueError) as exc:
            raise CliError(f"bad generator {name!r}: {exc}") from None

    draw = raw.get("detector", {})
    det = DetectorSettings(
        max_features=draw.get("max_features"),
        trees=int(draw.get("trees", 100)),
        test_fraction=float(draw.get("test_fraction", 0.2)),
        generated_all=_resolve_path(base, draw.get("generated_all")),
        generated_valid=_resolve_path(base, draw.get("generated_valid")),
    )

    return RunConfig(
        corpus=_resolve_path(base, corpus),
        dedupe=bool(raw.get("dedupe", False)),
        out=_resolve_path(base, raw.get("out", "out")),
        n_chains=int(raw.get("n_chains", 1000)),
        validation_sample=int(raw.get("validation_sample", 200)),
        eval_n=int(raw.get("eval_n", 100)),
        inconclusive_as_non_matched=bool(raw.get("inconclusive_as_non_matched", False)),
        seeds=seeds,
        harness=hconfig,
        generators=generators,
        detector=det,
    )


def _echo_resolved(config: RunConfig) -> None:
    os.makedirs(config.out, exist_ok=True)
    resolved = {
        "corpus": config.corpus,
        "dedupe": config.dedupe,
        "out": config.out,
        "n_chains": config.n_chains,
        "validation_sample": config.validation_sample,
        "eval_n": config.eval_n,
        "inconclusive_as_non_matched": config.inconclusive_as_non_matched,
        "seeds": config.seeds,
        "harness": {
            "backend": config.harness.backend,
            "endpoint": config.harness.endpoint,
            "fixture_dir": config.harness.fixture_dir,
            "page_url": config.harness.page_url,
            "injection_context": config.harness.injection_context,
            "timeout_ms": config.harness.timeout_ms,
            "settle_ms": config.harness.settle_ms,
        },
        "generators": {
            name: {
                "kind": g.kind,
                "endpoint": g.endpoint,
                "request_template": g.request_template,
                "response_path": g.response_path,
                "seed": g.seed,
            }
            for name, g in config.generators.items()
        },
        "detector": {
            "max_features": config.detector.max_features,
            "trees": config.detector.trees,
            "test_fraction": config.detector.test_fraction,
            "generated_all": config.detector.generated_all,
            "generated_valid": config.detector.generated_valid,
        },
    }
    out_path = os.path.join(config.out, RESOLVED_CONFIG_FILE)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _load_corpus(config: RunConfig):
    payloads, stats = corpus_mod.ingest_csv(config.corpus, dedupe=config.dedupe)
    print(f"corpus: total={stats.total} benign={stats.benign} malicious={stats.malicious}")
    return payloads


def cmd_gen_chains(config: RunConfig, args: argparse.Namespace) -> int:
    payloads = _load_corpus(config)
    sources = corpus_mod.select_malicious(payloads)
    n = args.n if args.n is not None else config.n_chains
    generated = chains_mod.generate_chains(sources, n, config.seeds["chain"])
    out_path = os.path.join(config.out, CHAINS_FILE)
    chains_mod.write_chains(generated, out_path)
    print(f"chains: {len(generated)}")
    print(f"wrote: {out_path}")
    return 0


def format_validation_summary(verdicts) -> str:
    counts = Counter(v.status for v in verdicts)
    matched = counts.get("matched", 0)
    non_matched = counts.get("non_matched", 0)
    decisive = matched + non_matched
    lines = [
        f"validated: {len(verdicts)}",
        f"matched: {matched}",
        f"non_matched: {non_matched}",
        f"inconclusive: {counts.get('inconclusive', 0)}",
        f"harness_error: {counts.get('harness_error', 0)}",
    ]
    if decisive:
        rate = Fraction(matched, decisive)
        lines.append(f"rate: {float(rate) * 100:.2f}%")
    else:
        lines.append("rate: n/a")
    lines.append("recipe examples valid rate")
    for row in chains_mod.aggregate_by_recipe(verdicts):
        lines.append(f"{row.recipe} {row.examples} {row.valid} {row.rate:.3f}")
    return "\n".join(lines) + "\n"


def cmd_validate(config: RunConfig, args: argparse.Namespace) -> int:
    chain_path = os.path.join(config.out, CHAINS_FILE)
    if not os.path.isfile(chain_path):
        raise CliError(f"chain archive missing: {chain_path} (run gen-chains first)")
    all_chains = chains_mod.read_chains(chain_path)
    k = args.k if args.k is not None else min(config.validation_sample, len(all_chains))
    sampled = chains_mod.sample_for_validation(all_chains, k, config.seeds["sample"])

    texts = [t for c in sampled for t in (c.p0, c.p2)]
    missing = harness_mod.missing_fixtures(texts, config.harness)
    if missing:
        print("missing fixtures:", file=sys.stderr)
        for d in missing:
            print(f"  {d}", file=sys.stderr)
        return 1

    verdicts = chains_mod.validate_chains(
        sampled,
        harness_mod.make_evaluator(config.harness),
        origin=config.harness.origin(),
        inconclusive_as_non_matched=config.inconclusive_as_non_matched,
    )
    chains_mod.write_verdicts(verdicts, os.path.join(config.out, VERDICTS_FILE))
    summary = format_validation_summary(verdicts)
    with open(
        os.path.join(config.out, SUMMARY_FILE), "w", encoding="utf-8", newline="\n"
    ) as fh:
        fh.write(summary)
    print(summary, end="")
    return 0


def cmd_export_pairs(config: RunConfig, args: argparse.Namespace) -> int:
    verdict_path = os.path.join(config.out, VERDICTS_FILE)
    if not os.path.isfile(verdict_path):
        raise CliError(f"verdict file missing: {verdict_path} (run validate first)")
    verdicts = chains_mod.read_verdicts(verdict_path)
    out_path = os.path.join(config.out, PAIRS_FILE)
    count = chains_mod.export_pairs(verdicts, out_path)
    print(f"pairs: {count}")
    print(f"wrote: {out_path}")
    return 0


def cmd_eval_generator(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.generators:
        raise CliError("no generators configured")
    if args.generator is not None:
        if args.generator not in config.generators:
            raise CliError(f"unknown generator: {args.generator!r}")
        names = [args.generator]
    else:
        names = list(config.generators)
    payloads = _load_corpus(config)
    sources = corpus_mod.select_malicious(payloads)
    n = args.n if args.n is not None else min(config.eval_n, len(sources))
    reports = []
    for name in names:
        spec = config.generators[name]
        try:
            report, outcomes = genclient_mod.evaluate_generator(
                spec, sources, n, config.harness, config.seeds["generator"]
            )
        except genclient_mod.EvaluationAborted as exc:
            genclient_mod.write_outcomes(
                exc.outcomes, os.path.join(config.out, f"outcomes_{name}.jsonl")
            )
            print(f"evaluation aborted for {name}: {exc}", file=sys.stderr)
            return 1
        genclient_mod.write_outcomes(
            outcomes, os.path.join(config.out, f"outcomes_{name}.jsonl")
        )
        print(f"{name}, {report.n_generated}, {report.n_matched}, {float(report.rate):.2f}")
        reports.append(report)
    if len(reports) == 2:
        if reports[0].rate > 0:
            print(f"relative improvement {format_percent(relative_improvement(reports[0], reports[1]))}")
        else:
            print("relative improvement n/a (zero baseline)")
    return 0


def _generated_texts(path: str, valid_only: bool) -> list[str]:
    texts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "p2" in obj:
                texts.append(obj["p2"])
            elif "target" in obj:
                texts.append(obj["target"])
            elif "candidate" in obj:
                if valid_only and not obj.get("matched", False):
                    continue
                if obj["candidate"]:
                    texts.append(obj["candidate"])
            else:
                raise CliError(f"{path}: unrecognized generated-set record")
    return texts


def cmd_train_detector(config: RunConfig, args: argparse.Namespace) -> int:
    payloads = _load_corpus(config)
    det = config.detector
    generated_all = _generated_texts(det.generated_all, False) if det.generated_all else []
    generated_valid = (
        _generated_texts(det.generated_valid, True) if det.generated_valid else []
    )
    rows = detector_mod.run_conditions(
        payloads,
        generated_all,
        generated_valid,
        detector_mod.VectorizerConfig(max_features=det.max_features),
        detector_mod.SplitConfig(det.test_fraction, seed=config.seeds["split"]),
        detector_mod.ForestConfig(trees=det.trees, seed=config.seeds["forest"]),
    )
    out_path = os.path.join(config.out, METRICS_FILE)
    detector_mod.write_metrics_csv(rows, out_path)
    with open(out_path, encoding="utf-8") as fh:
        print(fh.read(), end="")
    return 0


def _add_harness_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=harness_mod.BACKENDS)
    parser.add_argument("--fixtures", metavar="DIR", help="fixture directory")
    parser.add_argument("--timeout-ms", type=int)
    parser.add_argument("--settle-ms", type=int)
    parser.add_argument("--context", choices=harness_mod.INJECTION_CONTEXTS)


def _apply_harness_flags(config: RunConfig, args: argparse.Namespace) -> None:
    updates = {}
    if getattr(args, "backend", None):
        updates["backend"] = args.backend
    if getattr(args, "fixtures", None):
        updates["fixture_dir"] = os.path.abspath(args.fixtures)
    if getattr(args, "timeout_ms", None):
        updates["timeout_ms"] = args.timeout_ms
    if getattr(args, "settle_ms", None):
        updates["settle_ms"] = args.settle_ms
    if getattr(args, "context", None):
        updates["injection_context"] = args.context
    if updates:
        config.harness = replace(config.harness, **updates)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="payloadforge",
        description="Obfuscated payload pipeline: chains, validation, pairs, "
        "generator evaluation, detector training",
    )
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument(
        "--jobs", type=int, default=1, help="max parallel evaluations (bound only)"
    )
    for seed_name in DEFAULT_SEEDS:
        parser.add_argument(f"--seed-{seed_name}", type=int, metavar="U64")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-chains", help="build the chain archive")
    p.add_argument("--n", type=int, help="number of chains")
    p.set_defaults(func=cmd_gen_chains)

    p = sub.add_parser("validate", help="runtime-validate a chain sample")
    p.add_argument("--k", type=int, help="validation sample size")
    _add_harness_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-pairs", help="export behavior-filtered pairs")
    p.set_defaults(func=cmd_export_pairs)

    p = sub.add_parser("eval-generator", help="evaluate generator match rate")
    p.add_argument("--generator", help="generator name from the config")
    p.add_argument("--n", type=int, help="number of sources to evaluate")
    _add_harness_flags(p)
    p.set_defaults(func=cmd_eval_generator)

    p = sub.add_parser("train-detector", help="run the three training conditions")
    p.set_defaults(func=cmd_train_detector)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.out:
            config.out = os.path.abspath(args.out)
        for seed_name in DEFAULT_SEEDS:
            override = getattr(args, f"seed_{seed_name}")
            if override is not None:
                config.seeds[seed_name] = override
        _apply_harness_flags(config, args)
        _echo_resolved(config)
        return args.func(config, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        corpus_mod.CorpusError,
        harness_mod.BackendUnavailable,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
