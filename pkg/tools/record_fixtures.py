"""Record fixture traces for everything the mini pipeline evaluates.

Covers the malicious corpus, every chain endpoint produced by the mini
config's chain seed, and both stub generators' candidates.  Each trace is
written to data/fixtures/<sha256(payload)>.trace.json.  Rerunning is
idempotent; stale files for texts no longer produced are reported.

    python3 tools/record_fixtures.py
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.dirname(__file__))

from minibrowser import run_payload  # noqa: E402

from payloadforge.chains import generate_chains  # noqa: E402
from payloadforge.corpus import digest, ingest_csv, select_malicious  # noqa: E402
from payloadforge.genclient import GeneratorSpec, generate  # noqa: E402

CHAIN_SEED = 101
N_CHAINS = 40
ORACLE_SEED = 251
TIMEOUT_MS = 3000


def main() -> int:
    here = os.path.dirname(os.path.abspath(__file__))
    data = os.path.normpath(os.path.join(here, "..", "data"))
    fixture_dir = os.path.join(data, "fixtures")
    os.makedirs(fixture_dir, exist_ok=True)

    payloads, _ = ingest_csv(os.path.join(data, "mini_corpus.csv"))
    sources = select_malicious(payloads)

    texts: set[str] = {p.text for p in sources}
    for chain in generate_chains(sources, N_CHAINS, CHAIN_SEED):
        texts.add(chain.p0)
        texts.add(chain.p2)
    oracle = GeneratorSpec(kind="oracle_stub", seed=ORACLE_SEED)
    mangler = GeneratorSpec(kind="mangler_stub")
    for p in sources:
        texts.add(generate(oracle, p.text))
        texts.add(generate(mangler, p.text))

    wanted = set()
    for text in sorted(texts):
        name = f"{digest(text)}.trace.json"
        wanted.add(name)
        trace = run_payload(text, timeout_ms=TIMEOUT_MS)
        with open(os.path.join(fixture_dir, name), "w", encoding="utf-8") as fh:
            json.dump(trace, fh, separators=(",", ":"), ensure_ascii=False)
            fh.write("\n")
    print(f"recorded: {len(wanted)} fixtures for {len(texts)} texts")

    stale = sorted(set(os.listdir(fixture_dir)) - wanted)
    if stale:
        print("stale fixtures (not produced by this run):")
        for name in stale:
            print(" ", name)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
