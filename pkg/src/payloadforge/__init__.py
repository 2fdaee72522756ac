"""payloadforge: obfuscated XSS payload pipeline.

Submodules:
    corpus     labeled payload ingest, stats, subsetting
    transforms span scanner and the six seeded obfuscation transforms
    chains     two-step recipes, behavior filtering, pair export
    trace      runtime trace model, canonicalization, match rate
    harness    fixture-replay and remote-browser execution backends
    genclient  generator abstraction (HTTP + stubs) and evaluation
    detector   char n-gram TF-IDF + random forest downstream classifier
    cli        end-to-end subcommands over a single JSON config
"""

__version__ = "0.1.0"
