"""Labeled payload corpus: CSV ingest, class stats, deterministic subsetting.

The corpus is the atomic input of every stage.  Payloads are identified by
the SHA-256 digest of their UTF-8 text, which doubles as the fixture-file
key in the validation harness, so digest stability matters more than speed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from dataclasses import dataclass

LABELS = ("malicious", "benign")


def digest(text: str) -> str:
    """Lowercase SHA-256 hex of the UTF-8 encoding of text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CorpusError(ValueError):
    """Raised for malformed corpus files; message names the offending line."""


@dataclass(frozen=True)
class Payload:
    id: str
    text: str
    label: str

    @classmethod
    def make(cls, text: str, label: str) -> "Payload":
        if not text:
            raise ValueError("payload text must be non-empty")
        if label not in LABELS:
            raise ValueError(f"unknown label: {label!r}")
        return cls(id=digest(text), text=text, label=label)


@dataclass(frozen=True)
class CorpusStats:
    total: int
    benign: int
    malicious: int

    def __post_init__(self) -> None:
        if self.total != self.benign + self.malicious:
            raise ValueError("total must equal benign + malicious")


def corpus_stats(payloads: list[Payload]) -> CorpusStats:
    malicious = sum(1 for p in payloads if p.label == "malicious")
    return CorpusStats(
        total=len(payloads), benign=len(payloads) - malicious, malicious=malicious
    )


def ingest_csv(path: str | os.PathLike, dedupe: bool = False) -> tuple[list[Payload], CorpusStats]:
    """Read a `payload,label` CSV into payloads, in file order.

    RFC-4180 quoting, so payload text may embed commas, quotes, and
    newlines.  Labels are case-insensitive.  With dedupe set, later rows
    whose text digest repeats an earlier one are dropped.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        decoded = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: not valid UTF-8 ({exc})") from None

    reader = csv.reader(io.StringIO(decoded, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError(f"{path}: missing header row") from None
    if [h.strip().lower() for h in header] != ["payload", "label"]:
        raise CorpusError(f"{path}: expected header 'payload,label', got {header!r}")

    payloads: list[Payload] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 2:
            raise CorpusError(f"{path}:{line}: expected 2 fields, got {len(row)}")
        text, label = row
        if not text:
            raise CorpusError(f"{path}:{line}: empty payload field")
        label = label.strip().lower()
        if label not in LABELS:
            raise CorpusError(f"{path}:{line}: unknown label {row[1]!r}")
        payload = Payload.make(text, label)
        if dedupe:
            if payload.id in seen:
                continue
            seen.add(payload.id)
        payloads.append(payload)
    return payloads, corpus_stats(payloads)


def write_csv(payloads: list[Payload], path: str | os.PathLike) -> None:
    """Inverse of ingest_csv: re-ingesting the output yields equal payloads."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(["payload", "label"])
        for p in payloads:
            writer.writerow([p.text, p.label])


def select_malicious(payloads: list[Payload]) -> list[Payload]:
    """Payloads labeled malicious, original order preserved."""
    return [p for p in payloads if p.label == "malicious"]
