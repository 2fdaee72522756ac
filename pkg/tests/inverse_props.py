"""Independent inverse checks for the six transforms.

Each checker re-derives the transform's effect with stdlib decoders
(base64, urllib) or a locally written JS-string decoder, never with the
package's own internals, and asserts the structural inverse property.
Shared by the unit suite and the acceptance suite.
"""

from __future__ import annotations

import base64
import re
from urllib.parse import unquote

from payloadforge.transforms import (
    TokenSpan,
    base64_eval,
    case_swap,
    comment_insertion,
    hex_escape,
    scan,
    scan_regions,
    split_strings,
    url_encode,
)

_SIMPLE = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "v": "\v", "0": "\0"}
_HEXCHARS = set("0123456789abcdefABCDEF")


def js_string_value(body: str) -> str:
    """Decode a JS string-literal body to its runtime value, combining
    surrogate pairs the way a JS engine's UTF-16 strings do."""
    units: list[int] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\" or i + 1 >= len(body):
            units.extend(_utf16(c))
            i += 1
            continue
        e = body[i + 1]
        if e == "x" and i + 3 < len(body) and all(ch in _HEXCHARS for ch in body[i + 2 : i + 4]):
            units.append(int(body[i + 2 : i + 4], 16))
            i += 4
        elif e == "u" and i + 2 < len(body) and body[i + 2] == "{":
            close = body.find("}", i + 3)
            inner = body[i + 3 : close] if close != -1 else ""
            if (
                close != -1
                and inner
                and all(ch in _HEXCHARS for ch in inner)
                and int(inner, 16) <= 0x10FFFF
            ):
                units.extend(_utf16(chr(int(inner, 16))))
                i = close + 1
            else:
                # malformed code-point escape: the backslash stays literal
                units.append(ord("\\"))
                i += 1
        elif e == "u" and i + 5 < len(body) and all(ch in _HEXCHARS for ch in body[i + 2 : i + 6]):
            units.append(int(body[i + 2 : i + 6], 16))
            i += 6
        elif e in _SIMPLE:
            units.extend(_utf16(_SIMPLE[e]))
            i += 2
        elif e in ("\n", "\r"):
            i += 2
        else:
            units.extend(_utf16(e))
            i += 2
    return _from_utf16(units)


def _utf16(ch: str) -> list[int]:
    o = ord(ch)
    if o > 0xFFFF:
        v = o - 0x10000
        return [0xD800 + (v >> 10), 0xDC00 + (v & 0x3FF)]
    return [o]


def _from_utf16(units: list[int]) -> str:
    out: list[str] = []
    i = 0
    while i < len(units):
        u = units[i]
        if 0xD800 <= u <= 0xDBFF and i + 1 < len(units) and 0xDC00 <= units[i + 1] <= 0xDFFF:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[i + 1] - 0xDC00)))
            i += 2
        else:
            out.append(chr(u))
            i += 1
    return "".join(out)


def _literals(text: str) -> list[TokenSpan]:
    return [s for s in scan(text) if s.kind == "js_string_literal"]


def _blank_literal_bodies(text: str) -> str:
    parts = []
    pos = 0
    for s in _literals(text):
        parts.append(text[pos : s.start + 1])
        pos = s.end - 1
    parts.append(text[pos:])
    return "".join(parts)


def check_hex_escape(payload: str, seed: int) -> None:
    """Unescaping every output literal reproduces the input literal values;
    everything outside literal bodies is untouched."""
    out, step = hex_escape(payload, seed)
    lits_in = _literals(payload)
    lits_out = _literals(out)
    assert step.applied == bool(lits_in)
    if not lits_in:
        assert out == payload
        return
    assert len(lits_out) == len(lits_in)
    for a, b in zip(lits_in, lits_out):
        assert js_string_value(out[b.start + 1 : b.end - 1]) == js_string_value(
            payload[a.start + 1 : a.end - 1]
        )
    assert _blank_literal_bodies(out) == _blank_literal_bodies(payload)


_ATOB = re.compile(r"eval\(atob\((['\"])([A-Za-z0-9+/=]*)\1\)\)")


def check_base64_eval(payload: str, seed: int) -> None:
    """Decoding each eval(atob(...)) argument reproduces the replaced body."""
    out, step = base64_eval(payload, seed)
    _, regions = scan_regions(payload)
    assert step.applied == bool(regions)
    if not regions:
        assert out == payload
        return
    decoded = [
        base64.b64decode(m.group(2)).decode("utf-8") for m in _ATOB.finditer(out)
    ]
    bodies = [payload[r.start : r.end] for r in regions]
    # every replaced body must reappear; payload text may add extra matches
    assert len(decoded) >= len(bodies)
    for body in bodies:
        assert body in decoded
        decoded.remove(body)


def check_url_encode(payload: str, seed: int) -> None:
    """Percent-decoding the rewritten javascript: values reproduces the input."""
    out, step = url_encode(payload, seed)
    vals_in = [
        payload[s.start : s.end]
        for s in scan(payload)
        if s.kind == "attr_value" and payload[s.start : s.end].lower().startswith("javascript:")
    ]
    assert step.applied == bool(vals_in)
    if not vals_in:
        assert out == payload
        return
    vals_out = [
        out[s.start : s.end]
        for s in scan(out)
        if s.kind == "attr_value" and out[s.start : s.end].lower().startswith("javascript:")
    ]
    assert len(vals_out) == len(vals_in)
    for a, b in zip(vals_in, vals_out):
        assert unquote(b) == a
        tail = b[len("javascript:") :]
        assert not any(c in tail for c in " <>\"'(){};"), tail


def check_split_strings(payload: str, seed: int) -> None:
    """Concatenating the split halves reproduces each original literal.

    Checked at the text level, not by rescanning the output: a split that
    lands inside an escape sequence leaves the output unlexable on purpose
    (that is the behavior-breaking failure mode validation catches)."""
    out, step = split_strings(payload, seed)
    lits_in = _literals(payload)
    eligible = [s for s in lits_in if s.end - s.start - 2 >= 2]
    assert step.applied == bool(eligible)
    if not eligible:
        assert out == payload
        return
    in_pos = 0
    out_pos = 0
    for s in lits_in:
        gap = payload[in_pos : s.start]
        assert out[out_pos : out_pos + len(gap)] == gap
        out_pos += len(gap)
        q = payload[s.start]
        body = payload[s.start + 1 : s.end - 1]
        if len(body) >= 2:
            segment = out[out_pos : out_pos + len(body) + 5]
            assert any(
                segment == f"{q}{body[:pos]}{q}+{q}{body[pos:]}{q}"
                for pos in range(1, len(body))
            ), segment
            out_pos += len(body) + 5
        else:
            lit = payload[s.start : s.end]
            assert out[out_pos : out_pos + len(lit)] == lit
            out_pos += len(lit)
        in_pos = s.end
    assert out[out_pos:] == payload[in_pos:]


def _token_stream(text: str) -> list[tuple[str, str]]:
    return [
        (s.kind, text[s.start : s.end]) for s in scan(text) if s.kind != "js_code"
    ]


def check_comment_insertion(payload: str, seed: int) -> None:
    """Dropping the inserted comments leaves the token stream unchanged."""
    out, step = comment_insertion(payload, seed)
    if not step.applied:
        assert out == payload
        return
    assert out != payload
    assert out.replace("/**/", "") == payload.replace("/**/", "")
    assert _token_stream(out) == _token_stream(payload)


def _lower_names(text: str) -> str:
    parts = []
    pos = 0
    for s in scan(text):
        if s.kind in ("tag_name", "attr_name"):
            parts.append(text[pos : s.start])
            parts.append(text[s.start : s.end].lower())
            pos = s.end
    parts.append(text[pos:])
    return "".join(parts)


def check_case_swap(payload: str, seed: int) -> None:
    """Lowercasing tag and attribute names equalizes input and output."""
    out, step = case_swap(payload, seed)
    has_names = any(s.kind in ("tag_name", "attr_name") for s in scan(payload))
    assert step.applied == has_names
    if not has_names:
        assert out == payload
        return
    assert _lower_names(out) == _lower_names(payload)


ALL_CHECKS = (
    check_hex_escape,
    check_base64_eval,
    check_url_encode,
    check_split_strings,
    check_comment_insertion,
    check_case_swap,
)
