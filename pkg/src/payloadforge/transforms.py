"""Span scanning and the six deterministic payload transforms.

A payload is decomposed into structural spans by a single-pass heuristic
lexer (no HTML tree construction, no JS AST), then rewritten by pure,
seeded transforms that only touch representation-level regions: string
literal bodies, script bodies, `javascript:` URLs, token boundaries, and
HTML names.  Every transform is total over arbitrary UTF-8 input; when a
payload has no eligible span, the transform returns it unchanged with
``applied=False``.
"""

from __future__ import annotations

import base64
import string
from dataclasses import dataclass

from ._rng import SplitMix64
from .corpus import digest

TRANSFORM_NAMES = (
    "hex_escape",
    "base64_eval",
    "url_encode",
    "split_strings",
    "comment_insertion",
    "case_swap",
)

SPAN_KINDS = (
    "tag_name",
    "attr_name",
    "attr_value",
    "js_code",
    "js_string_literal",
    "js_token",
    "text",
    "other",
)


@dataclass(frozen=True)
class TokenSpan:
    kind: str
    start: int
    end: int


@dataclass(frozen=True)
class JsRegion:
    """A contiguous stretch of JS source: a script body or an event-handler
    attribute value.  May be empty (start == end), unlike a TokenSpan.
    quote is the enclosing attribute quote char, or "" for script bodies
    and unquoted values."""

    start: int
    end: int
    context: str
    quote: str


@dataclass(frozen=True)
class TransformStep:
    name: str
    seed: int
    applied: bool
    input_digest: str
    output_digest: str


_WS = " \t\r\n\f"
_JS_WS = " \t\r\n\f\v"
_IDENT_START = set(string.ascii_letters + "_$")
_IDENT_CONT = set(string.ascii_letters + string.digits + "_$")
_NUM_CONT = set(string.ascii_letters + string.digits + "._")
_PUNCT = set("+-*/%=<>!&|^~?:;,.(){}[]@#\\`")


def _is_name_start(c: str) -> bool:
    return c.isascii() and c.isalpha()


def _is_name_char(c: str) -> bool:
    return c.isascii() and (c.isalnum() or c in "-_:")


def _comment_at(text: str, i: int, b: int) -> bool:
    return text[i] == "/" and i + 1 < b and text[i + 1] in "*/"


def _skip_comment(text: str, i: int, b: int) -> int:
    if text[i + 1] == "*":
        end = text.find("*/", i + 2, b)
        return b if end == -1 else end + 2
    end = text.find("\n", i + 2, b)
    return b if end == -1 else end + 1


def _sublex_js(text: str, a: int, b: int, spans: list[TokenSpan]) -> None:
    """Tokenize text[a:b] as JS into js_code / js_string_literal / js_token /
    other spans covering [a, b) with no gaps.

    Multi-char operator runs stay one token so comment insertion can never
    split `==` or `=>`.  Unterminated strings degrade to kind=other so no
    transform touches them.  Template literals and regex literals are not
    recognized; their delimiters lex as operator chars.
    """
    i = a
    while i < b:
        c = text[i]
        if c in _JS_WS or _comment_at(text, i, b):
            j = i
            while j < b:
                if text[j] in _JS_WS:
                    j += 1
                elif _comment_at(text, j, b):
                    j = _skip_comment(text, j, b)
                else:
                    break
            spans.append(TokenSpan("js_code", i, j))
            i = j
        elif c in "'\"":
            j = i + 1
            closed = False
            while j < b:
                if text[j] == "\\" and j + 1 < b:
                    j += 2
                    continue
                if text[j] == c:
                    closed = True
                    j += 1
                    break
                j += 1
            spans.append(TokenSpan("js_string_literal" if closed else "other", i, j))
            i = j
        elif c in _IDENT_START:
            j = i + 1
            while j < b and text[j] in _IDENT_CONT:
                j += 1
            spans.append(TokenSpan("js_token", i, j))
            i = j
        elif c.isdigit():
            j = i + 1
            while j < b and text[j] in _NUM_CONT:
                j += 1
            spans.append(TokenSpan("js_token", i, j))
            i = j
        elif c in _PUNCT:
            j = i + 1
            while j < b and text[j] in _PUNCT and not _comment_at(text, j, b):
                j += 1
            spans.append(TokenSpan("js_token", i, j))
            i = j
        else:
            j = i + 1
            while j < b and not (
                text[j] in _JS_WS
                or text[j] in "'\""
                or text[j] in _IDENT_START
                or text[j].isdigit()
                or text[j] in _PUNCT
            ):
                j += 1
            spans.append(TokenSpan("other", i, j))
            i = j


def _emit_value(
    text: str,
    vstart: int,
    vend: int,
    attr_name: str,
    quote: str,
    spans: list[TokenSpan],
    regions: list[JsRegion],
) -> None:
    if attr_name.startswith("on") and len(attr_name) > 2:
        _sublex_js(text, vstart, vend, spans)
        regions.append(JsRegion(vstart, vend, "handler", quote))
    elif vend > vstart:
        # javascript: URLs stay whole attr_value spans; url_encode owns them
        spans.append(TokenSpan("attr_value", vstart, vend))


def _lex_tag(
    text: str, lower: str, i: int, spans: list[TokenSpan], regions: list[JsRegion]
) -> int:
    n = len(text)
    j = i + 1
    k = j
    while k < n and _is_name_char(text[k]):
        k += 1
    spans.append(TokenSpan("tag_name", j, k))
    tag = lower[j:k]
    i = k
    closed = False
    while i < n:
        while i < n and (text[i] in _WS or text[i] == "/"):
            i += 1
        if i >= n:
            break
        if text[i] == ">":
            i += 1
            closed = True
            break
        a = i
        while i < n and text[i] not in _WS and text[i] not in "=/>":
            i += 1
        if i == a:
            i += 1
            continue
        spans.append(TokenSpan("attr_name", a, i))
        name = lower[a:i]
        while i < n and text[i] in _WS:
            i += 1
        if i < n and text[i] == "=":
            i += 1
            while i < n and text[i] in _WS:
                i += 1
            if i >= n:
                break
            q = text[i]
            if q in "'\"":
                vstart = i + 1
                vend = text.find(q, vstart)
                if vend == -1:
                    _emit_value(text, vstart, n, name, q, spans, regions)
                    return n
                _emit_value(text, vstart, vend, name, q, spans, regions)
                i = vend + 1
            else:
                vstart = i
                while i < n and text[i] not in _WS and text[i] != ">":
                    i += 1
                _emit_value(text, vstart, i, name, "", spans, regions)
    if closed and tag == "script":
        body_end = lower.find("</script", i)
        if body_end == -1:
            body_end = n
        _sublex_js(text, i, body_end, spans)
        regions.append(JsRegion(i, body_end, "script", ""))
        i = body_end
    return i


def _construct_at(text: str, i: int) -> bool:
    if text[i] != "<" or i + 1 >= len(text):
        return False
    nxt = text[i + 1]
    if nxt == "!":
        return True
    if nxt == "/":
        return i + 2 < len(text) and _is_name_start(text[i + 2])
    return _is_name_start(nxt)


def scan_regions(payload_text: str) -> tuple[list[TokenSpan], list[JsRegion]]:
    """Full decomposition: spans plus the JS regions they were lexed in."""
    text = payload_text
    lower = text.lower()
    n = len(text)
    spans: list[TokenSpan] = []
    regions: list[JsRegion] = []
    i = 0
    while i < n:
        if _construct_at(text, i):
            nxt = text[i + 1]
            if nxt == "!":
                if text.startswith("<!--", i):
                    end = text.find("-->", i + 4)
                    end = n if end == -1 else end + 3
                else:
                    end = text.find(">", i)
                    end = n if end == -1 else end + 1
                spans.append(TokenSpan("other", i, end))
                i = end
            elif nxt == "/":
                j = i + 2
                k = j
                while k < n and _is_name_char(text[k]):
                    k += 1
                spans.append(TokenSpan("tag_name", j, k))
                gt = text.find(">", k)
                i = n if gt == -1 else gt + 1
            else:
                i = _lex_tag(text, lower, i, spans, regions)
        else:
            j = i + 1
            while j < n and not _construct_at(text, j):
                j += 1
            spans.append(TokenSpan("text", i, j))
            i = j
    return spans, regions


def scan(payload_text: str) -> list[TokenSpan]:
    """Best-effort single-pass span decomposition.  Total: malformed markup
    degrades to text/other spans, never an error.  Spans are sorted,
    non-overlapping, and together with uncovered gaps reconstruct the
    input exactly."""
    return scan_regions(payload_text)[0]


def _rewrite(text: str, edits: list[tuple[int, int, str]]) -> str:
    out = []
    pos = 0
    for start, end, rep in sorted(edits, key=lambda e: (e[0], e[1])):
        out.append(text[pos:start])
        out.append(rep)
        pos = end
    out.append(text[pos:])
    return "".join(out)


def _step(name: str, seed: int, applied: bool, before: str, after: str) -> TransformStep:
    return TransformStep(name, seed, applied, digest(before), digest(after))


_SIMPLE_ESCAPES = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "b": "\b",
    "f": "\f",
    "v": "\v",
    "0": "\0",
    "\n": "",
    "\r": "",
}

_HEX = set(string.hexdigits)


def _js_unescape(body: str) -> str:
    """Decode a JS string-literal body to its runtime value.  Invalid escape
    sequences keep the backslash as a literal char rather than failing."""
    out: list[str] = []
    i = 0
    n = len(body)
    while i < n:
        c = body[i]
        if c != "\\" or i + 1 >= n:
            out.append(c)
            i += 1
            continue
        e = body[i + 1]
        if e == "x" and i + 3 < n and body[i + 2] in _HEX and body[i + 3] in _HEX:
            out.append(chr(int(body[i + 2 : i + 4], 16)))
            i += 4
        elif e == "u" and i + 2 < n and body[i + 2] == "{":
            close = body.find("}", i + 3)
            inner = body[i + 3 : close] if close != -1 else ""
            if close != -1 and inner and all(ch in _HEX for ch in inner) and int(inner, 16) <= 0x10FFFF:
                out.append(chr(int(inner, 16)))
                i = close + 1
            else:
                out.append("\\")
                i += 1
        elif e == "u" and i + 5 < n and all(ch in _HEX for ch in body[i + 2 : i + 6]):
            out.append(chr(int(body[i + 2 : i + 6], 16)))
            i += 6
        elif e in _SIMPLE_ESCAPES:
            out.append(_SIMPLE_ESCAPES[e])
            i += 2
        elif e in "'\"\\`":
            out.append(e)
            i += 2
        else:
            out.append(e)
            i += 2
    return "".join(out)


def _utf16_units(value: str) -> list[int]:
    units: list[int] = []
    for ch in value:
        o = ord(ch)
        if o > 0xFFFF:
            v = o - 0x10000
            units.append(0xD800 + (v >> 10))
            units.append(0xDC00 + (v & 0x3FF))
        else:
            units.append(o)
    return units


def hex_escape(payload: str, seed: int = 0) -> tuple[str, TransformStep]:
    """Escape every char of every JS string-literal body as \\xHH (ASCII) or
    \\uHHHH (otherwise).  Bodies are decoded first so pre-existing escapes
    re-encode to the same runtime value instead of being double-escaped."""
    spans, _ = scan_regions(payload)
    lits = [s for s in spans if s.kind == "js_string_literal"]
    edits = []
    for s in lits:
        value = _js_unescape(payload[s.start + 1 : s.end - 1])
        enc = "".join(
            f"\\x{u:02x}" if u < 0x80 else f"\\u{u:04x}" for u in _utf16_units(value)
        )
        edits.append((s.start + 1, s.end - 1, enc))
    out = _rewrite(payload, edits)
    return out, _step("hex_escape", seed, bool(lits), payload, out)


def base64_eval(payload: str, seed: int = 0) -> tuple[str, TransformStep]:
    """Replace each JS region body B with eval(atob("E")), E = Base64 of B.
    The argument quote is chosen to avoid the enclosing attribute quote."""
    _, regions = scan_regions(payload)
    edits = []
    for r in regions:
        enc = base64.b64encode(payload[r.start : r.end].encode("utf-8")).decode("ascii")
        q = "'" if r.quote == '"' else '"'
        edits.append((r.start, r.end, f"eval(atob({q}{enc}{q}))"))
    out = _rewrite(payload, edits)
    return out, _step("base64_eval", seed, bool(regions), payload, out)


_UNRESERVED = set(string.ascii_letters + string.digits + "-._~")
_JS_SCHEME = "javascript:"


def url_encode(payload: str, seed: int = 0) -> tuple[str, TransformStep]:
    """Percent-encode (uppercase) everything but unreserved chars after the
    javascript: scheme in attribute values."""
    spans, _ = scan_regions(payload)
    edits = []
    for s in spans:
        if s.kind != "attr_value":
            continue
        val = payload[s.start : s.end]
        if not val.lower().startswith(_JS_SCHEME):
            continue
        cut = len(_JS_SCHEME)
        enc = "".join(
            c if c in _UNRESERVED else "".join(f"%{b:02X}" for b in c.encode("utf-8"))
            for c in val[cut:]
        )
        edits.append((s.start, s.end, val[:cut] + enc))
    out = _rewrite(payload, edits)
    return out, _step("url_encode", seed, bool(edits), payload, out)


def split_strings(payload: str, seed: int = 0) -> tuple[str, TransformStep]:
    """Split each JS string literal with body length >= 2 into "A"+"B" at a
    seeded position uniform over 1..len-1, keeping the original quote."""
    spans, _ = scan_regions(payload)
    rng = SplitMix64(seed)
    edits = []
    applied = False
    for s in spans:
        if s.kind != "js_string_literal":
            continue
        body_len = s.end - s.start - 2
        if body_len < 2:
            continue
        applied = True
        pos = 1 + rng.below(body_len - 1)
        q = payload[s.start]
        body = payload[s.start + 1 : s.end - 1]
        edits.append((s.start, s.end, f"{q}{body[:pos]}{q}+{q}{body[pos:]}{q}"))
    out = _rewrite(payload, edits)
    return out, _step("split_strings", seed, applied, payload, out)


def comment_insertion(
    payload: str, seed: int = 0, max_inserts: int = 3
) -> tuple[str, TransformStep]:
    """Insert /**/ at up to max_inserts seeded token boundaries inside JS
    regions.  A boundary is the start of a token that follows another token
    (whitespace or comments between them are fine); insertion never lands
    inside a string literal or mid-token."""
    spans, regions = scan_regions(payload)
    boundaries: list[int] = []
    for r in regions:
        last = None
        for s in spans:
            if s.start < r.start or s.end > r.end:
                continue
            if s.kind in ("js_token", "js_string_literal"):
                # a preceding "/" would merge with the inserted "/**/" into
                # a line comment, swallowing the rest of the statement
                if last is not None and payload[s.start - 1] != "/":
                    boundaries.append(s.start)
                last = s
            elif s.kind == "other":
                last = None
    if not boundaries:
        return payload, _step("comment_insertion", seed, False, payload, payload)
    rng = SplitMix64(seed)
    count = 1 + rng.below(min(max_inserts, len(boundaries)))
    chosen = rng.sample(boundaries, count)
    out = _rewrite(payload, [(p, p, "/**/") for p in chosen])
    return out, _step("comment_insertion", seed, True, payload, out)


def case_swap(payload: str, seed: int = 0) -> tuple[str, TransformStep]:
    """Alternate case (upper on even offsets) inside tag and attribute names.
    HTML names are case-insensitive; JS identifiers are not, so js regions
    stay untouched."""
    spans, _ = scan_regions(payload)
    targets = [s for s in spans if s.kind in ("tag_name", "attr_name")]
    edits = []
    for s in targets:
        name = payload[s.start : s.end]
        swapped = "".join(
            ch.upper() if i % 2 == 0 else ch.lower() for i, ch in enumerate(name)
        )
        edits.append((s.start, s.end, swapped))
    out = _rewrite(payload, edits)
    return out, _step("case_swap", seed, bool(targets), payload, out)


_TRANSFORMS = {
    "hex_escape": hex_escape,
    "base64_eval": base64_eval,
    "url_encode": url_encode,
    "split_strings": split_strings,
    "comment_insertion": comment_insertion,
    "case_swap": case_swap,
}


def apply(name: str, payload: str, seed: int) -> tuple[str, TransformStep]:
    """Dispatch to one of the six transforms by name."""
    try:
        fn = _TRANSFORMS[name]
    except KeyError:
        raise ValueError(f"unknown transform: {name!r}") from None
    return fn(payload, seed)
