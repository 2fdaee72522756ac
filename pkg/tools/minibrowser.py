"""Minimal payload execution model used to record trace fixtures.

Stands in for a real instrumented browser page: parses a markup fragment,
activates it the way the harness page would (record-and-block resource
loads, inline script execution, synthetic error/load/click dispatch), and
interprets a small JS subset that covers the corpus vectors: alert/confirm/
prompt, console methods, fetch, string literals with escape sequences,
string concatenation, comments, while loops, and assignments.

Deliberately independent of the payloadforge package: fixtures recorded
here are an outside opinion on what each payload does.

Activation contract (mirrored by the in-page harness shim):
  1. Markup parses inertly; nothing loads during parsing.
  2. Elements activate in document order: resource src attrs (img, script,
     iframe) record one network GET against the origin and are blocked;
     blocked img/script loads then fire the element's onerror handler;
     svg elements fire onload on insertion; inline script bodies execute.
  3. After insertion, a synthetic click visits elements with onclick
     handlers or javascript: hrefs in document order; javascript: URLs are
     percent-decoded and executed.
Script parse errors and uncaught runtime errors become error events; an
execution-step budget models the harness timeout (status "timeout").
"""

from __future__ import annotations

import json
from urllib.parse import unquote, urljoin

ORIGIN = "http://harness.local"

STEP_BUDGET = 100_000

_WS = " \t\r\n\f"


class _Timeout(Exception):
    pass


class _JsSyntaxError(Exception):
    pass


class _JsRuntimeError(Exception):
    pass


# ---------------------------------------------------------------- JS lexer

_PUNCT2 = ("==", "&&", "||", "=>", "!=", "+=", "<=", ">=")


def _lex_js(src: str) -> list[tuple[str, object]]:
    toks: list[tuple[str, object]] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n\f\v":
            i += 1
        elif c == "/" and i + 1 < n and src[i + 1] == "*":
            end = src.find("*/", i + 2)
            i = n if end == -1 else end + 2
        elif c == "/" and i + 1 < n and src[i + 1] == "/":
            end = src.find("\n", i + 2)
            i = n if end == -1 else end + 1
        elif c in "'\"":
            value, i = _lex_string(src, i)
            toks.append(("str", value))
        elif c.isdigit():
            j = i + 1
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            text = src[i:j]
            toks.append(("num", float(text) if "." in text else int(text)))
            i = j
        elif c.isalpha() or c in "_$":
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] in "_$"):
                j += 1
            toks.append(("ident", src[i:j]))
            i = j
        elif src[i : i + 2] in _PUNCT2:
            toks.append(("punct", src[i : i + 2]))
            i += 2
        elif c in "()+-*.;,={}[]<>!&|?:":
            toks.append(("punct", c))
            i += 1
        else:
            raise _JsSyntaxError("Invalid or unexpected token")
    toks.append(("eof", None))
    return toks


_HEXDIGITS = set("0123456789abcdefABCDEF")

_SIMPLE = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "b": "\b",
    "f": "\f",
    "v": "\v",
    "0": "\0",
    "'": "'",
    '"': '"',
    "\\": "\\",
    "`": "`",
    "\n": "",
}


def _lex_string(src: str, i: int) -> tuple[str, int]:
    quote = src[i]
    out: list[str] = []
    i += 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == quote:
            return "".join(out), i + 1
        if c == "\n":
            raise _JsSyntaxError("Invalid or unexpected token")
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= n:
            raise _JsSyntaxError("Invalid or unexpected token")
        e = src[i + 1]
        if e == "x":
            hexpart = src[i + 2 : i + 4]
            if len(hexpart) < 2 or not all(h in _HEXDIGITS for h in hexpart):
                raise _JsSyntaxError("Invalid hexadecimal escape sequence")
            out.append(chr(int(hexpart, 16)))
            i += 4
        elif e == "u":
            if i + 2 < n and src[i + 2] == "{":
                close = src.find("}", i + 3)
                inner = src[i + 3 : close] if close != -1 else ""
                if close == -1 or not inner or not all(h in _HEXDIGITS for h in inner):
                    raise _JsSyntaxError("Invalid Unicode escape sequence")
                cp = int(inner, 16)
                if cp > 0x10FFFF:
                    raise _JsSyntaxError("Undefined Unicode code-point")
                out.append(chr(cp))
                i = close + 1
            else:
                hexpart = src[i + 2 : i + 6]
                if len(hexpart) < 4 or not all(h in _HEXDIGITS for h in hexpart):
                    raise _JsSyntaxError("Invalid Unicode escape sequence")
                out.append(chr(int(hexpart, 16)))
                i += 6
        elif e in _SIMPLE:
            out.append(_SIMPLE[e])
            i += 2
        else:
            out.append(e)
            i += 2
    raise _JsSyntaxError("Invalid or unexpected token")


# --------------------------------------------------------------- JS parser
# program := stmt* ; stmt := block | while | ';' | expr ;?
# expr    := assign ; assign := additive ('=' assign)?
# additive := postfix ('+' postfix)* ; postfix := primary ('.'ident|call)*

_KEYWORD_VALUES = {"true": True, "false": False, "null": None, "undefined": None}


class _Parser:
    def __init__(self, toks: list[tuple[str, object]]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> tuple[str, object]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, object]:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect_punct(self, value: str) -> None:
        kind, got = self.take()
        if kind != "punct" or got != value:
            raise _JsSyntaxError(f"Unexpected token '{got}'" if kind != "eof" else "Unexpected end of input")

    def program(self) -> list:
        stmts = []
        while self.peek()[0] != "eof":
            stmts.append(self.statement())
        return stmts

    def statement(self):
        kind, value = self.peek()
        if kind == "punct" and value == ";":
            self.take()
            return ("empty",)
        if kind == "punct" and value == "{":
            self.take()
            body = []
            while not (self.peek() == ("punct", "}")):
                if self.peek()[0] == "eof":
                    raise _JsSyntaxError("Unexpected end of input")
                body.append(self.statement())
            self.take()
            return ("block", body)
        if kind == "ident" and value == "while":
            self.take()
            self.expect_punct("(")
            cond = self.expression()
            self.expect_punct(")")
            body = self.statement()
            return ("while", cond, body)
        node = self.expression()
        if self.peek() == ("punct", ";"):
            self.take()
        return ("expr", node)

    def expression(self):
        left = self.additive()
        if self.peek() == ("punct", "="):
            self.take()
            right = self.expression()
            if left[0] not in ("name", "member"):
                raise _JsSyntaxError("Invalid left-hand side in assignment")
            return ("assign", left, right)
        return left

    def additive(self):
        node = self.postfix()
        while self.peek() == ("punct", "+"):
            self.take()
            node = ("add", node, self.postfix())
        return node

    def postfix(self):
        node = self.primary()
        while True:
            kind, value = self.peek()
            if kind == "punct" and value == ".":
                self.take()
                nk, nv = self.take()
                if nk != "ident":
                    raise _JsSyntaxError(f"Unexpected token '{nv}'")
                node = ("member", node, nv)
            elif kind == "punct" and value == "(":
                self.take()
                args = []
                if self.peek() != ("punct", ")"):
                    args.append(self.expression())
                    while self.peek() == ("punct", ","):
                        self.take()
                        args.append(self.expression())
                self.expect_punct(")")
                node = ("call", node, args)
            else:
                return node

    def primary(self):
        kind, value = self.take()
        if kind == "str":
            return ("lit", value)
        if kind == "num":
            return ("lit", value)
        if kind == "ident":
            if value in _KEYWORD_VALUES:
                return ("lit", _KEYWORD_VALUES[value])
            return ("name", value)
        if kind == "punct" and value == "(":
            node = self.expression()
            self.expect_punct(")")
            return node
        if kind == "eof":
            raise _JsSyntaxError("Unexpected end of input")
        raise _JsSyntaxError(f"Unexpected token '{value}'")


# ---------------------------------------------------------- JS interpreter


def _display(value) -> str:
    if value is None:
        return "undefined"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, (int, float)):
        return str(value)
    if isinstance(value, str):
        return value
    if callable(value):
        return "function"
    return "[object Object]"


class _Interp:
    def __init__(self, page: "Page"):
        self.page = page
        self.globals: dict[str, object] = {}
        console = {
            level: self._console(level) for level in ("log", "info", "warn", "error", "debug")
        }
        document = {"cookie": ""}
        env = {
            "alert": self._alert,
            "confirm": self._confirm,
            "prompt": self._prompt,
            "fetch": self._fetch,
            "console": console,
            "document": document,
        }
        env["window"] = env
        self.env = env

    def _console(self, level: str):
        def emit(*args):
            message = " ".join(_display(a) for a in args)
            self.page.events.append({"kind": "console", "level": level, "message": message})

        return emit

    def _alert(self, *args):
        self.page.events.append(
            {"kind": "alert", "message": _display(args[0]) if args else "undefined"}
        )

    def _confirm(self, *args):
        self._alert(*args)
        return False

    def _prompt(self, *args):
        self._alert(*args)
        return ""

    def _fetch(self, *args):
        url = _display(args[0]) if args else ""
        self.page.events.append(
            {"kind": "network", "method": "GET", "url": urljoin(ORIGIN + "/", url)}
        )

    def run(self, source: str) -> None:
        """Execute one script; parse and runtime failures become error events."""
        try:
            ast = _Parser(_lex_js(source)).program()
        except _JsSyntaxError as exc:
            self.page.events.append(
                {"kind": "error", "message": f"Uncaught SyntaxError: {exc}"}
            )
            return
        try:
            for stmt in ast:
                self._exec(stmt)
        except _JsRuntimeError as exc:
            self.page.events.append({"kind": "error", "message": f"Uncaught {exc}"})

    def _tick(self) -> None:
        self.page.steps += 1
        if self.page.steps > STEP_BUDGET:
            raise _Timeout()

    def _exec(self, stmt) -> None:
        self._tick()
        op = stmt[0]
        if op == "empty":
            return
        if op == "block":
            for inner in stmt[1]:
                self._exec(inner)
        elif op == "while":
            while self._truthy(self._eval(stmt[1])):
                self._tick()
                self._exec(stmt[2])
        else:
            self._eval(stmt[1])

    @staticmethod
    def _truthy(value) -> bool:
        return bool(value) if not isinstance(value, str) else value != ""

    def _eval(self, node):
        self._tick()
        op = node[0]
        if op == "lit":
            return node[1]
        if op == "name":
            name = node[1]
            if name in self.globals:
                return self.globals[name]
            if name in self.env:
                return self.env[name]
            raise _JsRuntimeError(f"ReferenceError: {name} is not defined")
        if op == "member":
            obj = self._eval(node[1])
            if isinstance(obj, dict) and node[2] in obj:
                return obj[node[2]]
            return None
        if op == "add":
            left = self._eval(node[1])
            right = self._eval(node[2])
            if isinstance(left, str) or isinstance(right, str):
                return _display(left) + _display(right)
            if left is None or right is None:
                return float("nan")
            return left + right
        if op == "assign":
            value = self._eval(node[2])
            target = node[1]
            if target[0] == "name":
                self.globals[target[1]] = value
            else:
                obj = self._eval(target[1])
                if isinstance(obj, dict):
                    obj[target[2]] = value
            return value
        if op == "call":
            fn_node = node[1]
            fn = self._eval(fn_node)
            args = [self._eval(a) for a in node[2]]
            if not callable(fn):
                label = fn_node[2] if fn_node[0] == "member" else (
                    fn_node[1] if fn_node[0] == "name" else "expression"
                )
                raise _JsRuntimeError(f"TypeError: {label} is not a function")
            return fn(*args)
        raise _JsRuntimeError("TypeError: unsupported expression")


# -------------------------------------------------------------- HTML layer


def _parse_markup(text: str) -> list[dict]:
    """Inert parse into a flat document-order element list.  Attribute
    values follow the forgiving rules real tokenizers use: first quote wins
    for quoted values, unquoted values run to whitespace or '>'."""
    items: list[dict] = []
    i, n = 0, len(text)
    lower = text.lower()
    while i < n:
        lt = text.find("<", i)
        if lt == -1:
            break
        i = lt
        if i + 1 >= n:
            break
        nxt = text[i + 1]
        if nxt == "!":
            if text.startswith("<!--", i):
                end = text.find("-->", i + 4)
                i = n if end == -1 else end + 3
            else:
                end = text.find(">", i)
                i = n if end == -1 else end + 1
            continue
        if nxt == "/":
            end = text.find(">", i)
            i = n if end == -1 else end + 1
            continue
        if not (nxt.isascii() and nxt.isalpha()):
            i += 1
            continue
        j = i + 1
        while j < n and (text[j].isascii() and (text[j].isalnum() or text[j] in "-_:")):
            j += 1
        tag = lower[i + 1 : j]
        attrs: dict[str, str] = {}
        k = j
        closed = False
        while k < n:
            while k < n and (text[k] in _WS or text[k] == "/"):
                k += 1
            if k >= n:
                break
            if text[k] == ">":
                k += 1
                closed = True
                break
            a = k
            while k < n and text[k] not in _WS and text[k] not in "=/>":
                k += 1
            name = lower[a:k]
            if not name:
                k += 1
                continue
            value = ""
            while k < n and text[k] in _WS:
                k += 1
            if k < n and text[k] == "=":
                k += 1
                while k < n and text[k] in _WS:
                    k += 1
                if k < n and text[k] in "'\"":
                    q = text[k]
                    vend = text.find(q, k + 1)
                    if vend == -1:
                        value = text[k + 1 :]
                        k = n
                    else:
                        value = text[k + 1 : vend]
                        k = vend + 1
                else:
                    a = k
                    while k < n and text[k] not in _WS and text[k] != ">":
                        k += 1
                    value = text[a:k]
            attrs.setdefault(name, value)
        body = None
        if closed and tag == "script":
            body_end = lower.find("</script", k)
            if body_end == -1:
                body = text[k:]
                k = n
            else:
                body = text[k:body_end]
                close_gt = text.find(">", body_end)
                k = n if close_gt == -1 else close_gt + 1
        items.append({"tag": tag, "attrs": attrs, "body": body})
        i = k
    return items


_RESOURCE_TAGS = ("img", "script", "iframe")
_ERROR_FIRING = ("img", "script")


class Page:
    def __init__(self) -> None:
        self.events: list[dict] = []
        self.steps = 0
        self.interp = _Interp(self)

    def run_handler(self, source: str) -> None:
        self.interp.run(source)

    def inject_html(self, payload: str) -> None:
        elements = _parse_markup(payload)
        for el in elements:
            tag, attrs = el["tag"], el["attrs"]
            src = attrs.get("src")
            if tag in _RESOURCE_TAGS and src:
                self.events.append(
                    {"kind": "network", "method": "GET", "url": urljoin(ORIGIN + "/", src)}
                )
                if tag in _ERROR_FIRING and "onerror" in attrs:
                    self.run_handler(attrs["onerror"])
            if tag == "script" and not src and el["body"] is not None:
                self.interp.run(el["body"])
            if tag == "svg" and "onload" in attrs:
                self.run_handler(attrs["onload"])
        for el in elements:
            attrs = el["attrs"]
            href = attrs.get("href", "")
            clickable = "onclick" in attrs or href.lower().startswith("javascript:")
            if not clickable:
                continue
            if "onclick" in attrs:
                self.run_handler(attrs["onclick"])
            if href.lower().startswith("javascript:"):
                self.run_handler(unquote(href[len("javascript:") :]))

    def inject_script(self, payload: str) -> None:
        self.interp.run(payload)


def run_payload(payload: str, context: str = "html_body", timeout_ms: int = 3000) -> dict:
    """Execute one payload and return its trace as a plain dict."""
    page = Page()
    status = "completed"
    duration = 0
    try:
        if context == "html_body":
            page.inject_html(payload)
        elif context == "script":
            page.inject_script(payload)
        else:
            raise ValueError(f"unsupported context: {context!r}")
    except _Timeout:
        status = "timeout"
        duration = timeout_ms
    return {"status": status, "duration_ms": duration, "events": page.events}


def trace_json(trace: dict) -> str:
    return json.dumps(trace, separators=(",", ":"), ensure_ascii=False)


if __name__ == "__main__":
    import sys

    text = sys.stdin.read()
    print(trace_json(run_payload(text)))
