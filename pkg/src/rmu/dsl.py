"""Parser for the line-oriented reward machine language.

    props gold home;
    state u0 init;
    terminal success;
    edge u0 : gold & !home -> success @ 1;

Formula precedence: ``!`` binds tightest, then ``&``, then ``|``.
``#`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import math
import re
from typing import Iterable, NamedTuple, Sequence

from rmu.machine import (
    FALSE, TRUE, And, Formula, Lit, Not, Or, PropId, RewardMachine, RmEdge, make_alphabet,
)

KEYWORDS = {"props", "state", "init", "terminal", "edge", "true", "false"}


class RmParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class RmSyntaxError(RmParseError):
    pass


class UnknownPropositionError(RmParseError):
    pass


class UnknownStateError(RmParseError):
    pass


class DuplicateStateError(RmParseError):
    pass


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<sym>[;:@!&|()])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RmSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            toks.append(Token("kw" if m.group() in KEYWORDS else "id", m.group(), line, col))
        elif kind in ("num", "arrow", "sym"):
            toks.append(Token("sym" if kind == "arrow" else kind, m.group(), line, col))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise RmSyntaxError(f"{msg}, found {found}", tok.line, tok.col)

    def accept(self, text: str) -> Token | None:
        if self.tok.text == text and self.tok.kind in ("kw", "sym"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            self.fail(f"expected {text!r}")
        return t

    def ident(self) -> Token:
        if self.tok.kind != "id":
            self.fail("expected an identifier")
        t = self.tok
        self.i += 1
        return t

    # formula := disj ; disj := conj ('|' conj)* ; conj := unary ('&' unary)*
    def disj(self):
        args = [self.conj()]
        while self.accept("|"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else ("or", args)

    def conj(self):
        args = [self.unary()]
        while self.accept("&"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else ("and", args)

    def unary(self):
        if self.accept("!"):
            return ("not", self.unary())
        if self.accept("("):
            inner = self.disj()
            self.expect(")")
            return inner
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        return ("lit", self.ident())


def _build(raw, index: dict[str, PropId]) -> Formula:
    if not isinstance(raw, tuple):
        return raw
    kind, arg = raw
    if kind == "lit":
        if arg.text not in index:
            raise UnknownPropositionError(f"unknown proposition {arg.text!r}", arg.line, arg.col)
        return Lit(index[arg.text])
    if kind == "not":
        return Not(_build(arg, index))
    sub = tuple(_build(a, index) for a in arg)
    return And(sub) if kind == "and" else Or(sub)


def parse_formula(text: str, alphabet: Sequence[PropId]) -> Formula:
    p = _Parser(text)
    raw = p.disj()
    if p.tok.kind != "eof":
        p.fail("expected end of formula")
    return _build(raw, {a.name: a for a in alphabet})


def parse_rm(text: str, alphabet: Iterable[PropId | str] | None = None) -> RewardMachine:
    """Parse DSL text into a validated machine.

    If ``alphabet`` is given, every proposition declared in the ``props``
    header must belong to it.
    """
    p = _Parser(text)
    props_tok = None
    prop_names: list[str] = []
    states: list[str] = []
    terminals: list[str] = []
    initial = None
    declared: dict[str, Token] = {}
    raw_edges = []

    while p.tok.kind != "eof":
        head = p.tok
        if p.accept("props"):
            if props_tok is not None:
                raise RmSyntaxError("'props' may appear only once", head.line, head.col)
            props_tok = head
            ids = [p.ident()]
            while p.tok.kind == "id":
                ids.append(p.ident())
            p.expect(";")
            for t in ids:
                if t.text in prop_names:
                    raise RmSyntaxError(f"duplicate proposition {t.text!r}", t.line, t.col)
                prop_names.append(t.text)
            prop_toks = {t.text: t for t in ids}
        elif p.accept("state") or p.accept("terminal"):
            name = p.ident()
            is_init = head.text == "state" and p.accept("init") is not None
            p.expect(";")
            if name.text in declared:
                raise DuplicateStateError(f"duplicate state id {name.text!r}", name.line, name.col)
            declared[name.text] = name
            if head.text == "state":
                states.append(name.text)
                if is_init:
                    if initial is not None:
                        raise RmSyntaxError("more than one initial state", name.line, name.col)
                    initial = name.text
            else:
                terminals.append(name.text)
        elif p.accept("edge"):
            src = p.ident()
            p.expect(":")
            guard = p.disj()
            p.expect("->")
            dst = p.ident()
            p.expect("@")
            if p.tok.kind != "num":
                p.fail("expected a reward")
            num = p.tok
            p.i += 1
            p.expect(";")
            raw_edges.append((src, guard, dst, num))
        else:
            p.fail("expected 'props', 'state', 'terminal' or 'edge'")

    if props_tok is None:
        t = p.tok
        raise RmSyntaxError("missing 'props' declaration", t.line, t.col)
    if initial is None:
        t = p.tok
        raise RmSyntaxError("no state is marked 'init'", t.line, t.col)

    if alphabet is not None:
        allowed = {a if isinstance(a, str) else a.name for a in alphabet}
        for name in prop_names:
            if name not in allowed:
                t = prop_toks[name]
                raise UnknownPropositionError(
                    f"unknown proposition {name!r} (alphabet is {sorted(allowed)})", t.line, t.col)
    alpha = make_alphabet(prop_names)
    index = {a.name: a for a in alpha}

    edges: dict[str, list[RmEdge]] = {}
    for src, guard, dst, num in raw_edges:
        if src.text not in declared:
            raise UnknownStateError(f"unknown state {src.text!r}", src.line, src.col)
        if src.text in terminals:
            raise RmSyntaxError(f"terminal {src.text!r} cannot have outgoing edges", src.line, src.col)
        if dst.text not in declared:
            raise UnknownStateError(f"unknown target state {dst.text!r}", dst.line, dst.col)
        reward = float(num.text)
        if not math.isfinite(reward):
            raise RmSyntaxError("reward must be finite", num.line, num.col)
        edges.setdefault(src.text, []).append(RmEdge(_build(guard, index), dst.text, reward))

    return RewardMachine(alpha, tuple(states), initial, tuple(terminals),
                         {k: tuple(v) for k, v in edges.items()})
