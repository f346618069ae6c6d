"""Reward machine types, guard formulas and stepping semantics.

A truth assignment over the alphabet (a ``PropSet``) is a plain ``int``
bitmask: bit ``i`` is set iff the proposition with index ``i`` holds.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

MAX_PROPS = 16

PropSet = int


class PropId(NamedTuple):
    name: str
    index: int


def make_alphabet(names: Iterable[str]) -> tuple[PropId, ...]:
    names = list(names)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate proposition names in {names}")
    if len(names) > MAX_PROPS:
        raise ValueError(f"at most {MAX_PROPS} propositions are supported")
    return tuple(PropId(n, i) for i, n in enumerate(names))


def propset(alphabet: Sequence[PropId], names: Iterable[str] = ()) -> PropSet:
    index = {p.name: p.index for p in alphabet}
    bits = 0
    for n in names:
        if n not in index:
            raise KeyError(f"unknown proposition {n!r}")
        bits |= 1 << index[n]
    return bits


def propset_names(alphabet: Sequence[PropId], bits: PropSet) -> frozenset[str]:
    return frozenset(p.name for p in alphabet if bits >> p.index & 1)


# -- formulas ---------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Lit:
    prop: PropId


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


Formula = Union[Const, Lit, Not, And, Or]

TRUE = Const(True)
FALSE = Const(False)


def eval_formula(f: Formula, sigma: PropSet) -> bool:
    if isinstance(f, Lit):
        return bool(sigma >> f.prop.index & 1)
    if isinstance(f, And):
        return all(eval_formula(g, sigma) for g in f.args)
    if isinstance(f, Or):
        return any(eval_formula(g, sigma) for g in f.args)
    if isinstance(f, Not):
        return not eval_formula(f.arg, sigma)
    if isinstance(f, Const):
        return f.value
    raise TypeError(f"not a formula: {f!r}")


def formula_props(f: Formula) -> set[PropId]:
    if isinstance(f, Lit):
        return {f.prop}
    if isinstance(f, Not):
        return formula_props(f.arg)
    if isinstance(f, (And, Or)):
        out: set[PropId] = set()
        for g in f.args:
            out |= formula_props(g)
        return out
    return set()


_PREC = {Or: 1, And: 2}


def format_formula(f: Formula) -> str:
    """Render with the minimal parentheses that still parse back to the same tree."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Lit):
        return f.prop.name
    if isinstance(f, Not):
        inner = format_formula(f.arg)
        if isinstance(f.arg, (And, Or)):
            inner = f"({inner})"
        return "!" + inner
    op = " & " if isinstance(f, And) else " | "
    parts = []
    for g in f.args:
        s = format_formula(g)
        # a same-or-lower precedence child would be flattened or rebound
        if isinstance(g, (And, Or)) and _PREC[type(g)] <= _PREC[type(f)]:
            s = f"({s})"
        parts.append(s)
    return op.join(parts)


# -- machines ---------------------------------------------------------------

@dataclass(frozen=True)
class RmEdge:
    guard: Formula
    target: str
    reward: float


class RmOutcome(NamedTuple):
    next: str
    reward: float


class TerminalStepError(ValueError):
    """Raised when a caller steps a machine that already sits in a terminal."""


@dataclass(frozen=True, eq=False)
class RewardMachine:
    """A simple reward machine with ordered, guarded edges.

    Edges of a state are tried in declaration order and the first satisfied
    guard fires. When no guard holds the machine stays put with reward 0.
    Node indices order non-terminal states first, then terminals.
    """

    alphabet: tuple[PropId, ...]
    states: tuple[str, ...]
    initial: str
    terminals: tuple[str, ...]
    edges: Mapping[str, tuple[RmEdge, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.states) & set(self.terminals):
            raise ValueError("states and terminals must be disjoint")
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} is not a state")
        nodes = self.states + self.terminals
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate state id")
        for src, es in self.edges.items():
            if src not in self.states:
                raise ValueError(f"edge source {src!r} is not a non-terminal state")
            for e in es:
                if e.target not in nodes:
                    raise ValueError(f"edge target {e.target!r} does not exist")
                for p in formula_props(e.guard):
                    if p not in self.alphabet:
                        raise ValueError(f"guard uses unknown proposition {p.name!r}")

    def __eq__(self, other):
        if not isinstance(other, RewardMachine):
            return NotImplemented
        norm = lambda rm: {s: tuple(rm.edges.get(s, ())) for s in rm.states}
        return (self.alphabet == other.alphabet and self.states == other.states
                and self.initial == other.initial and self.terminals == other.terminals
                and norm(self) == norm(other))

    __hash__ = None

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.states + self.terminals

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_nodes(self) -> int:
        return len(self.states) + len(self.terminals)

    @property
    def n_props(self) -> int:
        return len(self.alphabet)

    @property
    def u0(self) -> int:
        return self.node_index[self.initial]

    def is_terminal(self, node: Union[str, int]) -> bool:
        if isinstance(node, str):
            return node in self.terminals
        return node >= len(self.states)

    def prop_index(self, name: str) -> int:
        for p in self.alphabet:
            if p.name == name:
                return p.index
        raise KeyError(name)

    def completed_edges(self, state: str) -> tuple[RmEdge, ...]:
        """Declared edges plus the implicit default self-loop, if reachable."""
        es = tuple(self.edges.get(state, ()))
        covered = [any(eval_formula(e.guard, s) for e in es) for s in range(1 << self.n_props)]
        if all(covered):
            return es
        if es:
            guard = Not(es[0].guard if len(es) == 1 else Or(tuple(e.guard for e in es)))
        else:
            guard = TRUE
        return es + (RmEdge(guard, state, 0.0),)

    def edge_count(self) -> int:
        return sum(len(self.completed_edges(s)) for s in self.states)

    @cached_property
    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(next_node, reward)`` tables of shape ``(n_states, 2**n_props)``."""
        n_sigma = 1 << self.n_props
        nxt = np.empty((self.n_states, n_sigma), dtype=np.int64)
        rew = np.zeros((self.n_states, n_sigma), dtype=np.float64)
        idx = self.node_index
        for i, s in enumerate(self.states):
            es = self.edges.get(s, ())
            for sigma in range(n_sigma):
                for e in es:
                    if eval_formula(e.guard, sigma):
                        nxt[i, sigma] = idx[e.target]
                        rew[i, sigma] = e.reward
                        break
                else:
                    nxt[i, sigma] = i
        nxt.flags.writeable = False
        rew.flags.writeable = False
        return nxt, rew

    @cached_property
    def relevant_props(self) -> np.ndarray:
        """Per state, the bitmask of propositions that can still change the
        machine's future behaviour (transitions or rewards) from that state."""
        nxt, rew = self.tables
        n = self.n_states
        local = np.zeros(n, dtype=np.int64)
        for u in range(n):
            m = 0
            for i in range(self.n_props):
                bit = 1 << i
                for sigma in range(1 << self.n_props):
                    if sigma & bit:
                        continue
                    if nxt[u, sigma] != nxt[u, sigma | bit] or rew[u, sigma] != rew[u, sigma | bit]:
                        m |= bit
                        break
            local[u] = m
        closure = np.zeros(n, dtype=np.int64)
        for u in range(n):
            seen = {u}
            todo = deque([u])
            m = 0
            while todo:
                v = todo.popleft()
                m |= int(local[v])
                for w in set(nxt[v].tolist()):
                    if w < n and w not in seen:
                        seen.add(w)
                        todo.append(w)
            closure[u] = m
        closure.flags.writeable = False
        return closure

    def step_index(self, u: int, sigma: PropSet) -> tuple[int, float]:
        if u >= self.n_states:
            raise TerminalStepError(f"cannot step terminal {self.nodes[u]!r}")
        nxt, rew = self.tables
        return int(nxt[u, sigma]), float(rew[u, sigma])


def rm_step(rm: RewardMachine, u: str, sigma: PropSet) -> RmOutcome:
    if u in rm.terminals:
        raise TerminalStepError(f"cannot step terminal {u!r}")
    if u not in rm.states:
        raise KeyError(f"unknown state {u!r}")
    if sigma >> rm.n_props:
        raise ValueError("assignment sets bits outside the alphabet")
    for e in rm.edges.get(u, ()):
        if eval_formula(e.guard, sigma):
            return RmOutcome(e.target, e.reward)
    return RmOutcome(u, 0.0)


def run_rm(rm: RewardMachine, labels: Iterable[PropSet], u: str | None = None):
    """Feed a label sequence; returns ``(final_state, rewards)``. Stops at a terminal."""
    u = rm.initial if u is None else u
    rewards = []
    for sigma in labels:
        if u in rm.terminals:
            break
        u, r = rm_step(rm, u, sigma)
        rewards.append(r)
    return u, rewards


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "info" | "warning" | "error"
    code: str
    message: str
    state: str | None = None
    sigma: PropSet | None = None


def validate_rm(rm: RewardMachine) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    n_sigma = 1 << rm.n_props
    for s in rm.states:
        es = rm.edges.get(s, ())
        uncovered = 0
        for sigma in range(n_sigma):
            fired = [i for i, e in enumerate(es) if eval_formula(e.guard, sigma)]
            if not fired:
                uncovered += 1
            elif len(fired) > 1:
                names = sorted(propset_names(rm.alphabet, sigma))
                out.append(Diagnostic(
                    "warning", "overlap",
                    f"state {s!r}: edges {fired} all fire on {{{', '.join(names)}}}; "
                    f"edge {fired[0]} wins by declaration order",
                    state=s, sigma=sigma))
        if uncovered:
            out.append(Diagnostic(
                "info", "non-total",
                f"state {s!r}: {uncovered} of {n_sigma} assignments take the implicit self-loop",
                state=s))
    nxt, _ = rm.tables
    seen = {rm.u0}
    todo = deque([rm.u0])
    while todo:
        v = todo.popleft()
        if v >= rm.n_states:
            continue
        for w in set(nxt[v].tolist()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    for i, name in enumerate(rm.nodes):
        if i not in seen:
            out.append(Diagnostic("warning", "unreachable",
                                  f"{name!r} is unreachable from {rm.initial!r}", state=name))
    return out


def format_rm(rm: RewardMachine) -> str:
    lines = ["props " + " ".join(p.name for p in rm.alphabet) + ";"]
    for s in rm.states:
        lines.append(f"state {s}{' init' if s == rm.initial else ''};")
    for t in rm.terminals:
        lines.append(f"terminal {t};")
    for s in rm.states:
        for e in rm.edges.get(s, ()):
            lines.append(f"edge {s} : {format_formula(e.guard)} -> {e.target} @ {float(e.reward)!r};")
    return "\n".join(lines) + "\n"
