"""Hypothesis strategies shared by the property suites.

Machines and formulas are decoded from a flat byte string rather than built
with ``st.recursive``: drawing one ``binary`` value is far cheaper, and
shrinking the bytes towards zero still shrinks towards small, simple machines.
"""
from hypothesis import strategies as st

from rmu.machine import And, Const, Lit, Not, Or, RewardMachine, RmEdge, make_alphabet

REWARD_VALUES = (0.0, 1.0, -1.0, 0.5, -0.05, 2.0, 1e-3, -7.25, 3.0, 0.1, 1e6, -0.0)


class _Bytes:
    def __init__(self, data: bytes):
        self.data = data
        self.i = 0

    def next(self, n: int) -> int:
        """A value in ``range(n)``; zero once the input runs out."""
        if self.i >= len(self.data):
            return 0
        v = self.data[self.i]
        self.i += 1
        return v % n


def _formula(src: _Bytes, alphabet, depth: int):
    op = src.next(6) if depth > 0 else src.next(2) + 4
    if op == 0:
        return Not(_formula(src, alphabet, depth - 1))
    if op in (1, 2):
        args = tuple(_formula(src, alphabet, depth - 1) for _ in range(2 + src.next(2)))
        return And(args) if op == 1 else Or(args)
    if op == 3 or op == 5:
        return Lit(alphabet[src.next(len(alphabet))])
    return Const(bool(src.next(2)))


def decode_formula(data: bytes, alphabet, depth: int = 3):
    return _formula(_Bytes(data), alphabet, depth)


def decode_machine(data: bytes, max_props=3, max_states=4, max_terminals=2) -> RewardMachine:
    src = _Bytes(data)
    alphabet = make_alphabet(f"p{i}" for i in range(1 + src.next(max_props)))
    states = tuple(f"s{i}" for i in range(1 + src.next(max_states)))
    terminals = tuple(f"t{i}" for i in range(src.next(max_terminals + 1)))
    nodes = states + terminals
    initial = states[src.next(len(states))]
    edges = {}
    for s in states:
        es = []
        for _ in range(src.next(4)):
            guard = _formula(src, alphabet, 2)
            es.append(RmEdge(guard, nodes[src.next(len(nodes))],
                             REWARD_VALUES[src.next(len(REWARD_VALUES))]))
        if es:
            edges[s] = tuple(es)
    return RewardMachine(alphabet, states, initial, terminals, edges)


def formulas(alphabet, depth: int = 3):
    return st.binary(max_size=48).map(lambda b: decode_formula(b, alphabet, depth))


def machines(max_props=3, max_states=4, max_terminals=2):
    return st.binary(max_size=160).map(
        lambda b: decode_machine(b, max_props, max_states, max_terminals))
