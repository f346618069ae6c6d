import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmu.dsl import (
    DuplicateStateError, RmSyntaxError, UnknownPropositionError, UnknownStateError,
    parse_formula, parse_rm,
)
from rmu.envs.mining import MINING_RM, mining_rm
from rmu.machine import (
    TRUE, RewardMachine, TerminalStepError, eval_formula, format_formula, format_rm,
    make_alphabet, propset, rm_step, run_rm, validate_rm,
)
from strategies import formulas, machines

AB = make_alphabet(["gold", "home"])


def _py_eval(text: str, names, sigma: int) -> bool:
    """Independent oracle: translate a DSL formula to a Python expression."""
    env = {n: bool(sigma >> i & 1) for i, n in enumerate(names)}
    expr = text.replace("!", " not ").replace("&", " and ").replace("|", " or ")
    expr = re.sub(r"\btrue\b", "True", re.sub(r"\bfalse\b", "False", expr))
    return eval(expr, {"__builtins__": {}}, env)


def test_mining_source_shape():
    rm = parse_rm(MINING_RM)
    assert rm.states == ("u0", "u1")
    assert rm.terminals == ("fail", "success")
    assert rm.initial == "u0"
    assert rm.edge_count() == 5
    assert sum(len(es) for es in rm.edges.values()) == 3


def test_mining_steps():
    rm = mining_rm()
    gold, home = propset(rm.alphabet, ["gold"]), propset(rm.alphabet, ["home"])
    assert rm_step(rm, "u0", gold) == ("u1", 0.0)
    assert rm_step(rm, "u1", home) == ("success", 1.0)
    assert rm_step(rm, "u0", 0) == ("u0", 0.0)
    assert rm_step(rm, "u0", home) == ("fail", 0.0)


def test_mining_label_sequence():
    rm = mining_rm()
    labels = [propset(rm.alphabet, names) for names in ([], ["gold"], [], ["home"])]
    final, rewards = run_rm(rm, labels)
    assert rewards == [0.0, 0.0, 0.0, 1.0]
    assert final == "success"


def test_state_without_edges_self_loops():
    rm = parse_rm("props gold home;\nstate u0 init;\n")
    for sigma in range(4):
        assert rm_step(rm, "u0", sigma) == ("u0", 0.0)
    assert rm.edge_count() == 1
    assert rm.completed_edges("u0")[0].guard == TRUE


def test_unknown_proposition_against_alphabet():
    src = "props gold home coal;\nstate u0 init;\nedge u0 : coal -> u0 @ 1;\n"
    with pytest.raises(UnknownPropositionError):
        parse_rm(src, AB)


def test_unknown_proposition_in_guard():
    with pytest.raises(UnknownPropositionError) as err:
        parse_rm("props gold home;\nstate u0 init;\nedge u0 : coal -> u0 @ 1;")
    assert (err.value.line, err.value.col) == (3, 11)


def test_syntax_error_position():
    with pytest.raises(RmSyntaxError) as err:
        parse_rm("props gold home;\nstate u0 init;\nedge u0 : gold & -> u0 @ 1;")
    assert (err.value.line, err.value.col) == (3, 18)
    assert str(err.value).startswith("3:18:")


def test_unknown_target_and_duplicate_state():
    with pytest.raises(UnknownStateError):
        parse_rm("props a;\nstate u0 init;\nedge u0 : a -> u9 @ 1;")
    with pytest.raises(DuplicateStateError) as err:
        parse_rm("props a;\nstate u0 init;\nterminal u0;")
    assert err.value.line == 3


def test_comments_and_decimal_rewards():
    rm = parse_rm("# header\nprops a; # alphabet\nstate u0 init;\nterminal f;\n"
                  "edge u0 : a -> f @ -0.25; # done\n")
    assert rm_step(rm, "u0", 1) == ("f", -0.25)


def test_eval_formula_examples():
    f = parse_formula("gold & !home", AB)
    assert eval_formula(f, propset(AB, ["gold"]))
    assert not eval_formula(f, propset(AB, ["gold", "home"]))
    assert eval_formula(parse_formula("true", AB), 0)


def test_operator_precedence():
    f = parse_formula("!gold | gold & home", AB)
    # parsed as (!gold) | (gold & home)
    assert [eval_formula(f, s) for s in range(4)] == [True, False, True, True]


def test_stepping_terminal_raises():
    with pytest.raises(TerminalStepError):
        rm_step(mining_rm(), "success", 0)
    with pytest.raises(TerminalStepError):
        mining_rm().step_index(2, 0)


def test_validate_mining_clean():
    assert [d for d in validate_rm(mining_rm()) if d.level in ("warning", "error")] == []


def test_validate_overlap_names_state_and_sigma():
    rm = parse_rm("props gold home;\nstate u0 init;\nstate u1;\n"
                  "edge u0 : gold -> u1 @ 0;\nedge u0 : gold & !home -> u0 @ 1;")
    overlaps = [d for d in validate_rm(rm) if d.code == "overlap"]
    assert {d.sigma for d in overlaps} == {propset(AB, ["gold"])}
    assert all(d.state == "u0" and "gold" in d.message for d in overlaps)


def test_validate_unreachable():
    rm = parse_rm("props a;\nstate u0 init;\nstate lost;\nterminal f;\nedge u0 : a -> f @ 1;")
    unreachable = [d for d in validate_rm(rm) if d.code == "unreachable"]
    assert [d.state for d in unreachable] == ["lost"]


def test_validate_reports_non_total_states():
    rm = parse_rm("props a b;\nstate u0 init;\nedge u0 : a -> u0 @ 1;")
    (d,) = [d for d in validate_rm(rm) if d.code == "non-total"]
    assert "2 of 4" in d.message


def test_rm_file_in_repo_parses():
    from pathlib import Path
    text = (Path(__file__).resolve().parents[1] / "rms" / "mining.rm").read_text()
    assert parse_rm(text) == mining_rm()


# -- properties ----------------------------------------------------------------

@given(machines())
def test_roundtrip_format_parse(rm):
    assert parse_rm(format_rm(rm)) == rm


@given(machines(), st.data())
def test_totality_and_first_match(rm, data):
    """Every (state, assignment) has exactly one outcome: the first satisfied
    guard in declaration order, else the zero-reward self-loop."""
    names = [p.name for p in rm.alphabet]
    u = data.draw(st.sampled_from(rm.states))
    sigma = data.draw(st.integers(0, (1 << rm.n_props) - 1))
    expected = (u, 0.0)
    for e in rm.edges.get(u, ()):
        if _py_eval(format_formula(e.guard), names, sigma):
            expected = (e.target, e.reward)
            break
    out = rm_step(rm, u, sigma)
    assert out == expected
    assert out.next in rm.nodes
    nxt, rew = rm.tables
    i = rm.node_index[u]
    assert (rm.nodes[nxt[i, sigma]], rew[i, sigma]) == expected
    fired = [e for e in rm.completed_edges(u) if eval_formula(e.guard, sigma)]
    assert (fired[0].target, fired[0].reward) == expected


@given(st.data())
def test_eval_formula_matches_python(data):
    alphabet = make_alphabet(["x", "y", "z"])
    f = data.draw(formulas(alphabet))
    sigma = data.draw(st.integers(0, 7))
    text = format_formula(f)
    assert eval_formula(f, sigma) == _py_eval(text, ["x", "y", "z"], sigma)
    assert parse_formula(text, alphabet) == f


def test_machine_rejects_bad_structure():
    with pytest.raises(ValueError):
        RewardMachine(AB, ("u0",), "u0", ("u0",))
    with pytest.raises(ValueError):
        RewardMachine(AB, ("u0",), "nope", ())
