from __future__ import annotations

from paramck.core import (
    CDSystem,
    Configuration,
    FiniteTS,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    TOP,
    cw,
    lact,
    lr,
    lw,
    product_leader_automaton,
    step,
    validate,
)
from refsys import ping_loop, stall_pair, write_then_check


def test_validate_well_formed():
    assert validate(write_then_check()) == []
    assert validate(ping_loop()) == []
    assert validate(stall_pair()) == []


def test_validate_unknown_register_value():
    leader = PushdownSystem(
        ["t0"], ["Z"], [PdsRule("t0", "Z", lr("9"), "t0", ("Z",))], "t0", "Z"
    )
    sys = CDSystem(RegisterDomain(["0"]), FiniteTS(["s0"], [], "s0"), leader)
    report = validate(sys)
    assert len(report) == 1
    assert "unknown register value" in report[0]


def test_validate_role_mismatch():
    contrib = FiniteTS(["s0"], [("s0", lw("0"), "s0")], "s0")
    leader = PushdownSystem(["t0"], ["Z"], [], "t0", "Z")
    sys = CDSystem(RegisterDomain(["0"]), contrib, leader)
    report = validate(sys)
    assert len(report) == 1
    assert "role mismatch" in report[0]


def test_step_write_then_check_initial():
    sys = write_then_check()
    succs = step(sys, sys.initial_config(1))
    assert succs == [
        (cw("1"), Configuration(("s1",), ("t0", ("Z",)), "1")),
    ]


def test_step_read_guard():
    sys = write_then_check()
    # at register 0 the leader's read of 1 must not appear
    actions = [a for a, _ in step(sys, sys.initial_config(1))]
    assert lr("1") not in actions
    after_write = Configuration(("s1",), ("t0", ("Z",)), "1")
    actions = [a for a, _ in step(sys, after_write)]
    assert actions == [lr("1")]


def test_step_no_contributors_no_leader_rules():
    leader = PushdownSystem(["t0"], ["Z"], [], "t0", "Z")
    contrib = FiniteTS(["s0"], [("s0", cw("0"), "s0")], "s0")
    sys = CDSystem(RegisterDomain(["0"]), contrib, leader)
    assert step(sys, sys.initial_config(0)) == []


def test_step_preserves_multiset_size_and_is_deterministic():
    sys = ping_loop()
    c = sys.initial_config(3)
    seen = [c]
    for _ in range(4):
        succs = step(sys, seen[-1])
        assert succs == step(sys, seen[-1])
        for _, c2 in succs:
            assert len(c2.contributors) == 3
        seen.append(succs[0][1])


def test_step_reads_keep_register_writes_set_it():
    sys = ping_loop()
    c = Configuration(("s0",), ("t0", ("Z",)), "1")
    for a, c2 in step(sys, c):
        if a.kind == "read":
            assert c2.register == c.register
        if a.kind == "write":
            assert c2.register == a.value


class _Prop:
    def __init__(self, states, initial, repeating, final, succ):
        self.states = frozenset(states)
        self.initial = initial
        self.repeating = frozenset(repeating)
        self.final = frozenset(final)
        self._succ = succ

    def successors(self, state, action):
        return self._succ(state, action)


def test_product_with_universal_one_state_property():
    leader = write_then_check().leader
    prop = _Prop(["p"], "p", ["p"], ["p"], lambda s, a: ["p"])
    product = product_leader_automaton(leader, prop)
    reachable_leader_states = {"t0", "t1", "t2"}
    assert {q for q, _ in product.pds.states} == reachable_leader_states
    assert product.repeating == product.pds.states
    assert len(product.pds.rules) == len(leader.rules)


def test_product_with_empty_property():
    leader = write_then_check().leader
    prop = _Prop([], None, [], [], lambda s, a: [])
    product = product_leader_automaton(leader, prop)
    assert product.repeating == frozenset()
    assert product.final == frozenset()
    assert product.pds.rules == ()


def test_product_parity_hand_check():
    leader = write_then_check().leader

    def succ(state, action):
        if action == TOP:
            return ["odd" if state == "even" else "even"]
        return [state]

    prop = _Prop(["even", "odd"], "even", ["odd"], [], succ)
    product = product_leader_automaton(leader, prop)
    assert product.pds.states == {("t0", "even"), ("t1", "even"), ("t2", "odd")}
    assert set(product.pds.rules) == {
        PdsRule(("t0", "even"), "Z", lr("1"), ("t1", "even"), ("Z",)),
        PdsRule(("t1", "even"), "Z", TOP, ("t2", "odd"), ("Z",)),
    }
    assert product.repeating == {("t2", "odd")}


def test_internal_actions_do_not_touch_register():
    leader = PushdownSystem(
        ["t0"], ["Z"], [PdsRule("t0", "Z", lact("ping"), "t0", ("Z",))], "t0", "Z"
    )
    sys = CDSystem(RegisterDomain(["0", "1"]), FiniteTS(["s0"], [], "s0"), leader)
    c = Configuration((), ("t0", ("Z",)), "1")
    assert step(sys, c) == [(lact("ping"), c)]
