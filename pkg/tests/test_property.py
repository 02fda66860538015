"""Letter predicates, LTL translation, closure, and the property decider."""

import itertools

import pytest

from paramck.core import (
    CDSystem,
    EPS_C,
    EPS_L,
    FiniteTS,
    LimitExceeded,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    TOP,
    cact,
    cr,
    cw,
    lact,
    lr,
    lw,
)
from paramck.decide import (
    decide_max_safe,
    decide_reach,
    decide_repeated_reach,
    decide_universal_reach,
)
from paramck.property import (
    ActionClass,
    Atom,
    BuchiProperty,
    Eventually,
    Globally,
    Guard,
    Implies,
    Next,
    Not,
    NotSupported,
    Or,
    Release,
    TrueFormula,
    Until,
    bounded_language,
    class_of,
    decide_property,
    expand_closure,
    ltl_holds_finite,
    ltl_holds_lasso,
    ltl_to_buchi,
    nnf,
    parse_action_class,
    parse_ltl,
    property_avoid,
    property_reach,
    property_repeated_reach,
)
from refsys import ping_loop, stall_pair, write_then_check


# ---------------------------------------------------------------------------
# Letter predicates.


def test_action_class_matching():
    anything = ActionClass()
    assert anything.matches(lw("0"))
    assert anything.matches(cr("1"))
    assert anything.matches(lact("top"))
    assert not anything.matches(EPS_L)
    assert not anything.matches(EPS_C)

    leader_writes = ActionClass(role="leader", kind="write")
    assert leader_writes.matches(lw("0"))
    assert leader_writes.matches(lw("1"))
    assert not leader_writes.matches(cw("0"))
    assert not leader_writes.matches(lr("0"))

    exact = class_of(cr("1"))
    assert exact.matches(cr("1"))
    assert not exact.matches(cr("0"))
    assert not exact.matches(lr("1"))


def test_class_of_rejects_silent_steps():
    with pytest.raises(ValueError):
        class_of(EPS_L)


def test_parse_action_class():
    assert parse_action_class("any") == ActionClass()
    assert parse_action_class("C:any") == ActionClass(role="contributor")
    assert parse_action_class("D:any") == ActionClass(role="leader")
    assert parse_action_class("C:w(0)") == ActionClass("contributor", "write", "0")
    assert parse_action_class("D:r(1)") == ActionClass("leader", "read", "1")
    assert parse_action_class("D:act(top)") == ActionClass("leader", "internal", "top")
    assert parse_action_class("D:w(any)") == ActionClass("leader", "write", None)
    for bad in ("", "E:w(0)", "C:w()", "C:jump(0)", "w(0)", "C:w(0) extra"):
        with pytest.raises(ValueError):
            parse_action_class(bad)


def test_parse_action_class_roundtrips_pretty():
    for text in ("any", "C:any", "D:w(0)", "C:r(any)", "D:act(top)"):
        assert parse_action_class(text).pretty() == text


def test_guard_require_and_forbid():
    g = Guard(
        require=(ActionClass(role="leader"),),
        forbid=(class_of(lact("top")),),
    )
    assert g.matches(lw("0"))
    assert not g.matches(lact("top"))
    assert not g.matches(cw("0"))
    assert not g.matches(EPS_L)


# ---------------------------------------------------------------------------
# Property automata.


def test_buchi_property_validates_states():
    with pytest.raises(ValueError):
        BuchiProperty(["a"], [], "missing")
    with pytest.raises(ValueError):
        BuchiProperty(["a"], [("a", ActionClass(), "ghost")], "a")
    with pytest.raises(ValueError):
        BuchiProperty(["a"], [], "a", final=["ghost"])
    with pytest.raises(TypeError):
        BuchiProperty(["a"], [("a", "not-a-guard", "a")], "a")


def test_buchi_property_runs():
    p = property_reach(TOP)
    assert not p.accepts_finite(())
    assert not p.accepts_finite((lw("0"), cr("0")))
    assert p.accepts_finite((lw("0"), TOP))
    assert p.accepts_lasso((TOP,), (lw("0"),))
    assert not p.accepts_lasso((), (lw("0"),))
    with pytest.raises(ValueError):
        p.accepts_lasso((TOP,), ())


def test_repeated_reach_encoding_needs_recurrence():
    p = property_repeated_reach(cw("1"))
    assert not p.accepts_finite((cw("1"),))
    assert p.accepts_lasso((), (cw("1"),))
    assert p.accepts_lasso((lw("0"),), (cw("1"), lw("0")))
    assert not p.accepts_lasso((cw("1"),), (lw("0"),))


# ---------------------------------------------------------------------------
# Formula parsing and normal form.


def test_parser_precedence():
    f = parse_ltl("D:w(0) -> C:r(1) | D:w(0) & F D:act(top)")
    assert isinstance(f, Implies)
    assert isinstance(f.right, Or)
    a = parse_ltl("D:w(0) U C:r(1) U D:act(top)")
    assert isinstance(a, Until)
    assert isinstance(a.right, Until)
    g = parse_ltl("!F D:w(0)")
    assert isinstance(g, Not) and isinstance(g.sub, Eventually)


def test_parser_errors():
    for bad in ("", "&", "D:w(0) |", "(D:w(0)", "D:w(0) D:r(1)", "C:w()"):
        with pytest.raises(ValueError):
            parse_ltl(bad)


def test_next_operator_rejected():
    with pytest.raises(ValueError, match="not count steps"):
        parse_ltl("X D:w(0)")
    with pytest.raises(ValueError, match="not count steps"):
        nnf(Next(TrueFormula()))


def test_nnf_shapes():
    a = Atom(parse_action_class("D:w(0)"))
    b = Atom(parse_action_class("C:r(1)"))
    assert nnf(Not(Until(a, b))) == Release(Not(a), Not(b))
    assert nnf(Globally(a)) == Release(nnf(parse_ltl("false")), a)
    assert nnf(Eventually(a)) == Until(TrueFormula(), a)
    assert nnf(Not(Not(a))) == a
    assert nnf(Until(a, parse_ltl("false"))) == nnf(parse_ltl("false"))


def test_finite_evaluator_on_empty_word():
    # The empty word settles quantifiers with no positions: universal
    # forms hold, existential forms fail.
    assert ltl_holds_finite(parse_ltl("G false"), ())
    assert ltl_holds_finite(parse_ltl("G !any"), ())
    assert not ltl_holds_finite(parse_ltl("F any"), ())
    assert not ltl_holds_finite(parse_ltl("any"), ())
    assert ltl_holds_finite(parse_ltl("true"), ())


def test_finite_evaluator_hand_values():
    w = (lw("0"), cr("1"), lact("top"))
    assert ltl_holds_finite(parse_ltl("D:w(0) U C:r(1)"), w)
    assert ltl_holds_finite(parse_ltl("F D:act(top)"), w)
    assert not ltl_holds_finite(parse_ltl("G D:w(0)"), w)
    assert ltl_holds_finite(parse_ltl("G D:w(0)"), (lw("0"), lw("0")))
    assert not ltl_holds_finite(parse_ltl("F C:w(any)"), w)


def test_lasso_evaluator_hand_values():
    assert ltl_holds_lasso(parse_ltl("G F D:w(0)"), (cr("1"),), (lw("0"),))
    assert not ltl_holds_lasso(parse_ltl("G F D:w(0)"), (lw("0"),), (cr("1"),))
    assert ltl_holds_lasso(parse_ltl("F G C:r(1)"), (lw("0"),), (cr("1"),))
    assert not ltl_holds_lasso(parse_ltl("G false"), (), (lw("0"),))


# ---------------------------------------------------------------------------
# Translation battery: automaton acceptance must agree with the direct
# evaluators, on every finite word of length <= 5 over a three-letter
# alphabet and on a sample of lassos.

BATTERY_ALPHABET = (lw("0"), cr("1"), lact("top"))

BATTERY_FORMULAS = [
    "D:w(0)",
    "!D:w(0)",
    "true",
    "false",
    "D:w(0) | C:r(1)",
    "D:w(0) & !C:r(1)",
    "F D:w(0)",
    "G D:w(0)",
    "D:w(0) U C:r(1)",
    "D:w(0) R C:r(1)",
    "G F D:act(top)",
    "F G D:w(0)",
    "G (D:w(0) -> F C:r(1))",
    "D:w(0) U (C:r(1) U D:act(top))",
    "G !D:act(top) & G F D:w(any)",
    "(F D:act(top)) -> (C:r(1) R !D:w(0))",
    "F (D:w(0) & (C:any U D:act(top)))",
]


@pytest.mark.parametrize("text", BATTERY_FORMULAS)
def test_translation_matches_evaluator(text):
    f = parse_ltl(text)
    aut = ltl_to_buchi(f)
    for n in range(6):
        for word in itertools.product(BATTERY_ALPHABET, repeat=n):
            assert aut.accepts_finite(word) == ltl_holds_finite(f, word), word
    for pn in range(2):
        for prefix in itertools.product(BATTERY_ALPHABET, repeat=pn):
            for ln in range(1, 3):
                for loop in itertools.product(BATTERY_ALPHABET, repeat=ln):
                    want = ltl_holds_lasso(f, prefix, loop)
                    assert aut.accepts_lasso(prefix, loop) == want, (prefix, loop)


def test_translation_g_true_accepts_everything():
    aut = ltl_to_buchi(parse_ltl("G true"))
    assert aut.accepts_finite(())
    for n in range(5):
        for word in itertools.product(BATTERY_ALPHABET, repeat=n):
            assert aut.accepts_finite(word)
    for loop in itertools.product(BATTERY_ALPHABET, repeat=2):
        assert aut.accepts_lasso((), loop)


def test_translation_eventually_is_containment():
    aut = ltl_to_buchi(parse_ltl("F D:act(top)"))
    for n in range(5):
        for word in itertools.product(BATTERY_ALPHABET, repeat=n):
            assert aut.accepts_finite(word) == (TOP in word)


def test_translation_g_false_accepts_only_the_empty_word():
    aut = ltl_to_buchi(parse_ltl("G false"))
    assert aut.accepts_finite(())
    for n in range(1, 4):
        for word in itertools.product(BATTERY_ALPHABET, repeat=n):
            assert not aut.accepts_finite(word)
        for loop in itertools.product(BATTERY_ALPHABET, repeat=n):
            assert not aut.accepts_lasso((), loop)


def test_translation_size_cap():
    text = " | ".join(f"D:act(x{i})" for i in range(9))
    with pytest.raises(LimitExceeded):
        ltl_to_buchi(parse_ltl(text))


# ---------------------------------------------------------------------------
# Replication closure.

MIXED_LETTERS = (lw("0"), cw("1"), cr("0"))


def test_closure_of_one_contributor_write():
    base = BuchiProperty(
        ["a", "b"], [("a", class_of(cw("0")), "b")], "a", final=["b"]
    )
    closed = expand_closure(base, [cw("0"), cw("1"), cr("0")])
    letters = (cw("0"), cw("1"), cr("0"))
    for n in range(7):
        for word in itertools.product(letters, repeat=n):
            want = n >= 1 and all(a == cw("0") for a in word)
            assert closed.accepts_finite(word) == want, word


def test_closure_keeps_contributor_oblivious_language():
    # Contributor letters already loop in place here, so replicating them
    # adds nothing.
    base = BuchiProperty(
        ["s", "t"],
        [
            ("s", ActionClass(role="leader"), "t"),
            ("t", ActionClass(), "t"),
            ("s", ActionClass(role="contributor"), "s"),
        ],
        "s",
        final=["t"],
        repeating=["t"],
    )
    before = bounded_language(base, MIXED_LETTERS, 6)
    after = bounded_language(expand_closure(base, MIXED_LETTERS), MIXED_LETTERS, 6)
    assert before == after
    assert len(before) == 966


def test_closure_of_empty_language_is_empty():
    empty = BuchiProperty(["z"], [], "z")
    closed = expand_closure(empty, MIXED_LETTERS)
    assert bounded_language(closed, MIXED_LETTERS, 4) == frozenset()


def test_closure_extensive_and_idempotent():
    base = BuchiProperty(
        ["a", "b", "c"],
        [
            ("a", class_of(cw("1")), "b"),
            ("b", class_of(lw("0")), "c"),
            ("c", class_of(cr("0")), "a"),
        ],
        "a",
        final=["c"],
        repeating=["a"],
    )
    once = expand_closure(base, MIXED_LETTERS)
    twice = expand_closure(once, MIXED_LETTERS)
    lang_base = bounded_language(base, MIXED_LETTERS, 5)
    lang_once = bounded_language(once, MIXED_LETTERS, 5)
    assert lang_base <= lang_once
    assert lang_once == bounded_language(twice, MIXED_LETTERS, 5)
    assert (len(lang_base), len(lang_once)) == (2, 5)


# ---------------------------------------------------------------------------
# The decision pipeline against the direct deciders.


@pytest.mark.parametrize("make", [write_then_check, ping_loop, stall_pair])
@pytest.mark.parametrize("action", [TOP, lr("1")])
def test_encodings_agree_with_direct_deciders(make, action):
    sys_ = make()
    assert (
        decide_property(sys_, property_reach(action)).answer
        == decide_reach(sys_, action).answer
    )
    assert (
        decide_property(sys_, property_repeated_reach(action)).answer
        == decide_repeated_reach(sys_, action).answer
    )
    avoid = decide_property(sys_, property_avoid(action)).answer
    assert avoid == decide_max_safe(sys_, action).answer
    assert (avoid == "No") == (decide_universal_reach(sys_, action).answer == "Yes")


def test_eventually_top_holds_on_write_then_check():
    verdict = decide_property(write_then_check(), parse_ltl("F D:act(top)"))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "deadlock"
    assert verdict.witness is not None
    assert TOP in verdict.witness.trace


def test_avoiding_top_holds_on_stall_pair():
    verdict = decide_property(stall_pair(), parse_ltl("G !D:act(top)"))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "deadlock"
    assert TOP not in verdict.witness.trace


def test_empty_maximal_trace_satisfies_universal_formulas():
    # With zero contributors the leader deadlocks before moving, so the
    # empty trace is maximal and every universally quantified formula
    # holds on it vacuously, even one demanding recurrent writes.
    verdict = decide_property(
        write_then_check(), parse_ltl("G !D:act(top) & G F D:w(any)")
    )
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "deadlock-alone"
    assert verdict.witness.n == 0
    assert verdict.witness.actions == ()


def test_no_nonempty_trace_writes_forever_silently():
    # Restricting the same formula to nonempty traces flips the verdict:
    # the leader of this system cannot write at all.
    for text in (
        "any & G !D:act(top) & G F D:w(any)",
        "(F any) & G !D:act(top) & G F D:w(any)",
    ):
        assert decide_property(write_then_check(), parse_ltl(text)).answer == "No"


def test_recurrent_write_found_by_signal_branch():
    verdict = decide_property(ping_loop(), property_repeated_reach(cw("1")))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "repeating-signal"
    assert verdict.witness is not None
    assert verdict.witness.kind == "lasso"
    assert cw("1") in verdict.witness.loop_trace


def _one_shot_reader_leader():
    return PushdownSystem(
        ["t0", "t1"],
        ["Z"],
        [PdsRule("t0", "Z", lr("1"), "t1", ("Z",))],
        "t0",
        "Z",
    )


def test_branch_leader_silent_spin():
    leader = PushdownSystem(
        ["t0", "t1"],
        ["Z"],
        [
            PdsRule("t0", "Z", lr("1"), "t1", ("Z",)),
            PdsRule("t1", "Z", EPS_L, "t1", ("Z",)),
        ],
        "t0",
        "Z",
    )
    contrib = FiniteTS(["s0", "s1"], [("s0", cw("1"), "s1")], "s0")
    sys_ = CDSystem(RegisterDomain(["0", "1"]), contrib, leader)
    verdict = decide_property(sys_, parse_ltl("F C:w(1)"))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "leader-silent-spin"
    assert decide_property(sys_, parse_ltl("F D:act(top)")).answer == "No"


def test_branch_contributor_silent_spin():
    leader = PushdownSystem(
        ["t0", "t1"],
        ["Z"],
        [
            PdsRule("t0", "Z", lr("1"), "t1", ("Z",)),
            PdsRule("t1", "Z", lw("0"), "t0", ("Z",)),
        ],
        "t0",
        "Z",
    )
    contrib = FiniteTS(
        ["s0", "s1"], [("s0", cw("1"), "s1"), ("s1", EPS_C, "s1")], "s0"
    )
    sys_ = CDSystem(RegisterDomain(["0", "1"]), contrib, leader)
    verdict = decide_property(sys_, parse_ltl("F C:w(1)"))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "contributor-silent-spin"
    assert decide_property(sys_, parse_ltl("F D:act(top)")).answer == "No"


def test_branch_deadlock_alone():
    # Any present contributor can always move, so only the leader running
    # alone deadlocks; the run avoiding contributor writes is that one.
    contrib = FiniteTS(
        ["s0", "s1"], [("s0", cw("1"), "s1"), ("s1", cw("1"), "s0")], "s0"
    )
    sys_ = CDSystem(RegisterDomain(["0", "1"]), contrib, _one_shot_reader_leader())
    verdict = decide_property(sys_, parse_ltl("G !C:w(1)"))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "deadlock-alone"
    assert verdict.witness.n == 0


# ---------------------------------------------------------------------------
# A small agreement protocol: contributors propose a value, the leader
# commits to one (read or spontaneous) and then uses it forever.


def make_agreement(stallable=False):
    rules = [
        PdsRule("t0", "Z", lr("p0"), "c0", ("Z",)),
        PdsRule("t0", "Z", lr("p1"), "c1", ("Z",)),
        PdsRule("t0", "Z", lact("choose0"), "u0", ("Z",)),
        PdsRule("c0", "Z", lact("choose0"), "u0", ("Z",)),
        PdsRule("c1", "Z", lact("choose1"), "u1", ("Z",)),
        PdsRule("u0", "Z", lact("use0"), "u0", ("Z",)),
        PdsRule("u1", "Z", lact("use1"), "u1", ("Z",)),
    ]
    if stallable:
        rules.append(PdsRule("t0", "Z", lact("stall"), "t0", ("Z",)))
    leader = PushdownSystem(
        ["t0", "c0", "c1", "u0", "u1"], ["Z"], rules, "t0", "Z"
    )
    contrib = FiniteTS(
        ["s0", "s1"], [("s0", cw("p0"), "s1"), ("s0", cw("p1"), "s1")], "s0"
    )
    return CDSystem(RegisterDomain(["0", "p0", "p1"]), contrib, leader)


NEVER_CHOOSES = "G (!D:act(choose0) & !D:act(choose1))"


def test_agreement_always_decides():
    sys_ = make_agreement()
    assert decide_property(sys_, parse_ltl(NEVER_CHOOSES)).answer == "No"
    verdict = decide_property(sys_, parse_ltl("F D:act(choose0)"))
    assert verdict.answer == "Yes"
    assert lact("choose0") in verdict.witness.trace


def test_agreement_with_stall_can_dodge_deciding():
    verdict = decide_property(make_agreement(stallable=True), parse_ltl(NEVER_CHOOSES))
    assert verdict.answer == "Yes"
    assert verdict.stats["branch"] == "repeating-signal"
    assert verdict.witness.kind == "lasso"
    assert verdict.witness.loop_trace == (lact("stall"),)


# ---------------------------------------------------------------------------
# Refusals.


def test_contributor_internal_actions_rejected():
    contrib = FiniteTS(["s0"], [("s0", cact("tick"), "s0")], "s0")
    sys_ = CDSystem(RegisterDomain(["0", "1"]), contrib, _one_shot_reader_leader())
    with pytest.raises(NotSupported):
        decide_property(sys_, parse_ltl("F C:w(1)"))


def test_property_alphabet_mismatch_rejected():
    with pytest.raises(ValueError, match="alphabet mismatch"):
        decide_property(write_then_check(), parse_ltl("F C:w(9)"))
