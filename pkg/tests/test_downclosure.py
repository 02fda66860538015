"""Subword closure of pushdown languages, checked at desk scale."""

import itertools
import random

import pytest

from paramck.core import PdsRule, PushdownSystem
from paramck.downclosure import Nfa, downward_closure, is_subword


def test_is_subword_basics():
    assert is_subword("ab", "acb")
    assert not is_subword("ba", "ab")
    assert is_subword("", "anything")
    assert is_subword((), ())
    assert is_subword("aa", "abab")
    assert not is_subword("bbaa", "ababab")
    assert is_subword("bbaa", "abababab")


def pda_language_upto(pda, accepting, maxlen, stack_cap=10, step_cap=2000):
    """Words of length <= maxlen labelling runs into an accepting control.

    Exploration clips at stack_cap / step_cap; large enough for these tests.
    """
    accepting = set(accepting)
    out = set()
    start = (pda.init_state, (pda.init_stack,))
    seen = {(start, ())}
    frontier = [(start, ())]
    steps = 0
    while frontier and steps < step_cap:
        (state, stack), word = frontier.pop()
        steps += 1
        if state in accepting:
            out.add(word)
        for action, target, new_stack in pda.moves(state, stack):
            silent = action is None or getattr(action, "is_eps", False)
            new_word = word if silent else word + (action,)
            if len(new_word) > maxlen or len(new_stack) > stack_cap:
                continue
            item = ((target, new_stack), new_word)
            if item not in seen:
                seen.add(item)
                frontier.append(item)
    return out


def anbn_pda():
    """Accepts a^n b^n for n >= 1, by reaching control f."""
    rules = [
        PdsRule("p", "Z", "a", "p1", ("A", "Z")),
        PdsRule("p1", "A", "a", "p1", ("A", "A")),
        PdsRule("p1", "A", "b", "q", ()),
        PdsRule("q", "A", "b", "q", ()),
        PdsRule("q", "Z", None, "f", ("Z",)),
    ]
    return PushdownSystem(["p", "p1", "q", "f"], ["Z", "A"], rules, "p", "Z")


def words_over(letters, maxlen):
    for n in range(maxlen + 1):
        yield from itertools.product(letters, repeat=n)


def test_anbn_closure_is_a_star_b_star():
    pda = anbn_pda()
    nfa = downward_closure(pda, ["f"])
    in_l = pda_language_upto(pda, ["f"], 10)
    for w in words_over("ab", 5):
        expected = any(is_subword(w, v) for v in in_l)
        assert nfa.accepts(w) == expected, w
        # the expected shape is exactly a*b*
        assert expected == (list(w) == sorted(w))


def test_empty_language():
    pda = anbn_pda()
    nfa = downward_closure(pda, [])
    assert nfa.is_empty()
    assert not nfa.accepts(())
    unreachable = downward_closure(pda, ["nowhere"])
    assert unreachable.is_empty()


def test_epsilon_only_language():
    # no rules at all: the only run is the empty one, sitting in the
    # accepting initial control
    pda = PushdownSystem(["p"], ["Z"], [], "p", "Z")
    nfa = downward_closure(pda, ["p"])
    assert nfa.accepts(())
    assert not nfa.accepts(("a",))
    assert not nfa.is_empty()


def nfa_with_skips(pda, accepting):
    """Direct subword closure of a stack-free pushdown: skip every letter."""
    transitions = []
    for r in pda.rules:
        assert r.push == (r.top,), "stack-free means every rule keeps its top"
        silent = r.action is None
        transitions.append((r.state, None if silent else r.action, r.target))
        transitions.append((r.state, None, r.target))
    return Nfa(pda.states, transitions, pda.init_state, accepting)


def random_stackfree_pda(rng):
    n = rng.randint(2, 4)
    states = [f"s{i}" for i in range(n)]
    letters = ["a", "b", "c"][: rng.randint(2, 3)]
    rules = []
    for _ in range(rng.randint(3, 8)):
        a = rng.choice(letters + [None])
        rules.append(PdsRule(rng.choice(states), "Z", a, rng.choice(states), ("Z",)))
    accepting = [s for s in states if rng.random() < 0.5] or [states[-1]]
    return PushdownSystem(states, ["Z"], rules, states[0], "Z"), accepting


@pytest.mark.parametrize("seed", range(12))
def test_regular_case_matches_direct_closure(seed):
    rng = random.Random(seed)
    pda, accepting = random_stackfree_pda(rng)
    nfa = downward_closure(pda, accepting)
    direct = nfa_with_skips(pda, accepting)
    letters = {a for _, a, _ in direct.transitions if a is not None}
    for w in words_over(sorted(letters | {"z"}), 4):
        assert nfa.accepts(w) == direct.accepts(w), (seed, w)


def random_pda(rng):
    """Small pushdown acceptor with genuine pushes and pops."""
    n = rng.randint(2, 4)
    states = [f"s{i}" for i in range(n)]
    stack = ["Z", "A"][: rng.randint(1, 2)]
    letters = ["a", "b"]
    rules = []
    for _ in range(rng.randint(4, 9)):
        a = rng.choice(letters + [None])
        top = rng.choice(stack)
        shape = rng.random()
        if shape < 0.3:
            push = ()
        elif shape < 0.65:
            push = (rng.choice(stack),)
        else:
            push = (rng.choice(stack), top)
        rules.append(PdsRule(rng.choice(states), top, a, rng.choice(states), push))
    accepting = [s for s in states if rng.random() < 0.4] or [states[-1]]
    return PushdownSystem(states, stack, rules, states[0], stack[0]), accepting


@pytest.mark.parametrize("seed", range(15))
def test_bounded_containment_and_closure(seed):
    rng = random.Random(100 + seed)
    pda, accepting = random_pda(rng)
    nfa = downward_closure(pda, accepting)
    language = pda_language_upto(pda, accepting, 5)
    # containment: every accepted word is in the closure
    for v in language:
        assert nfa.accepts(v), (seed, v)
        # subword-closedness, sampled on all subwords of accepted words
        for k in range(len(v)):
            assert nfa.accepts(v[:k] + v[k + 1:]), (seed, v, k)


@pytest.mark.parametrize("seed", range(15))
def test_bounded_completeness(seed):
    # every short word the closure accepts embeds into a real word of the
    # pushdown; search bound 12 is ample for these sizes
    bound = 12
    rng = random.Random(100 + seed)
    pda, accepting = random_pda(rng)
    nfa = downward_closure(pda, accepting)
    language = pda_language_upto(pda, accepting, bound)
    for w in nfa.language_upto(3):
        assert any(is_subword(w, v) for v in language), (seed, w)
