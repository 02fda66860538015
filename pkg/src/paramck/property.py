"""Trace properties over system letters and their decision pipeline.

A property is an automaton over the visible letters of a system, with two
acceptance sets: a finite maximal trace is accepted when the automaton can
end in a final state after reading it, an infinite one when some run visits
a repeating state infinitely often.  Properties can also be written in a
next-free linear temporal logic; formulas are translated by a small
declarative tableau.

Finite words get the strong semantics: an until (and so an eventually)
needs a witnessing position inside the word, an always is bounded by the
end of the word, and an atom is false on the empty word.  The translation
and the direct evaluator in this module agree on that choice.

Deciding whether some maximal trace satisfies a property rewrites the
system so contributors interact through the leader, synchronizes the
rewritten leader with the property, and splits on trace shape.  Finite
maximal traces are found through the end-of-run machinery of the rewrite
plus a deadlock and silent-divergence scan over the synchronized system;
infinite ones by marking visits to repeating states with writes of a fresh
register value and asking whether that write can repeat forever.  Because
the rewrite may serve one acknowledgment to several identical copies at
once, properties must not distinguish a contributor letter from its
immediate repetitions; they are closed under such replication up front
unless the caller vouches for that.
"""

from __future__ import annotations

import re
import time
from collections import deque
from dataclasses import dataclass
from itertools import product as iter_product
from typing import NamedTuple, Optional

from .core import (
    Action,
    CDSystem,
    CONTRIBUTOR,
    KIND_EPS,
    KIND_INTERNAL,
    KIND_READ,
    KIND_WRITE,
    LEADER,
    LimitExceeded,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    _register_effect,
    cr,
    cw,
    lw,
    product_leader_automaton,
    trace_of,
)
from .decide import (
    DEFAULT_CONFIRM,
    SetReachTable,
    Verdict,
    _divergence_pre,
    _leader_alone_automaton,
    _product_nonempty,
    _self_covering_heads,
    _tracked_view,
    decide_repeated_reach,
)
from .downclosure import _sccs
from .explicit import (
    Bounds,
    Witness,
    _absolute_loop,
    _loop_search,
    _sig,
    _walk_back,
    explore_configs,
    is_deadlock,
)
from .transform import lift_property, maximality_preserving, simplify


# ---------------------------------------------------------------------------
# Letters and letter predicates.


_ROLE_TAGS = {"C": CONTRIBUTOR, "D": LEADER}
_KIND_TAGS = {"w": KIND_WRITE, "r": KIND_READ, "act": KIND_INTERNAL}
_TAG_OF_ROLE = {v: k for k, v in _ROLE_TAGS.items()}
_TAG_OF_KIND = {v: k for k, v in _KIND_TAGS.items()}


@dataclass(frozen=True)
class ActionClass:
    """One predicate over letters; unset fields match anything.

    Silent steps are not letters, so no class ever matches them.
    """

    role: Optional[str] = None
    kind: Optional[str] = None
    value: Optional[str] = None

    def matches(self, action: Action) -> bool:
        if action.is_eps:
            return False
        if self.role is not None and action.role != self.role:
            return False
        if self.kind is not None and action.kind != self.kind:
            return False
        if self.value is not None and action.value != self.value:
            return False
        return True

    def pretty(self) -> str:
        if self.role is None:
            return "any"
        tag = _TAG_OF_ROLE[self.role]
        if self.kind is None:
            return f"{tag}:any"
        return f"{tag}:{_TAG_OF_KIND[self.kind]}({self.value or 'any'})"


def class_of(action: Action) -> ActionClass:
    """The class matching exactly this letter."""
    if action.is_eps:
        raise ValueError("silent steps are not letters")
    return ActionClass(action.role, action.kind, action.value)


def parse_action_class(text: str) -> ActionClass:
    t = text.strip()
    if t == "any":
        return ActionClass()
    m = re.fullmatch(r"([CD]):any", t)
    if m:
        return ActionClass(role=_ROLE_TAGS[m.group(1)])
    m = re.fullmatch(r"([CD]):(w|r|act)\(([^()\s]*)\)", t)
    if m is None:
        raise ValueError(f"cannot read action class: {text!r}")
    value = m.group(3)
    if not value:
        raise ValueError(f"action class needs a value or 'any': {text!r}")
    if value == "any":
        value = None
    return ActionClass(_ROLE_TAGS[m.group(1)], _KIND_TAGS[m.group(2)], value)


class Guard(NamedTuple):
    """Conjunction of letter predicates labeling one property transition."""

    require: tuple = ()
    forbid: tuple = ()

    def matches(self, action: Action) -> bool:
        if action.is_eps:
            return False
        return all(c.matches(action) for c in self.require) and not any(
            c.matches(action) for c in self.forbid
        )

    def pretty(self) -> str:
        parts = [c.pretty() for c in self.require]
        parts += ["!" + c.pretty() for c in self.forbid]
        return " & ".join(parts) if parts else "any"


def _as_guard(label) -> Guard:
    if isinstance(label, Guard):
        return Guard(tuple(label.require), tuple(label.forbid))
    if isinstance(label, ActionClass):
        return Guard((label,), ())
    raise TypeError(f"transition label must be a Guard or ActionClass: {label!r}")


# ---------------------------------------------------------------------------
# Property automata.


class BuchiProperty:
    """Automaton over letters with separate finite and repeating acceptance.

    A finite word is accepted when some run over it ends in a final state;
    an infinite word when some run visits a repeating state infinitely
    often.  Transitions are labeled by guards (or bare action classes) and
    may be nondeterministic.
    """

    def __init__(self, states, transitions, initial, final=(), repeating=()):
        self.states = tuple(dict.fromkeys(states))
        known = set(self.states)
        if initial not in known:
            raise ValueError(f"initial state {initial!r} not among the states")
        self.initial = initial
        norm = []
        for q1, label, q2 in transitions:
            if q1 not in known or q2 not in known:
                raise ValueError(f"transition touches unknown state: {(q1, q2)!r}")
            norm.append((q1, _as_guard(label), q2))
        self.transitions = tuple(norm)
        self.final = frozenset(final)
        self.repeating = frozenset(repeating)
        for q in sorted(self.final | self.repeating, key=repr):
            if q not in known:
                raise ValueError(f"accepting state {q!r} not among the states")
        by_source: dict = {}
        for q1, guard, q2 in self.transitions:
            by_source.setdefault(q1, []).append((guard, q2))
        self.by_source = {k: tuple(v) for k, v in by_source.items()}

    def successors(self, state, action: Action):
        out = []
        for guard, q2 in self.by_source.get(state, ()):
            if guard.matches(action) and q2 not in out:
                out.append(q2)
        return tuple(out)

    def accepts_finite(self, word) -> bool:
        current = {self.initial}
        for a in word:
            current = {q2 for q in current for q2 in self.successors(q, a)}
            if not current:
                return False
        return any(q in self.final for q in current)

    def accepts_lasso(self, prefix, loop) -> bool:
        """Does some run on prefix . loop^infinity hit repetition forever?"""
        loop = tuple(loop)
        if not loop:
            raise ValueError("lasso loop must contain at least one letter")
        current = {self.initial}
        for a in tuple(prefix):
            current = {q2 for q in current for q2 in self.successors(q, a)}
        if not current:
            return False
        length = len(loop)
        graph = {
            (q, i): {(q2, (i + 1) % length) for q2 in self.successors(q, loop[i])}
            for q in self.states
            for i in range(length)
        }
        seen = {(q, 0) for q in current}
        frontier = deque(seen)
        while frontier:
            node = frontier.popleft()
            for nxt in graph[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        for comp in _sccs(graph):
            comp = set(comp)
            if not comp & seen:
                continue
            cyclic = len(comp) > 1 or any(n in graph[n] for n in comp)
            if cyclic and any(q in self.repeating for q, _ in comp):
                return True
        return False


def property_reach(action: Action) -> BuchiProperty:
    """Accepts exactly the maximal traces in which the letter occurs."""
    cls = class_of(action)
    return BuchiProperty(
        ["before", "after"],
        [
            ("before", Guard(forbid=(cls,)), "before"),
            ("before", cls, "after"),
            ("after", ActionClass(), "after"),
        ],
        "before",
        final=["after"],
        repeating=["after"],
    )


def property_repeated_reach(action: Action) -> BuchiProperty:
    """Accepts exactly the infinite traces firing the letter forever."""
    cls = class_of(action)
    return BuchiProperty(
        ["cold", "hot"],
        [
            ("cold", Guard(forbid=(cls,)), "cold"),
            ("cold", cls, "hot"),
            ("hot", Guard(forbid=(cls,)), "cold"),
            ("hot", cls, "hot"),
        ],
        "cold",
        final=[],
        repeating=["hot"],
    )


def property_avoid(action: Action) -> BuchiProperty:
    """Accepts exactly the maximal traces in which the letter never occurs."""
    cls = class_of(action)
    return BuchiProperty(
        ["clean"],
        [("clean", Guard(forbid=(cls,)), "clean")],
        "clean",
        final=["clean"],
        repeating=["clean"],
    )


# ---------------------------------------------------------------------------
# Linear temporal logic without the next operator.


class LtlFormula:
    """Base class of formula nodes; see parse_ltl for the concrete syntax."""

    __slots__ = ()


@dataclass(frozen=True)
class TrueFormula(LtlFormula):
    pass


@dataclass(frozen=True)
class FalseFormula(LtlFormula):
    pass


@dataclass(frozen=True)
class Atom(LtlFormula):
    cls: ActionClass


@dataclass(frozen=True)
class Not(LtlFormula):
    sub: LtlFormula


@dataclass(frozen=True)
class And(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Or(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Implies(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Until(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Release(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Eventually(LtlFormula):
    sub: LtlFormula


@dataclass(frozen=True)
class Globally(LtlFormula):
    sub: LtlFormula


@dataclass(frozen=True)
class Next(LtlFormula):
    """Present so its rejection can be reported; never supported."""

    sub: LtlFormula


_NEXT_ERROR = "the next operator is not supported: properties must not count steps"

_CLASS_PATTERN = r"[CD]:(?:w|r|act)\([^()\s]*\)|[CD]:any"
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<cls>" + _CLASS_PATTERN + r")|(?P<arrow>->)|(?P<sym>[!&|()])"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ValueError(f"cannot read formula at: {rest!r}")
        pos = m.end()
        if m.group("cls"):
            tokens.append(("atom", parse_action_class(m.group("cls"))))
        elif m.group("arrow"):
            tokens.append(("->", None))
        elif m.group("sym"):
            tokens.append((m.group("sym"), None))
        else:
            tokens.append(("word", m.group("word")))
    return tokens


class _LtlParser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def formula(self) -> LtlFormula:
        left = self.disjunction()
        if self.peek()[0] == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> LtlFormula:
        left = self.conjunction()
        while self.peek()[0] == "|":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> LtlFormula:
        left = self.until()
        while self.peek()[0] == "&":
            self.take()
            left = And(left, self.until())
        return left

    def until(self) -> LtlFormula:
        left = self.unary()
        kind, word = self.peek()
        if kind == "word" and word in ("U", "R"):
            self.take()
            right = self.until()
            return Until(left, right) if word == "U" else Release(left, right)
        return left

    def unary(self) -> LtlFormula:
        kind, word = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind == "word" and word in ("G", "F", "X"):
            self.take()
            if word == "X":
                raise ValueError(_NEXT_ERROR)
            sub = self.unary()
            return Globally(sub) if word == "G" else Eventually(sub)
        return self.atom()

    def atom(self) -> LtlFormula:
        kind, payload = self.take()
        if kind == "(":
            inner = self.formula()
            if self.take()[0] != ")":
                raise ValueError("unbalanced parenthesis in formula")
            return inner
        if kind == "atom":
            return Atom(payload)
        if kind == "word":
            if payload == "true":
                return TrueFormula()
            if payload == "false":
                return FalseFormula()
            if payload == "any":
                return Atom(ActionClass())
            raise ValueError(f"unknown word in formula: {payload!r}")
        raise ValueError("formula ended unexpectedly")


def parse_ltl(text: str) -> LtlFormula:
    """Parse a formula; atoms are action classes like C:w(0) or D:act(top).

    Operators, loosest binding first: ->, |, &, U and R (right
    associative), then ! G F.  The next operator is rejected.
    """
    parser = _LtlParser(_tokenize(text))
    out = parser.formula()
    if parser.peek()[0] is not None:
        raise ValueError(f"trailing input in formula: {text!r}")
    return out


def _and(left, right):
    if isinstance(left, TrueFormula):
        return right
    if isinstance(right, TrueFormula):
        return left
    if isinstance(left, FalseFormula) or isinstance(right, FalseFormula):
        return FalseFormula()
    return And(left, right)


def _or(left, right):
    if isinstance(left, FalseFormula):
        return right
    if isinstance(right, FalseFormula):
        return left
    if isinstance(left, TrueFormula) or isinstance(right, TrueFormula):
        return TrueFormula()
    return Or(left, right)


def nnf(formula: LtlFormula, negate: bool = False) -> LtlFormula:
    """Push negations to atoms; only and/or/until/release survive.

    Eventually and globally are rewritten through until and release with
    constants.  The simplifications applied are exact on finite words
    (including the empty one) and on infinite words alike.
    """
    if isinstance(formula, TrueFormula):
        return FalseFormula() if negate else formula
    if isinstance(formula, FalseFormula):
        return TrueFormula() if negate else formula
    if isinstance(formula, Atom):
        return Not(formula) if negate else formula
    if isinstance(formula, Not):
        return nnf(formula.sub, not negate)
    if isinstance(formula, And):
        left, right = nnf(formula.left, negate), nnf(formula.right, negate)
        return _or(left, right) if negate else _and(left, right)
    if isinstance(formula, Or):
        left, right = nnf(formula.left, negate), nnf(formula.right, negate)
        return _and(left, right) if negate else _or(left, right)
    if isinstance(formula, Implies):
        return nnf(Or(Not(formula.left), formula.right), negate)
    if isinstance(formula, Until):
        left, right = nnf(formula.left, negate), nnf(formula.right, negate)
        if negate:
            return Release(left, right)
        if isinstance(right, FalseFormula):
            return FalseFormula()
        return Until(left, right)
    if isinstance(formula, Release):
        left, right = nnf(formula.left, negate), nnf(formula.right, negate)
        if negate:
            if isinstance(right, FalseFormula):
                return FalseFormula()
            return Until(left, right)
        if isinstance(right, TrueFormula):
            return TrueFormula()
        return Release(left, right)
    if isinstance(formula, Eventually):
        return nnf(Until(TrueFormula(), formula.sub), negate)
    if isinstance(formula, Globally):
        return nnf(Release(FalseFormula(), formula.sub), negate)
    if isinstance(formula, Next):
        raise ValueError(_NEXT_ERROR)
    raise TypeError(f"not a formula: {formula!r}")


def ltl_holds_finite(formula: LtlFormula, word) -> bool:
    """Direct finite-word evaluation under the strong semantics."""
    word = tuple(word)
    n = len(word)

    def ev(f, i):
        if isinstance(f, TrueFormula):
            return True
        if isinstance(f, FalseFormula):
            return False
        if isinstance(f, Atom):
            return i < n and f.cls.matches(word[i])
        if isinstance(f, Not):
            return not ev(f.sub, i)
        if isinstance(f, And):
            return ev(f.left, i) and ev(f.right, i)
        if isinstance(f, Or):
            return ev(f.left, i) or ev(f.right, i)
        if isinstance(f, Implies):
            return not ev(f.left, i) or ev(f.right, i)
        if isinstance(f, Until):
            return any(
                ev(f.right, j) and all(ev(f.left, k) for k in range(i, j))
                for j in range(i, n)
            )
        if isinstance(f, Release):
            return all(
                ev(f.right, j) or any(ev(f.left, k) for k in range(i, j))
                for j in range(i, n)
            )
        if isinstance(f, Eventually):
            return any(ev(f.sub, j) for j in range(i, n))
        if isinstance(f, Globally):
            return all(ev(f.sub, j) for j in range(i, n))
        if isinstance(f, Next):
            raise ValueError(_NEXT_ERROR)
        raise TypeError(f"not a formula: {f!r}")

    return ev(formula, 0)


def ltl_holds_lasso(formula: LtlFormula, prefix, loop) -> bool:
    """Direct evaluation on the infinite word prefix . loop^infinity."""
    prefix, loop = tuple(prefix), tuple(loop)
    if not loop:
        raise ValueError("lasso loop must contain at least one letter")
    letters = prefix + loop
    length = len(letters)
    back = len(prefix)

    def succ(i):
        return i + 1 if i + 1 < length else back

    memo: dict = {}

    def table(f):
        if f in memo:
            return memo[f]
        if isinstance(f, TrueFormula):
            vals = [True] * length
        elif isinstance(f, FalseFormula):
            vals = [False] * length
        elif isinstance(f, Atom):
            vals = [f.cls.matches(a) for a in letters]
        elif isinstance(f, Not):
            vals = [not v for v in table(f.sub)]
        elif isinstance(f, And):
            vals = [x and y for x, y in zip(table(f.left), table(f.right))]
        elif isinstance(f, Or):
            vals = [x or y for x, y in zip(table(f.left), table(f.right))]
        elif isinstance(f, Implies):
            vals = [(not x) or y for x, y in zip(table(f.left), table(f.right))]
        elif isinstance(f, (Until, Eventually)):
            hold = table(f.left) if isinstance(f, Until) else [True] * length
            goal = table(f.right if isinstance(f, Until) else f.sub)
            vals = [False] * length
            changed = True
            while changed:
                changed = False
                for i in range(length):
                    v = goal[i] or (hold[i] and vals[succ(i)])
                    if v != vals[i]:
                        vals[i] = v
                        changed = True
        elif isinstance(f, (Release, Globally)):
            hold = table(f.left) if isinstance(f, Release) else [False] * length
            goal = table(f.right if isinstance(f, Release) else f.sub)
            vals = [True] * length
            changed = True
            while changed:
                changed = False
                for i in range(length):
                    v = goal[i] and (hold[i] or vals[succ(i)])
                    if v != vals[i]:
                        vals[i] = v
                        changed = True
        elif isinstance(f, Next):
            raise ValueError(_NEXT_ERROR)
        else:
            raise TypeError(f"not a formula: {f!r}")
        memo[f] = vals
        return vals

    return table(formula)[0]


# ---------------------------------------------------------------------------
# Tableau translation.


def _subformulas(formula):
    out = []

    def walk(f):
        if isinstance(f, (And, Or, Until, Release)):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, Not):
            walk(f.sub)
        if f not in out:
            out.append(f)

    walk(formula)
    return out


_TABLEAU_SUBFORMULA_CAP = 16
_TABLEAU_STATE_CAP = 400


def ltl_to_buchi(formula: LtlFormula) -> BuchiProperty:
    """Translate a formula into an equivalent automaton.

    Equivalence holds on finite words under the strong semantics and on
    infinite words, checked against the direct evaluators in the tests.
    States are sets of subformulas claimed to hold on the rest of the
    word, plus a bookkeeping counter that cycles through the until
    subformulas so none is postponed forever.  No minimization is done.
    """
    root = nnf(formula)
    subs = _subformulas(root)
    if len(subs) > _TABLEAU_SUBFORMULA_CAP:
        raise LimitExceeded(f"formula too large for the tableau: {len(subs)} parts")

    def consistent(B):
        for f in B:
            if isinstance(f, FalseFormula):
                return False
            if isinstance(f, And) and not (f.left in B and f.right in B):
                return False
            if isinstance(f, Or) and not (f.left in B or f.right in B):
                return False
            if isinstance(f, Until) and not (f.right in B or f.left in B):
                return False
            if isinstance(f, Release) and f.right not in B:
                return False
        return True

    sets = []
    for mask in range(1 << len(subs)):
        B = frozenset(f for i, f in enumerate(subs) if mask >> i & 1)
        if consistent(B):
            sets.append(B)
    if len(sets) > _TABLEAU_STATE_CAP:
        raise LimitExceeded(f"tableau too large: {len(sets)} claim sets")

    def lits(B):
        require = tuple(f.cls for f in subs if isinstance(f, Atom) and f in B)
        forbid = tuple(
            f.sub.cls for f in subs if isinstance(f, Not) and f in B
        )
        return Guard(require, forbid)

    def next_claims(B):
        out = set()
        for f in B:
            if isinstance(f, Until) and f.right not in B:
                out.add(f)
            if isinstance(f, Release) and f.left not in B:
                out.add(f)
        return out

    def end_ok(B):
        # Leaving the word at this node is fine when no until is still
        # waiting for its goal; releases hold vacuously past the end.
        return not any(
            isinstance(f, Until) and f.right not in B for f in B
        )

    untils = [f for f in subs if isinstance(f, Until)]
    slots = max(len(untils), 1)

    def advance(B, i):
        if not untils:
            return 0
        if untils[i] not in B or untils[i].right in B:
            return (i + 1) % len(untils)
        return i

    start = "start"
    states = [start] + [(B, i) for B in sets for i in range(slots)]
    # A node holds the claim set whose first letter was just consumed, so
    # entering a node checks its literals and leaving it hands the claims
    # about the rest of the word to the next node.
    transitions = []
    for B in sets:
        obligations = next_claims(B)
        for B2 in sets:
            if obligations <= B2:
                guard = lits(B2)
                for i in range(slots):
                    transitions.append(((B, i), guard, (B2, advance(B, i))))
    for B2 in sets:
        if root in B2:
            transitions.append((start, lits(B2), (B2, 0)))

    final = [(B, i) for B in sets if end_ok(B) for i in range(slots)]
    if ltl_holds_finite(formula, ()):
        final.append(start)
    if untils:
        last = untils[-1]
        repeating = [
            (B, len(untils) - 1)
            for B in sets
            if last not in B or last.right in B
        ]
    else:
        repeating = [(B, 0) for B in sets]
    return BuchiProperty(states, transitions, start, final, repeating)


# ---------------------------------------------------------------------------
# Replication closure.


def _concrete_contributor_letters(p: BuchiProperty):
    letters = set()
    for _, guard, _ in p.transitions:
        for cls in guard.require:
            if (
                cls.role == CONTRIBUTOR
                and cls.kind in (KIND_WRITE, KIND_READ, KIND_INTERNAL)
                and cls.value is not None
            ):
                letters.add(Action(cls.role, cls.kind, cls.value))
    return letters


def expand_closure(p: BuchiProperty, alphabet=None) -> BuchiProperty:
    """Close the language under replication of contributor letters.

    Wherever a run consumes a contributor letter, the closed automaton may
    consume any number of immediate repetitions of it before continuing,
    so the smallest language containing L(p) and insensitive to how many
    identical copies performed each contributor move is accepted.

    The letters considered are the contributor letters of ``alphabet``
    when given (pass the system's concrete letters when closing for a
    decision); otherwise the contributor letters named exactly by the
    automaton's own guards, which is only an approximation for guards
    matching unnamed letters.
    """
    if alphabet is None:
        letters = _concrete_contributor_letters(p)
    else:
        letters = {
            a for a in alphabet if a.role == CONTRIBUTOR and not a.is_eps
        }
    letters = sorted(letters)
    if not letters:
        return p
    original = p.transitions
    entered = set()
    transitions = list(original)
    for q1, guard, q2 in original:
        for a in letters:
            if guard.matches(a):
                entered.add((q2, a))
                transitions.append((q1, class_of(a), ("again", q2, a)))
    for q, a in sorted(entered, key=repr):
        shadow = ("again", q, a)
        transitions.append((shadow, class_of(a), shadow))
        for q1, guard, q2 in original:
            if q1 != q:
                continue
            transitions.append((shadow, guard, q2))
            for b in letters:
                if guard.matches(b):
                    transitions.append((shadow, class_of(b), ("again", q2, b)))
    shadows = [("again", q, a) for q, a in sorted(entered, key=repr)]
    states = list(p.states) + shadows
    final = set(p.final) | {s for s in shadows if s[1] in p.final}
    repeating = set(p.repeating) | {s for s in shadows if s[1] in p.repeating}
    return BuchiProperty(states, transitions, p.initial, final, repeating)


def bounded_language(p: BuchiProperty, letters, max_len: int) -> frozenset:
    """All accepted words up to a length over the given concrete letters."""
    letters = tuple(letters)
    out = set()
    for n in range(max_len + 1):
        for word in iter_product(letters, repeat=n):
            if p.accepts_finite(word):
                out.add(word)
    return frozenset(out)


# ---------------------------------------------------------------------------
# The decision pipeline.


class NotSupported(Exception):
    """The property pipeline cannot faithfully analyze this system."""


class _IndexedProperty:
    """Property states renamed to integers, with an explicit reject sink.

    The leader product sorts successor sets, so states must be mutually
    comparable; integers also make missing successors representable by a
    sink that absorbs every letter and accepts nothing.
    """

    def __init__(self, prop):
        self._prop = prop
        self._names = tuple(prop.states)
        self._index = {s: i for i, s in enumerate(self._names)}
        self.sink = len(self._names)
        self.states = tuple(range(self.sink + 1))
        self.initial = self._index[prop.initial]
        self.final = frozenset(self._index[s] for s in prop.final)
        self.repeating = frozenset(self._index[s] for s in prop.repeating)

    def successors(self, state, action: Action):
        if state == self.sink:
            return (self.sink,)
        out = self._prop.successors(self._names[state], action)
        if not out:
            return (self.sink,)
        return tuple(sorted(self._index[s] for s in out))


def _contributor_actions(sys: CDSystem):
    if sys.contributor_is_pushdown:
        return [r.action for r in sys.contributor.rules]
    return [a for _, a, _ in sys.contributor.transitions]


def _check_supported(sys: CDSystem) -> None:
    if any(a.kind == KIND_INTERNAL for a in _contributor_actions(sys)):
        raise NotSupported(
            "contributor internal actions leave no image the rewritten "
            "leader can announce, so properties cannot track them"
        )


def _check_alphabet(sys: CDSystem, prop: BuchiProperty) -> None:
    values = set(sys.registers.values)
    bad = set()
    for _, guard, _ in prop.transitions:
        for cls in guard.require + guard.forbid:
            if cls.kind in (KIND_WRITE, KIND_READ) and cls.value is not None:
                if cls.value not in values:
                    bad.add(cls.value)
    if bad:
        names = ", ".join(repr(v) for v in sorted(bad))
        raise ValueError(
            f"property alphabet mismatch: {names} outside the register domain"
        )


def _silent_spin_reachers(contrib, g) -> frozenset:
    """Contributor states that can slip into silent-only cycling at g.

    The approach path may use any moves of the one copy that keep the
    register at g; the cycle itself must be silent so the trace stays
    finite and the property verdict taken at the control still applies.
    """
    neutral = {s: set() for s in contrib.states}
    silent = {s: set() for s in contrib.states}
    for s, a, s2 in contrib.transitions:
        if _register_effect(a, g) == g:
            neutral[s].add(s2)
            if a.is_eps:
                silent[s].add(s2)
    cyc = set()
    for comp in _sccs(silent):
        comp = set(comp)
        if len(comp) > 1 or any(c in silent[c] for c in comp):
            cyc |= comp
    if not cyc:
        return frozenset()
    rev = {s: [] for s in neutral}
    for s, outs in neutral.items():
        for s2 in outs:
            rev[s2].append(s)
    seen = set(cyc)
    frontier = deque(seen)
    while frontier:
        x = frontier.popleft()
        for pred in rev[x]:
            if pred not in seen:
                seen.add(pred)
                frontier.append(pred)
    return frozenset(seen)


def _finite_branch(sys: CDSystem, prop: BuchiProperty, stats):
    """Search for a maximal finite trace the property accepts.

    Runs the end-of-run preserving rewrite, synchronizes its leader with
    the lifted property, and looks for run ends at controls whose property
    component is final: total deadlocks, deadlocks of the leader alone,
    one contributor cycling silently, and the leader going silent forever.
    A flag write moves the lifted property to a dead state, so controls
    reached by runs whose projection is not actually maximal never pass
    the final-state filter.
    """
    ext, flag = maximality_preserving(sys)
    lifted = lift_property(prop, flag=flag,
                           drop_values=frozenset(sys.registers.values))
    product = product_leader_automaton(ext.leader, _IndexedProperty(lifted))
    finals = product.final
    psys = CDSystem(ext.registers, ext.contributor, product.pds)
    work, uncertain = _tracked_view(psys)
    table = SetReachTable(work)
    stats["states_explored"] += len(table.controls)
    by_state = work.contributor.by_state
    pds = product.pds

    def leader_stuck(t, sym, g):
        return all(
            _register_effect(r.action, g) is None
            for r in pds.by_top.get((t, sym), ())
        )

    controls = sorted(table.controls, key=repr)
    final_controls = [c for c in controls if c[1] in finals]
    for control in final_controls:
        B, t, g = control
        if B & uncertain:
            continue
        if any(
            _register_effect(a, g) is not None
            for s in B
            for a, _ in by_state.get(s, ())
        ):
            continue
        if control in table.empty_stack:
            return ("deadlock", control, None)
        for sym in sorted(table.tops(control), key=repr):
            if leader_stuck(t, sym, g):
                return ("deadlock", control, sym)

    aut0 = _leader_alone_automaton(pds, ext.registers)
    stats["states_explored"] += len(aut0.controls)
    for control in sorted(aut0.controls, key=repr):
        t, g = control
        if t not in finals:
            continue
        if aut0.accepts_empty(control):
            return ("deadlock-alone", control, None)
        for sym in sorted(
            {x for x, _ in aut0.by_source.get(control, ())}, key=repr
        ):
            if leader_stuck(t, sym, g):
                return ("deadlock-alone", control, sym)

    spin: dict = {}
    for control in final_controls:
        B, t, g = control
        if g not in spin:
            spin[g] = _silent_spin_reachers(work.contributor, g)
        if B & spin[g]:
            return ("contributor-silent-spin", control)

    sc = _self_covering_heads(pds)
    if sc:
        pre = _divergence_pre(pds, sc)
        for control in final_controls:
            B, t, g = control
            if _product_nonempty(pre, t, table.automaton, control):
                return ("leader-silent-spin", control)
    return None


def _signal_on_repeats(product, prime: CDSystem, signal: str) -> CDSystem:
    """Mark visits to repeating product states with writes of a fresh value.

    Every rule leaving a repeating state gets a twin entering a marked
    copy of its target.  Marked control flows on through reads and silent
    steps; the first write announces the visit by writing the signal and
    then redoing the original write, dropping back to plain control.
    Contributor rules never mention the signal, so the marked system
    writes it infinitely often exactly when some run of the plain product
    passes through repeating states infinitely often while still writing.
    """
    pds = product.pds
    states = set(pds.states)
    rules = list(pds.rules)
    for r in pds.rules:
        if r.state in product.repeating:
            states.add(("marked", r.target))
            rules.append(
                PdsRule(r.state, r.top, r.action, ("marked", r.target), r.push)
            )
    for i, r in enumerate(pds.rules):
        states.add(("marked", r.state))
        if r.action.kind == KIND_WRITE:
            mid = ("signal", i)
            states.add(mid)
            rules.append(
                PdsRule(("marked", r.state), r.top, lw(signal), mid, (r.top,))
            )
            rules.append(PdsRule(mid, r.top, r.action, r.target, r.push))
        else:
            states.add(("marked", r.target))
            rules.append(
                PdsRule(("marked", r.state), r.top, r.action,
                        ("marked", r.target), r.push)
            )
    leader = PushdownSystem(states, pds.stack_alphabet, rules,
                            pds.init_state, pds.init_stack)
    registers = RegisterDomain(prime.registers.values + (signal,),
                               prime.registers.initial)
    return CDSystem(registers, prime.contributor, leader)


def _infinite_branch(sys: CDSystem, prop: BuchiProperty, stats, jobs):
    """Search for an infinite trace visiting repeating states forever."""
    prime = simplify(sys)
    lifted = lift_property(prop)
    product = product_leader_automaton(prime.leader, _IndexedProperty(lifted))
    if not product.repeating:
        return None
    signal = "#"
    while signal in prime.registers.values:
        signal += "#"
    marked = _signal_on_repeats(product, prime, signal)
    # The inner witness lives in the marked system, which is not worth
    # replaying; tiny bounds keep its oracle pass from wasting time.
    sub = decide_repeated_reach(marked, lw(signal),
                                confirm=Bounds(0, 1, 0), jobs=jobs)
    stats["states_explored"] += sub.stats.get("states_explored", 0)
    stats["guesses_enumerated"] += sub.stats.get("guesses_enumerated", 0)
    if sub.is_yes:
        return ("repeating-signal", sub.stats.get("guess"))
    return None


def _oracle_property(sys: CDSystem, prop: BuchiProperty,
                     b: Bounds) -> Optional[Witness]:
    """Bounded search for a maximal run whose trace the property accepts.

    Checks deadlocked runs against finite acceptance and one shortest
    loop per reachable loop signature against repeated acceptance (or
    finite acceptance when the loop is silent).  Misses witnesses beyond
    the bounds and loops other than the first found per signature.
    """
    for n in range(b.n_contributors + 1):
        order, parents, _ = explore_configs(sys, n, b)
        for c in order:
            if is_deadlock(sys, c):
                actions, configs = _walk_back(parents, c)
                if prop.accepts_finite(trace_of(actions)):
                    return Witness(n, actions, configs)
        if not b.lasso:
            continue
        memo: dict = {}
        for c1 in order:
            if not c1.leader[1]:
                continue
            sig = _sig(c1)
            if sig not in memo:
                memo[sig] = _loop_search(sys, sig, b)
            loop = memo[sig]
            if loop is None:
                continue
            actions, configs = _walk_back(parents, c1)
            loop_actions, vconfs = loop
            head = trace_of(actions)
            cycle = trace_of(loop_actions)
            accepted = (
                prop.accepts_lasso(head, cycle)
                if cycle
                else prop.accepts_finite(head)
            )
            if accepted:
                return Witness(n, actions, configs, loop_actions,
                               _absolute_loop(c1, vconfs))
    return None


def decide_property(sys: CDSystem, p, confirm: Bounds | None = None,
                    jobs: int | None = None,
                    assume_expanding: bool = False) -> Verdict:
    """Does some maximal trace of the system satisfy the property?

    The property may be an automaton or a formula; formulas are
    translated first.  Unless ``assume_expanding`` vouches for it, the
    property is closed under replication of contributor letters, which
    the decision method needs because its rewrite can serve one
    acknowledgment to several identical copies at once.  Finite and
    infinite maximal traces are searched separately; a Yes is confirmed
    with a bounded concrete witness when one exists within ``confirm``.

    Systems whose contributors use internal actions are rejected: those
    letters have no image the rewritten leader announces, so no property
    could track them through the pipeline.
    """
    t0 = time.monotonic()
    confirm = DEFAULT_CONFIRM if confirm is None else confirm
    prop = ltl_to_buchi(p) if isinstance(p, LtlFormula) else p
    _check_supported(sys)
    _check_alphabet(sys, prop)
    stats = {"states_explored": 0, "guesses_enumerated": 0}
    if not assume_expanding:
        letters = [
            make(g)
            for g in sorted(sys.registers.values)
            for make in (cw, cr)
        ]
        prop = expand_closure(prop, letters)
        stats["closure_states"] = len(prop.states)
    hit = _finite_branch(sys, prop, stats)
    if hit is None:
        hit = _infinite_branch(sys, prop, stats, jobs)
    witness = None
    if hit is not None:
        answer = "Yes"
        stats["branch"] = hit[0]
        stats["guess"] = hit[1:]
        witness = _oracle_property(sys, prop, confirm)
        if witness is None:
            stats["note"] = "witness beyond oracle bounds"
    else:
        answer = "No"
    stats["wall_time"] = time.monotonic() - t0
    return Verdict(answer, witness, stats)
