"""Brute-force bounded exploration of system runs.

Everything here is an oracle, not a decision procedure: searches are cut off
by explicit bounds, and an empty result means "nothing found within bounds",
never "no".  The decision procedures elsewhere in the package are validated
differentially against these searches.

Loops are detected on a repetition signature rather than full-configuration
equality, because leader stacks may grow while a run loops: a loop may end
with the same contributor multiset, leader control state, leader top-of-stack
symbol and register value as it started, provided the leader stack below the
starting top symbol is never touched along the way.  Such a loop can be
replayed forever, so it witnesses an infinite run.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .core import (
    Action,
    CDSystem,
    Configuration,
    canon_multiset,
    contributor_moves,
    leader_moves,
    step,
    trace_of,
)


class Bounds(NamedTuple):
    """Exploration limits.

    step_bound caps the number of steps of a run, silent steps included;
    stack_bound caps every process stack (and, in loop searches, the growth
    of the leader stack above the loop base); n_contributors is the largest
    contributor count tried (all of 0..n are searched, smallest first,
    because verdicts about maximal runs are not monotone in the count).
    Setting lasso=False disables cycle searches where they are optional.
    """

    n_contributors: int
    stack_bound: int
    step_bound: int
    lasso: bool = True


@dataclass(frozen=True)
class Witness:
    """A replayable bounded run; loop fields present only for lassos."""

    n: int
    actions: tuple
    configs: tuple
    loop_actions: Optional[tuple] = None
    loop_configs: Optional[tuple] = None

    @property
    def kind(self) -> str:
        return "finite" if self.loop_actions is None else "lasso"

    @property
    def trace(self) -> tuple:
        return trace_of(self.actions)

    @property
    def loop_trace(self) -> tuple:
        return trace_of(self.loop_actions or ())


def _stacks_ok(sys: CDSystem, c: Configuration, b: Bounds) -> bool:
    if len(c.leader[1]) > b.stack_bound:
        return False
    if sys.contributor_is_pushdown:
        for _, stack in c.contributors:
            if len(stack) > b.stack_bound:
                return False
    return True


def _walk_back(parents, c):
    actions, configs = [], [c]
    while parents[c] is not None:
        c, a = parents[c]
        actions.append(a)
        configs.append(c)
    return tuple(reversed(actions)), tuple(reversed(configs))


def explore_configs(sys: CDSystem, n: int, b: Bounds, forbidden: Action | None = None):
    """BFS over configurations with n contributors.

    Returns (order, parents, exhausted): discovery order, back-pointers, and
    whether no successor was ever clipped by a bound (so the returned set is
    the complete reachable set when exhausted is True).
    """
    c0 = sys.initial_config(n)
    parents = {c0: None}
    order = [c0]
    exhausted = _stacks_ok(sys, c0, b)
    frontier = deque([(c0, 0)])
    while frontier:
        c, depth = frontier.popleft()
        for a, c2 in step(sys, c):
            if forbidden is not None and a == forbidden:
                continue
            if c2 in parents:
                continue
            if depth >= b.step_bound or not _stacks_ok(sys, c2, b):
                exhausted = False
                continue
            parents[c2] = (c, a)
            order.append(c2)
            frontier.append((c2, depth + 1))
    return order, parents, exhausted


def oracle_reach(sys: CDSystem, target: Action, b: Bounds) -> Optional[Witness]:
    """Shortest bounded run whose trace contains the target action."""
    for n in range(b.n_contributors + 1):
        c0 = sys.initial_config(n)
        if not _stacks_ok(sys, c0, b):
            continue
        parents = {c0: None}
        frontier = deque([(c0, 0)])
        while frontier:
            c, depth = frontier.popleft()
            if depth >= b.step_bound:
                continue
            for a, c2 in step(sys, c):
                if not _stacks_ok(sys, c2, b):
                    continue
                if a == target:
                    actions, configs = _walk_back(parents, c)
                    return Witness(n, actions + (a,), configs + (c2,))
                if c2 not in parents:
                    parents[c2] = (c, a)
                    frontier.append((c2, depth + 1))
    return None


def _sig(c: Configuration):
    return (c.contributors, c.leader[0], c.leader[1][0], c.register)


class _VConf(NamedTuple):
    """Loop-search configuration: leader stack relative to the frozen base."""

    contributors: tuple
    state: object
    rel: tuple
    register: str
    flag: bool


def _virtual_step(sys: CDSystem, vc: _VConf, b: Bounds, forbidden, required):
    out = []
    for a, (state, rel), g in leader_moves(sys, (vc.state, vc.rel), vc.register):
        if forbidden is not None and a == forbidden:
            continue
        if not rel or len(rel) > b.stack_bound:
            # popping into the frozen base (or growing past the bound) is out
            continue
        out.append((a, _VConf(vc.contributors, state, rel, g, vc.flag or a == required)))
    for local in set(vc.contributors):
        rest = list(vc.contributors)
        rest.remove(local)
        for a, new_local, g in contributor_moves(sys, local, vc.register):
            if forbidden is not None and a == forbidden:
                continue
            if sys.contributor_is_pushdown and len(new_local[1]) > b.stack_bound:
                continue
            contributors = canon_multiset(rest + [new_local])
            out.append((a, _VConf(contributors, vc.state, vc.rel, g, vc.flag or a == required)))
    out.sort()
    return out


def _loop_search(sys: CDSystem, sig, b: Bounds, forbidden=None, required=None):
    """Find a replayable loop from any configuration with the given signature.

    Only the part of the leader stack above the loop base moves, so the
    result depends on (and is cached by callers per) the signature alone.
    Returns the loop as (action list, virtual configuration list), or None.
    """
    contributors, state, top, g = sig
    v0 = _VConf(contributors, state, (top,), g, required is None)
    parents = {v0: None}
    frontier = deque([(v0, 0)])
    while frontier:
        vc, depth = frontier.popleft()
        if depth >= b.step_bound:
            continue
        for a, vc2 in _virtual_step(sys, vc, b, forbidden, required):
            closes = (
                vc2.flag
                and vc2.contributors == contributors
                and vc2.state == state
                and vc2.rel[0] == top
                and vc2.register == g
            )
            if closes:
                actions, vconfs = _walk_back(parents, vc)
                return actions + (a,), vconfs + (vc2,)
            if vc2 not in parents:
                parents[vc2] = (vc, a)
                frontier.append((vc2, depth + 1))
    return None


def _absolute_loop(c1: Configuration, vconfs):
    """Translate loop-search configurations back onto a concrete start."""
    base = c1.leader[1][1:]
    return tuple(
        Configuration(vc.contributors, (vc.state, vc.rel + base), vc.register)
        for vc in vconfs
    )


def oracle_buchi(sys: CDSystem, target: Action, b: Bounds) -> Optional[Witness]:
    """Bounded lasso search: a reachable loop whose trace contains target."""
    for n in range(b.n_contributors + 1):
        order, parents, _ = explore_configs(sys, n, b)
        memo: dict = {}
        for c1 in order:
            if not c1.leader[1]:
                continue
            sig = _sig(c1)
            if sig not in memo:
                memo[sig] = _loop_search(sys, sig, b, required=target)
            loop = memo[sig]
            if loop is not None:
                actions, configs = _walk_back(parents, c1)
                loop_actions, vconfs = loop
                return Witness(n, actions, configs, loop_actions, _absolute_loop(c1, vconfs))
    return None


def _deadlock_cache(sys: CDSystem) -> dict:
    cache = getattr(sys, "_deadlock_by_top", None)
    if cache is None:
        cache = {}
        sys._deadlock_by_top = cache
    return cache


def configuration_top(sys: CDSystem, c: Configuration):
    """The enabledness-relevant part of a configuration.

    Which moves are possible depends only on each process's control state and
    top stack symbol plus the register value; multiplicities never matter.
    """
    if sys.contributor_is_pushdown:
        locals_top = frozenset((s, st[0] if st else None) for s, st in c.contributors)
    else:
        locals_top = frozenset(c.contributors)
    leader_top = (c.leader[0], c.leader[1][0] if c.leader[1] else None)
    return (locals_top, leader_top, c.register)


def is_deadlock(sys: CDSystem, c: Configuration) -> bool:
    top = configuration_top(sys, c)
    cache = _deadlock_cache(sys)
    answer = not step(sys, c)
    if top in cache:
        assert cache[top] == answer, "deadlock not a function of the configuration top"
    else:
        cache[top] = answer
    return answer


def oracle_max_safe(sys: CDSystem, forbidden: Action, b: Bounds) -> Optional[Witness]:
    """A maximal bounded run avoiding the forbidden action.

    Finite witnesses (runs ending in a full deadlock) are preferred; if none
    is found for a contributor count, a safe lasso is searched, including
    loops of silent steps only (their trace is finite yet maximal).
    """
    for n in range(b.n_contributors + 1):
        order, parents, _ = explore_configs(sys, n, b, forbidden=forbidden)
        for c in order:
            if is_deadlock(sys, c):
                actions, configs = _walk_back(parents, c)
                return Witness(n, actions, configs)
        if not b.lasso:
            continue
        memo: dict = {}
        for c1 in order:
            if not c1.leader[1]:
                continue
            sig = _sig(c1)
            if sig not in memo:
                memo[sig] = _loop_search(sys, sig, b, forbidden=forbidden)
            loop = memo[sig]
            if loop is not None:
                actions, configs = _walk_back(parents, c1)
                loop_actions, vconfs = loop
                return Witness(n, actions, configs, loop_actions, _absolute_loop(c1, vconfs))
    return None


class SetConfiguration(NamedTuple):
    states: frozenset
    leader: tuple
    register: str


def _set_key(item):
    a, sc = item
    return (a, tuple(sorted(sc.states)), sc.leader, sc.register)


def set_step(sys: CDSystem, sc: SetConfiguration):
    """Successors under set semantics: keep and drop variant of each move."""
    if sys.contributor_is_pushdown:
        raise ValueError("set semantics needs a finite-state contributor; restrict first")
    out = []
    for a, leader_cfg, g in leader_moves(sys, sc.leader, sc.register):
        out.append((a, SetConfiguration(sc.states, leader_cfg, g)))
    for s in sc.states:
        for a, s2, g in contributor_moves(sys, s, sc.register):
            out.append((a, SetConfiguration(sc.states | {s2}, sc.leader, g)))
            # drop variant: the mover was the last copy in s; on a self-loop
            # the mover stays put, so s never empties
            out.append((a, SetConfiguration((sc.states - {s}) | {s2}, sc.leader, g)))
    out.sort(key=_set_key)
    deduped = []
    for item in out:
        if not deduped or deduped[-1] != item:
            deduped.append(item)
    return deduped


def oracle_reach_set(sys: CDSystem, target_pred, b: Bounds) -> Optional[Witness]:
    """BFS over set semantics until a configuration satisfies the predicate."""
    sc0 = SetConfiguration(
        frozenset([sys.contributor_init_local()]),
        sys.leader.init_config,
        sys.registers.init_value,
    )
    parents = {sc0: None}
    frontier = deque([(sc0, 0)])
    if target_pred(sc0):
        return Witness(0, (), (sc0,))
    while frontier:
        sc, depth = frontier.popleft()
        if depth >= b.step_bound:
            continue
        for a, sc2 in set_step(sys, sc):
            if sc2 in parents or len(sc2.leader[1]) > b.stack_bound:
                continue
            parents[sc2] = (sc, a)
            if target_pred(sc2):
                actions, configs = _walk_back(parents, sc2)
                return Witness(0, actions, configs)
            frontier.append((sc2, depth + 1))
    return None


def replay_witness(sys: CDSystem, w: Witness) -> None:
    """Assert that a witness re-executes step by step from its start.

    For lassos, additionally assert the repetition signature: same multiset,
    leader control state, top symbol and register at both ends of the loop,
    with the stack below the starting top symbol kept a proper suffix
    throughout, so the loop can run forever.
    """
    assert w.configs[0] == sys.initial_config(w.n)
    runs = [(w.actions, w.configs)]
    if w.loop_actions is not None:
        runs.append((w.loop_actions, w.loop_configs))
        assert w.loop_configs[0] == w.configs[-1]
    for actions, configs in runs:
        assert len(configs) == len(actions) + 1
        for i, a in enumerate(actions):
            assert (a, configs[i + 1]) in step(sys, configs[i]), (
                f"witness step {a.pretty()} not reproducible"
            )
    if w.loop_actions is not None:
        first, last = w.loop_configs[0], w.loop_configs[-1]
        assert len(w.loop_actions) >= 1
        assert _sig(first) == _sig(last)
        base = first.leader[1][1:]
        for c in w.loop_configs:
            stack = c.leader[1]
            assert len(stack) > len(base) and stack[len(stack) - len(base):] == base
