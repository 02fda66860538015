"""Decision procedures for register-coupled leader/contributor systems.

The workhorse is post* saturation of a configuration automaton against a
pushdown whose control states are synthesized on demand.  On top of that
sit the four deciders: plain reachability of a leader action, repeated
(infinitely often) reachability, maximal safety, and universal
reachability.  Guessed quantities from the underlying constructions are
replaced by exhaustive enumerations with a fixed deterministic order.
"""

from __future__ import annotations

import math
import time
from collections import deque
from itertools import permutations, product

from .bounded import default_bound, restrict, restrict_tracked
from .capacity import NuAction, SupportQuery, is_nu, nu, support_automaton
from .core import (
    CDSystem,
    EPS_L,
    FiniteTS,
    KIND_INTERNAL,
    KIND_READ,
    KIND_WRITE,
    LimitExceeded,
    PdsRule,
    PushdownSystem,
    _register_effect,
)
from .downclosure import Nfa, downward_closure, _sccs
from .explicit import Bounds, Witness, oracle_buchi, oracle_max_safe, oracle_reach

DEFAULT_CONFIRM = Bounds(4, 6, 16)


class Verdict:
    """Decision outcome plus whatever evidence the bounded oracle produced."""

    def __init__(self, answer: str, witness=None, stats=None):
        if answer not in ("Yes", "No"):
            raise ValueError("answer must be 'Yes' or 'No'")
        self.answer = answer
        self.witness = witness
        self.stats = dict(stats or {})

    @property
    def is_yes(self) -> bool:
        return self.answer == "Yes"

    def __repr__(self):
        extra = ", witness" if self.witness is not None else ""
        return f"Verdict({self.answer}{extra})"


class PAutomaton:
    """Automaton over stack symbols describing a set of configurations.

    A configuration (control, stack word) is recognized when the word can
    be read from the control state to an accepting state.  Saturation
    preserves the property that no edge points at a control state, so a
    control can safely be marked accepting to record its empty-stack
    configuration without affecting any other control.
    """

    def __init__(self):
        self.edge_set = set()
        self.edge_list = []
        self.by_source: dict = {}
        self.finals = set()
        self.controls = set()
        self._counter = 0

    @classmethod
    def from_config(cls, control, stack):
        aut = cls()
        aut.add_config(control, stack)
        return aut

    @classmethod
    def from_configs(cls, configs):
        aut = cls()
        for control, stack in configs:
            aut.add_config(control, stack)
        return aut

    def fresh_state(self):
        self._counter += 1
        return ("#st", self._counter)

    def add_config(self, control, stack):
        """Accept exactly (control, stack) via a fresh chain of states."""
        self.controls.add(control)
        cur = control
        for sym in stack:
            nxt = self.fresh_state()
            self.add_edge(cur, sym, nxt)
            cur = nxt
        if cur == control:
            self.finals.add(control)
        else:
            self.finals.add(cur)

    def add_edge(self, u, sym, v) -> bool:
        e = (u, sym, v)
        if e in self.edge_set:
            return False
        self.edge_set.add(e)
        self.edge_list.append(e)
        self.by_source.setdefault(u, []).append((sym, v))
        return True

    def add_final(self, s):
        self.finals.add(s)

    def copy(self) -> "PAutomaton":
        aut = PAutomaton()
        aut.edge_set = set(self.edge_set)
        aut.edge_list = list(self.edge_list)
        aut.by_source = {k: list(v) for k, v in self.by_source.items()}
        aut.finals = set(self.finals)
        aut.controls = set(self.controls)
        aut._counter = self._counter
        return aut

    @property
    def states(self):
        out = set(self.controls) | set(self.finals)
        for u, _, v in self.edge_list:
            out.add(u)
            out.add(v)
        return out

    def accepts(self, control, stack) -> bool:
        frontier = {control}
        for sym in stack:
            nxt = set()
            for u in frontier:
                for x, v in self.by_source.get(u, ()):
                    if x == sym:
                        nxt.add(v)
            if not nxt:
                return False
            frontier = nxt
        return bool(frontier & self.finals)

    def has_head(self, control, sym) -> bool:
        """Some recognized configuration of this control starts with sym."""
        return any(x == sym for x, _ in self.by_source.get(control, ()))

    def accepts_empty(self, control) -> bool:
        return control in self.finals

    def language_upto(self, n: int):
        """All recognized (control, stack) pairs with at most n symbols."""
        out = set()
        for control in sorted(self.controls, key=repr):
            frontier = [((), control)]
            while frontier:
                word, u = frontier.pop()
                if u in self.finals:
                    out.add((control, word))
                if len(word) == n:
                    continue
                for sym, v in self.by_source.get(u, ()):
                    frontier.append((word + (sym,), v))
        return out


class _Stop(Exception):
    def __init__(self, control):
        self.control = control


def _saturate(aut: PAutomaton, rule_source, stop_when=None, control_cap=500_000):
    """Post* fixpoint on aut, pulling rules per (control, top symbol).

    rule_source(control, sym) returns (target control, pushed word) pairs.
    Newly produced controls are registered as they appear; if stop_when
    matches one of them, saturation aborts early and that control is
    returned.  The automaton is mutated in place.
    """
    eps_preds: dict = {}
    work = deque(aut.edge_list)
    rules_memo: dict = {}

    def register(control):
        if control not in aut.controls:
            if len(aut.controls) >= control_cap:
                raise LimitExceeded(f"saturation exceeds {control_cap} control states")
            aut.controls.add(control)
            if stop_when is not None and stop_when(control):
                raise _Stop(control)

    def add_edge(u, sym, v):
        if aut.add_edge(u, sym, v):
            work.append((u, sym, v))
            for q in eps_preds.get(u, ()):
                add_edge(q, sym, v)

    def add_eps(q, u):
        register(q)
        if q in eps_preds.setdefault(u, set()):
            return
        eps_preds[u].add(q)
        if u in aut.finals:
            aut.finals.add(q)
        for sym, v in list(aut.by_source.get(u, ())):
            add_edge(q, sym, v)

    try:
        while work:
            p, sym, u = work.popleft()
            if p not in aut.controls:
                continue
            key = (p, sym)
            if key not in rules_memo:
                rules_memo[key] = tuple(rule_source(p, sym))
            for target, push in rules_memo[key]:
                register(target)
                if len(push) == 0:
                    add_eps(target, u)
                elif len(push) == 1:
                    add_edge(target, push[0], u)
                else:
                    prev = target
                    for i, x in enumerate(push[:-1]):
                        mid = ("#mid", target, push[: i + 1])
                        add_edge(prev, x, mid)
                        prev = mid
                    add_edge(prev, push[-1], u)
    except _Stop as stop:
        return stop.control
    return None


def saturate_post(pds: PushdownSystem, start: PAutomaton) -> PAutomaton:
    """Automaton for all configurations reachable from those in start."""
    for _, _, v in start.edge_list:
        if v in pds.states:
            raise ValueError("start automaton must not have edges into control states")
    aut = start.copy()
    aut.controls |= pds.states

    def rules(control, sym):
        return [(r.target, r.push) for r in pds.by_top.get((control, sym), ())]

    _saturate(aut, rules)
    return aut


def _saturate_pre(pds_rules, start: PAutomaton, controls) -> PAutomaton:
    """Automaton for all configurations that can reach one recognized by start.

    pds_rules is a list of (state, top, target, push) with push length at
    most two.  Unlike post*, edges into controls do appear here; acceptance
    stays path-based so that is harmless.
    """
    aut = start.copy()
    aut.controls |= set(controls)
    work = deque(aut.edge_list)
    by_first: dict = {}
    by_second: dict = {}

    def add_edge(u, sym, v):
        if aut.add_edge(u, sym, v):
            work.append((u, sym, v))

    for p, x, q, push in pds_rules:
        if len(push) == 0:
            add_edge(p, x, q)
        elif len(push) == 1:
            by_first.setdefault((q, push[0]), []).append((p, x, None))
        elif len(push) == 2:
            by_first.setdefault((q, push[0]), []).append((p, x, push[1]))
            by_second.setdefault(push[1], []).append((p, x, q, push[0]))
        else:
            raise ValueError("rules must push at most two symbols")

    while work:
        s, sym, u = work.popleft()
        for p, x, tail in by_first.get((s, sym), ()):
            if tail is None:
                add_edge(p, x, u)
            else:
                for z, v in list(aut.by_source.get(u, ())):
                    if z == tail:
                        add_edge(p, x, v)
        for p, x, q, y in by_second.get(sym, ()):
            if (q, y, s) in aut.edge_set:
                add_edge(p, x, u)
    return aut


def _finite_view(sys: CDSystem) -> CDSystem:
    """Replace a pushdown contributor by its depth-bounded restriction."""
    if not sys.contributor_is_pushdown:
        return sys
    fts = restrict(sys.contributor, default_bound(sys.contributor))
    return CDSystem(sys.registers, fts, sys.leader)


def decide_global_reach(sys: CDSystem, B, q, A) -> bool:
    """Can the set semantics reach contributor set B with the leader at
    control q and A on top of its stack, under any register value?

    Runs through sequences of contributor sets: each step adds one state,
    swaps one out for a new one, or drops one whose last copy moved to an
    already occupied state.  A state dropped once never returns, which caps
    sequence length at twice the contributor state count.  Each complete
    sequence is checked by saturating the product pushdown whose controls
    carry the segment index, leader state, and register value.
    """
    if sys.contributor_is_pushdown:
        raise ValueError("decide_global_reach needs a finite-state contributor")
    contrib = sys.contributor
    leader = sys.leader
    target = frozenset(B)
    trans = sorted(contrib.transitions, key=repr)
    all_states = frozenset(contrib.states)
    g0 = sys.registers.init_value
    k_max = 2 * len(all_states)

    def delta_moves(cur, nxt):
        """Contributor transitions that realize the step cur -> nxt."""
        gone = cur - nxt
        new = nxt - cur
        for s, a, s2 in trans:
            if gone:
                if s not in gone:
                    continue
            elif s not in cur:
                continue
            if new:
                if s2 not in new:
                    continue
            elif s2 not in nxt:
                continue
            yield s, a, s2

    def check(segments) -> bool:
        last = len(segments) - 1

        def rules(control, sym):
            i, t, g = control
            out = []
            for r in leader.by_top.get((t, sym), ()):
                g2 = _register_effect(r.action, g)
                if g2 is not None:
                    out.append(((i, r.target, g2), r.push))
            seg = segments[i]
            for s, a, s2 in trans:
                if s in seg and s2 in seg:
                    g2 = _register_effect(a, g)
                    if g2 is not None:
                        out.append(((i, t, g2), (sym,)))
            if i < last:
                for _, a, _ in delta_moves(segments[i], segments[i + 1]):
                    g2 = _register_effect(a, g)
                    if g2 is not None:
                        out.append(((i + 1, t, g2), (sym,)))
            return out

        init = (0, leader.init_state, g0)
        aut = PAutomaton.from_config(init, (leader.init_stack,))
        _saturate(aut, rules)
        return any(aut.has_head((last, q, g), A) for g in sys.registers.values)

    def dfs(segments, removed) -> bool:
        cur = segments[-1]
        if cur == target and check(segments):
            return True
        if len(segments) - 1 >= k_max:
            return False
        fresh = sorted(all_states - cur - removed, key=repr)
        steps = []
        for s2 in fresh:
            steps.append((cur | {s2}, removed))
        for s in sorted(cur, key=repr):
            base = cur - {s}
            gone = removed | {s}
            for s2 in fresh:
                steps.append((base | {s2}, gone))
            if base:
                steps.append((base, gone))
        for nxt, removed2 in steps:
            if removed2 & target:
                continue
            if not any(True for _ in delta_moves(cur, nxt)):
                continue
            if dfs(segments + [nxt], removed2):
                return True
        return False

    return dfs([frozenset([contrib.init_state])], frozenset())


def decide_reach(sys: CDSystem, top, confirm: Bounds | None = None) -> Verdict:
    """Is there a run whose trace contains the given leader action?

    Works on the accumulated-set abstraction: contributor sets only grow,
    which is exact for reachability because extra parked copies neither
    enable nor disable anything.  The leader control carries a flag that
    flips when the watched action fires.
    """
    t0 = time.monotonic()
    confirm = DEFAULT_CONFIRM if confirm is None else confirm
    work_sys = _finite_view(sys)
    contrib = work_sys.contributor
    leader = work_sys.leader
    by_state = contrib.by_state

    def rules(control, sym):
        t, B, g, flag = control
        out = []
        for r in leader.by_top.get((t, sym), ()):
            g2 = _register_effect(r.action, g)
            if g2 is not None:
                out.append(((r.target, B, g2, flag or r.action == top), r.push))
        for s in sorted(B, key=repr):
            for a, s2 in by_state.get(s, ()):
                g2 = _register_effect(a, g)
                if g2 is None:
                    continue
                B2 = B if s2 in B else B | {s2}
                out.append(((t, B2, g2, flag), (sym,)))
        return out

    init = (
        leader.init_state,
        frozenset([contrib.init_state]),
        work_sys.registers.init_value,
        False,
    )
    aut = PAutomaton.from_config(init, (leader.init_stack,))
    hit = _saturate(aut, rules, stop_when=lambda c: c[3])
    stats = {"states_explored": len(aut.controls), "guesses_enumerated": 0}
    witness = None
    if hit is not None:
        answer = "Yes"
        witness = oracle_reach(sys, top, confirm)
        if witness is None:
            stats["note"] = "witness beyond oracle bounds"
    else:
        answer = "No"
    stats["wall_time"] = time.monotonic() - t0
    return Verdict(answer, witness, stats)


class SetReachTable:
    """Exact reachability over (contributor set, leader, register) controls.

    The contributor part of a finite-contributor system abstracts to its set
    of occupied states; the combined system is then an ordinary pushdown
    whose controls pair that set with the leader control and the register
    value, and post* saturation from the initial control is exact.  Each
    contributor move appears in a keep variant (some copy stays behind) and
    a drop variant (the mover was the last copy).
    """

    def __init__(self, sys: CDSystem, control_cap: int = 500_000):
        if sys.contributor_is_pushdown:
            raise ValueError("set reachability needs a finite-state contributor")
        self.sys = sys
        contrib = sys.contributor
        leader = sys.leader
        by_state = contrib.by_state

        def rules(control, sym):
            B, t, g = control
            out = []
            for r in leader.by_top.get((t, sym), ()):
                g2 = _register_effect(r.action, g)
                if g2 is not None:
                    out.append(((B, r.target, g2), r.push))
            for s in sorted(B, key=repr):
                for a, s2 in by_state.get(s, ()):
                    g2 = _register_effect(a, g)
                    if g2 is None:
                        continue
                    out.append(((B | {s2}, t, g2), (sym,)))
                    dropped = (B - {s}) | {s2}
                    if dropped != B | {s2}:
                        out.append(((dropped, t, g2), (sym,)))
            return out

        init = (frozenset([contrib.init_state]), leader.init_state,
                sys.registers.init_value)
        aut = PAutomaton.from_config(init, (leader.init_stack,))
        _saturate(aut, rules, control_cap=control_cap)
        self.automaton = aut
        self.controls = aut.controls
        self.empty_stack = {c for c in aut.controls if aut.accepts_empty(c)}
        self._tops = {
            c: frozenset(sym for sym, _ in aut.by_source.get(c, ()))
            for c in aut.controls
        }
        self._maximal: dict = {}

    def tops(self, control) -> frozenset:
        return self._tops.get(control, frozenset())

    def heads(self):
        """Sorted (leader control, top symbol, register) triples seen."""
        out = {
            (t, sym, g)
            for (B, t, g) in self.controls
            for sym in self.tops((B, t, g))
        }
        return sorted(out, key=repr)

    def maximal_sets(self, t, sym, g):
        """Inclusion-maximal contributor sets reachable at this head."""
        key = (t, sym, g)
        if key not in self._maximal:
            sets = [
                B
                for (B, t2, g2) in self.controls
                if t2 == t and g2 == g and sym in self.tops((B, t2, g2))
            ]
            maximal = []
            for B in sorted(sets, key=len, reverse=True):
                if not any(B < other for other in maximal):
                    maximal.append(B)
            self._maximal[key] = maximal
        return self._maximal[key]

    def covers(self, states, t, sym, g) -> bool:
        need = frozenset(states)
        return any(need <= B for B in self.maximal_sets(t, sym, g))


def _cycle_candidates(contrib: FiniteTS):
    """For each value, the states on some contributor cycle through a write
    of that value (a cheap necessary condition for supplying it forever)."""
    graph = {s: [] for s in contrib.states}
    for s, _, s2 in contrib.transitions:
        graph[s].append(s2)
    comp_of = {}
    comps = []
    for comp in _sccs(graph):
        members = frozenset(comp)
        comps.append(members)
        for s in members:
            comp_of[s] = members
    cand: dict = {}
    for s, a, s2 in contrib.transitions:
        if a.kind == KIND_WRITE and comp_of[s] is comp_of[s2]:
            cand.setdefault(a.value, set()).update(comp_of[s])
    return {h: sorted(states, key=repr) for h, states in cand.items()}


def _loop_language_pda(leader, registers, q, A, g, h_seq, flag_pred):
    """Pushdown for the leader-side loop words from head (q, A).

    Controls track the leader state, the register value, how many of the
    values in h_seq have been enrolled so far, and whether a flagged letter
    has fired.  Words run from stack A alone and acceptance (via a silent
    hop to a sentinel control) requires top A again, register g, all values
    enrolled in order, and the flag set.  Reads are allowed when the value
    matches the register or is already enrolled; every write, read, and
    enrollment letter sets the register to its value.
    """
    m = len(h_seq)
    done = ("#done",)
    init = (q, g, 0, False)
    seen = {init}
    frontier = [init]
    rules = []
    while frontier:
        c = frontier.pop()
        t, reg, phase, flag = c

        def emit(top, action, target, push):
            rules.append(PdsRule(c, top, action, target, push))
            if target not in seen:
                seen.add(target)
                frontier.append(target)

        for top in sorted(leader.stack_alphabet):
            for r in leader.by_top.get((t, top), ()):
                a = r.action
                if a.is_eps:
                    emit(top, EPS_L, (r.target, reg, phase, flag), r.push)
                    continue
                if a.kind == KIND_READ:
                    if a.value != reg and a.value not in h_seq[:phase]:
                        continue
                    reg2 = a.value
                elif a.kind == KIND_WRITE:
                    reg2 = a.value
                else:
                    reg2 = reg
                emit(top, a, (r.target, reg2, phase, flag or flag_pred(a)), r.push)
            if phase < m:
                h = h_seq[phase]
                mark = nu(h)
                emit(top, mark,
                     (t, h, phase + 1, flag or flag_pred(mark)), (top,))
        if c == (q, g, m, True):
            rules.append(PdsRule(c, A, EPS_L, done, (A,)))
    states = set(seen) | {done}
    return PushdownSystem(states, leader.stack_alphabet, rules, init, A), done


def _nu_pattern_nfa(h_seq, alphabet) -> Nfa:
    """Words whose enrollment-marker subsequence is exactly h_seq in order."""
    m = len(h_seq)
    transitions = []
    for i in range(m + 1):
        for a in alphabet:
            if is_nu(a):
                if i < m and a.value == h_seq[i]:
                    transitions.append((i, a, i + 1))
            else:
                transitions.append((i, a, i))
    return Nfa(range(m + 1), transitions, 0, [m])


def _intersection_nonempty(nfas) -> bool:
    """Emptiness of the product, driven by the first automaton's alphabet."""
    alphabet = nfas[0].alphabet()
    start = tuple(n.eps_closure({n.initial}) for n in nfas)
    seen = {start}
    todo = [start]
    while todo:
        cur = todo.pop()
        if all(part & n.accepting for part, n in zip(cur, nfas)):
            return True
        for a in alphabet:
            nxt = tuple(n.step(part, a) for part, n in zip(cur, nfas))
            if any(not part for part in nxt):
                continue
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return False


def _first_yes(guesses, evaluate, jobs, stats):
    """Find the least-index guess that evaluates true.

    With jobs > 1, guesses are evaluated in fixed-size parallel chunks; the
    earliest chunk containing a hit yields its least index, so the result
    matches the sequential order exactly.
    """
    if not jobs or jobs <= 1:
        for gu in guesses:
            stats["guesses_enumerated"] += 1
            if evaluate(gu):
                return gu
        return None
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        for base in range(0, len(guesses), jobs):
            chunk = guesses[base:base + jobs]
            results = list(ex.map(evaluate, chunk))
            stats["guesses_enumerated"] += len(chunk)
            for gu, hit in zip(chunk, results):
                if hit:
                    return gu
    return None


def _buchi_core(work_sys: CDSystem, flag_pred, stats, jobs=None):
    """Search for an infinite run firing flagged letters forever.

    Looks for a reachable head (q, A, g) covering a tuple of contributor
    states that can each keep one enrolled value supplied, together with a
    leader-side loop word over the head whose subword closure meets the
    enrollment pattern and every supply condition.  Returns the winning
    guess (q, A, g, h_seq, p_seq) or None.
    """
    registers = work_sys.registers
    leader = work_sys.leader
    contrib = work_sys.contributor
    table = SetReachTable(work_sys)
    stats["states_explored"] += len(table.controls)

    writable = sorted(
        {a.value for _, a, _ in contrib.transitions if a.kind == KIND_WRITE}
    )
    cand = _cycle_candidates(contrib)
    internal_letters = sorted(
        {r.action for r in leader.rules if r.action.kind == KIND_INTERNAL},
        key=repr,
    )
    n_values = len(registers.values)
    n_states = len(contrib.states)
    guesses = []
    stratum: dict = {}
    for head in table.heads():
        q, A, g = head
        for m in range(0, min(len(writable), n_values) + 1):
            for h_seq in permutations(writable, m):
                pools = [cand.get(h, ()) for h in h_seq]
                if any(not pool for pool in pools):
                    continue
                for p_seq in product(*pools):
                    guesses.append((q, A, g, h_seq, p_seq))
                    key = (head, m)
                    stratum[key] = stratum.get(key, 0) + 1
    for (head, m), n in stratum.items():
        assert m <= n_values
        assert n <= math.perm(n_values, m) * n_states ** m

    ck_memo: dict = {}
    closure_memo: dict = {}

    def closure_for(q, A, g, h_seq):
        key = (q, A, g, h_seq)
        if key not in closure_memo:
            pda, done = _loop_language_pda(
                leader, registers, q, A, g, h_seq, flag_pred
            )
            stats["states_explored"] += len(pda.states)
            if h_seq:
                down = downward_closure(pda, {done})
                pattern = _nu_pattern_nfa(h_seq, down.alphabet())
                closure_memo[key] = (down, pattern)
            else:
                aut = saturate_post(pda, PAutomaton.from_config(pda.init_state,
                                                                (A,)))
                closure_memo[key] = aut.has_head(done, A)
        return closure_memo[key]

    def evaluate(guess):
        q, A, g, h_seq, p_seq = guess
        if p_seq and not table.covers(p_seq, q, A, g):
            return False
        got = closure_for(q, A, g, h_seq)
        if not h_seq:
            return got
        down, pattern = got
        query = SupportQuery(h_seq, p_seq, g)
        key = frozenset(h_seq)
        if key not in ck_memo:
            from .capacity import build_Ck

            ck_memo[key] = build_Ck(contrib, registers, allowed_nu=sorted(key))
        supports = [
            support_automaton(ck_memo[key], i, query, internal_letters)
            for i in range(1, len(h_seq) + 1)
        ]
        return _intersection_nonempty([down, pattern] + supports)

    return _first_yes(guesses, evaluate, jobs, stats)


def decide_repeated_reach(sys: CDSystem, top, confirm: Bounds | None = None,
                          jobs: int | None = None) -> Verdict:
    """Is there an infinite run firing the given leader action forever?"""
    t0 = time.monotonic()
    confirm = DEFAULT_CONFIRM if confirm is None else confirm
    work_sys = _finite_view(sys)
    stats = {"states_explored": 0, "guesses_enumerated": 0}
    hit = _buchi_core(work_sys, lambda a: a == top, stats, jobs=jobs)
    witness = None
    if hit is not None:
        answer = "Yes"
        stats["guess"] = hit
        witness = oracle_buchi(sys, top, confirm)
        if witness is None:
            stats["note"] = "witness beyond oracle bounds"
    else:
        answer = "No"
    stats["wall_time"] = time.monotonic() - t0
    return Verdict(answer, witness, stats)


def _pruned_system(sys: CDSystem, top) -> CDSystem:
    """Copy of the system with every leader rule firing the action removed."""
    leader = sys.leader
    rules = [r for r in leader.rules if r.action != top]
    pruned = PushdownSystem(leader.states, leader.stack_alphabet, rules,
                            leader.init_state, leader.init_stack)
    return CDSystem(sys.registers, sys.contributor, pruned)


def _tracked_view(sys: CDSystem):
    """Like _finite_view, but remembers where truncation lost information.

    Returns (system, uncertain) where uncertain holds the contributor states
    whose enabled moves cannot be certified because the retained stack part
    ran out below a truncation point.
    """
    if not sys.contributor_is_pushdown:
        return sys, frozenset()
    fts = restrict_tracked(sys.contributor, default_bound(sys.contributor))
    return CDSystem(sys.registers, fts, sys.leader), fts.uncertain_states


def _leader_alone_automaton(leader: PushdownSystem, registers,
                            control_cap: int = 500_000) -> PAutomaton:
    """Post* automaton of the leader running with no contributors at all."""

    def rules(control, sym):
        t, g = control
        out = []
        for r in leader.by_top.get((t, sym), ()):
            g2 = _register_effect(r.action, g)
            if g2 is not None:
                out.append(((r.target, g2), r.push))
        return out

    aut = PAutomaton.from_config((leader.init_state, registers.init_value),
                                 (leader.init_stack,))
    _saturate(aut, rules, control_cap=control_cap)
    return aut


def _neutral_cycle_reachers(contrib: FiniteTS, g) -> frozenset:
    """Contributor states that can reach a cycle of moves enabled at g.

    Only moves that leave the register at g qualify (silent moves, internal
    actions, reads of g and writes of g), so one copy sitting in such a
    cycle can keep stepping forever while everything else stays put.
    """
    graph = {s: set() for s in contrib.states}
    for s, a, s2 in contrib.transitions:
        if _register_effect(a, g) == g:
            graph[s].add(s2)
    cyc = set()
    for comp in _sccs(graph):
        comp = set(comp)
        if len(comp) > 1 or any(c in graph[c] for c in comp):
            cyc |= comp
    rev = {s: [] for s in graph}
    for s, outs in graph.items():
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


def _self_covering_heads(leader: PushdownSystem):
    """Heads (state, top) whose silent sub-pushdown can grow back over them.

    From such a head the leader owns an infinite run of silent steps: the
    segment that returns to the same state with the same symbol on top of a
    possibly taller stack never needs anything underneath, so it can repeat
    forever.  Checked per head by saturating the one-step successors.
    """
    eps_by_top: dict = {}
    for r in leader.rules:
        if r.action.is_eps:
            eps_by_top.setdefault((r.state, r.top), []).append(r)
    if not eps_by_top:
        return []

    def rules(control, sym):
        return [(r.target, r.push) for r in eps_by_top.get((control, sym), ())]

    heads = []
    for (p, A) in sorted(eps_by_top, key=repr):
        starts = [(r.target, r.push) for r in eps_by_top[(p, A)]]
        aut = PAutomaton.from_configs(starts)
        _saturate(aut, rules)
        if aut.has_head(p, A):
            heads.append((p, A))
    return heads


def _divergence_pre(leader: PushdownSystem, sc_heads) -> PAutomaton:
    """Pre* automaton of the silent sub-pushdown from the covering heads."""
    start = PAutomaton()
    sink = ("#any",)
    for (p, A) in sc_heads:
        start.controls.add(p)
        start.add_edge(p, A, sink)
    for sym in leader.stack_alphabet:
        start.add_edge(sink, sym, sink)
    start.add_final(sink)
    rules = [
        (r.state, r.top, r.target, r.push)
        for r in leader.rules
        if r.action.is_eps
    ]
    return _saturate_pre(rules, start, leader.states)


def _product_nonempty(aut1: PAutomaton, s1, aut2: PAutomaton, s2) -> bool:
    """Do the two automata accept a common word from these start states?"""
    seen = {(s1, s2)}
    frontier = deque(seen)
    while frontier:
        x, y = frontier.popleft()
        if x in aut1.finals and y in aut2.finals:
            return True
        for sym, x2 in aut1.by_source.get(x, ()):
            for sym2, y2 in aut2.by_source.get(y, ()):
                if sym2 == sym and (x2, y2) not in seen:
                    seen.add((x2, y2))
                    frontier.append((x2, y2))
    return False


def decide_max_safe(sys: CDSystem, top, confirm: Bounds | None = None,
                    jobs: int | None = None) -> Verdict:
    """Is there a maximal run that never fires the given leader action?

    Works on the action-pruned system.  A witness is either a reachable
    configuration that nothing can leave (checked against the unpruned
    rules, for any contributor count including zero) or an infinite pruned
    run; the infinite ones are split into a contributor spinning at a fixed
    register value, the leader going silent forever, and lassos that keep
    firing visible letters.
    """
    t0 = time.monotonic()
    confirm = DEFAULT_CONFIRM if confirm is None else confirm
    stats = {"states_explored": 0, "guesses_enumerated": 0}
    pruned = _pruned_system(sys, top)
    work, uncertain = _tracked_view(pruned)
    table = SetReachTable(work)
    stats["states_explored"] += len(table.controls)
    by_state = work.contributor.by_state
    leader = sys.leader
    controls = sorted(table.controls, key=repr)
    hit = None

    def leader_stuck(t, sym, g):
        return all(
            _register_effect(r.action, g) is None
            for r in leader.by_top.get((t, sym), ())
        )

    for control in controls:
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
            hit = ("deadlock", control, None)
            break
        for sym in sorted(table.tops(control), key=repr):
            if leader_stuck(t, sym, g):
                hit = ("deadlock", control, sym)
                break
        if hit:
            break

    if hit is None:
        aut0 = _leader_alone_automaton(pruned.leader, sys.registers)
        stats["states_explored"] += len(aut0.controls)
        for control in sorted(aut0.controls, key=repr):
            t, g = control
            if aut0.accepts_empty(control):
                hit = ("deadlock-alone", control, None)
                break
            for sym in sorted(
                {x for x, _ in aut0.by_source.get(control, ())}, key=repr
            ):
                if leader_stuck(t, sym, g):
                    hit = ("deadlock-alone", control, sym)
                    break
            if hit:
                break

    if hit is None:
        reachers: dict = {}
        for control in controls:
            B, t, g = control
            if g not in reachers:
                reachers[g] = _neutral_cycle_reachers(work.contributor, g)
            if B & reachers[g]:
                hit = ("contributor-spin", control)
                break

    if hit is None:
        sc = _self_covering_heads(pruned.leader)
        if sc:
            pre = _divergence_pre(pruned.leader, sc)
            for control in controls:
                B, t, g = control
                if _product_nonempty(pre, t, table.automaton, control):
                    hit = ("leader-silent-spin", control)
                    break

    if hit is None:
        guess = _buchi_core(work, lambda a: True, stats, jobs=jobs)
        if guess is not None:
            hit = ("letters-forever", guess)

    witness = None
    if hit is not None:
        answer = "Yes"
        stats["branch"] = hit[0]
        stats["guess"] = hit[1:]
        witness = oracle_max_safe(sys, top, confirm)
        if witness is None:
            stats["note"] = "witness beyond oracle bounds"
    else:
        answer = "No"
    stats["wall_time"] = time.monotonic() - t0
    return Verdict(answer, witness, stats)


def decide_universal_reach(sys: CDSystem, top, confirm: Bounds | None = None,
                           jobs: int | None = None) -> Verdict:
    """Must every maximal run fire the given leader action at least once?

    Decided as the complement of decide_max_safe; a No verdict carries the
    offending maximal run as its witness.
    """
    t0 = time.monotonic()
    inner = decide_max_safe(sys, top, confirm=confirm, jobs=jobs)
    stats = dict(inner.stats or {})
    answer = "No" if inner.is_yes else "Yes"
    stats["wall_time"] = time.monotonic() - t0
    return Verdict(answer, inner.witness, stats)
