"""Summary machines for runs backed by an unbounded contributor crowd.

Once some contributor has written a value, arbitrarily many idle copies can
be steered to repeat that write later, as often as needed.  A register value
therefore matters in two ways: the current content, and the set of values
the crowd can reproduce on demand.  The machines here track both.

The leader summary runs the leader over control states (K, t, g) where K is
the reproducible set: leader writes and reads keep K; a read r(h) is enabled
when h is the register content or h is in K (the crowd re-supplies h just in
time); a marker move nu(h) enrolls a genuinely new value h into K.

The contributor summary follows one tracked contributor through a word of
leader moves and markers.  The tracked copy's own writes are restricted to
enrolled values; its reads may also use the current content.  Every valued
letter, whoever produced it, sets the register to its value.

A word of leader letters and markers is supported when, for each marker
nu(h_i), some tracked contributor starting and ending in the same state with
the same register can interleave with the word and produce the marked first
write of h_i immediately after the marker.  Such loops can be stacked into
behaviors of a real finite crowd, one loop instance per needed re-supply.
"""

from __future__ import annotations

from typing import NamedTuple

from .core import (
    CONTRIBUTOR,
    KIND_READ,
    KIND_WRITE,
    LEADER,
    Action,
    FiniteTS,
    LimitExceeded,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    cw,
)
from .downclosure import Nfa


class NuAction(NamedTuple):
    """Marker for the first write of a fresh value by the crowd."""

    value: str

    @property
    def is_eps(self) -> bool:
        return False

    @property
    def touches_register(self) -> bool:
        return True

    def pretty(self) -> str:
        return f"nu({self.value})"


def nu(h: str) -> NuAction:
    return NuAction(h)


def is_nu(a) -> bool:
    return isinstance(a, NuAction)


def is_leader_or_nu(a) -> bool:
    return is_nu(a) or getattr(a, "role", None) == LEADER


def project_leader_nu(word):
    """Keep leader letters and markers; drop tracked-contributor letters."""
    return tuple(a for a in word if is_leader_or_nu(a))


class CapacityState(NamedTuple):
    K: int  # bitset over the register domain order
    local: object  # process state of the summarized machine
    reg: str  # current register value


def value_bit(registers: RegisterDomain, h: str) -> int:
    return 1 << registers.values.index(h)


def kbits(registers: RegisterDomain, values) -> int:
    mask = 0
    for h in values:
        mask |= value_bit(registers, h)
    return mask


def kvalues(registers: RegisterDomain, mask: int):
    return tuple(h for i, h in enumerate(registers.values) if mask >> i & 1)


def last_value(word) -> str:
    """Register content after the word: value of its last valued letter.

    Internal and silent letters never move the register and are skipped.
    A word with no valued letter at all has no defined content.
    """
    for a in reversed(tuple(word)):
        if is_nu(a) or a.touches_register:
            return a.value
    raise ValueError("word has no register effect")


def dk_successors(leader: PushdownSystem, registers: RegisterDomain, cstate, top):
    """Moves of the leader summary at control cstate with `top` of stack.

    Returns (letter, control, push) triples: leader moves relabel the rule's
    own action, marker moves leave the stack alone.
    """
    K, t, g = cstate
    out = []
    for rule in leader.by_top.get((t, top), ()):
        a = rule.action
        if a.kind == KIND_WRITE:
            out.append((a, CapacityState(K, rule.target, a.value), rule.push))
        elif a.kind == KIND_READ:
            if a.value == g or K & value_bit(registers, a.value):
                out.append((a, CapacityState(K, rule.target, a.value), rule.push))
        else:  # internal or silent: register untouched
            out.append((a, CapacityState(K, rule.target, g), rule.push))
    for h in registers.values:
        bit = value_bit(registers, h)
        if not K & bit:
            out.append((NuAction(h), CapacityState(K | bit, t, h), (top,)))
    return out


def build_Dk(leader: PushdownSystem, registers: RegisterDomain) -> PushdownSystem:
    """Materialized leader summary, all controls reachable from any (0, t, g)."""
    seeds = [
        CapacityState(0, t, g)
        for t in sorted(leader.states, key=repr)
        for g in registers.values
    ]
    seen = set(seeds)
    frontier = list(seeds)
    rules = []
    while frontier:
        c = frontier.pop()
        for top in sorted(leader.stack_alphabet):
            for letter, c2, push in dk_successors(leader, registers, c, top):
                rules.append(PdsRule(c, top, letter, c2, push))
                if c2 not in seen:
                    seen.add(c2)
                    frontier.append(c2)
    init = CapacityState(0, leader.init_state, registers.init_value)
    pds = PushdownSystem(seen, leader.stack_alphabet, rules, init, leader.init_stack)
    pds.registers = registers
    return pds


def ck_successors(contributor: FiniteTS, registers: RegisterDomain, cstate,
                  allowed_nu=None):
    """Moves of the tracked-contributor summary at cstate.

    `allowed_nu` restricts which marker values may be enrolled (None: all).
    Leader internal letters are not listed; they never change the summary
    state, and consumers treat them as self-loops.
    """
    K, p, g = cstate
    out = []
    for h in registers.values:
        out.append((Action(LEADER, KIND_WRITE, h), CapacityState(K, p, h)))
        if h == g or K & value_bit(registers, h):
            out.append((Action(LEADER, KIND_READ, h), CapacityState(K, p, h)))
    for h in (registers.values if allowed_nu is None else allowed_nu):
        bit = value_bit(registers, h)
        if not K & bit:
            out.append((NuAction(h), CapacityState(K | bit, p, h)))
    for a, q in contributor.moves(p):
        if a.kind == KIND_WRITE:
            if K & value_bit(registers, a.value):
                out.append((a, CapacityState(K, q, a.value)))
        elif a.kind == KIND_READ:
            if a.value == g or K & value_bit(registers, a.value):
                out.append((a, CapacityState(K, q, a.value)))
        else:  # internal or silent contributor move
            out.append((a, CapacityState(K, q, g)))
    return out


def build_Ck(contributor: FiniteTS, registers: RegisterDomain,
             allowed_nu=None, state_cap=500_000) -> FiniteTS:
    """Materialized tracked-contributor summary.

    All states reachable from any (0, p, g) seed are included so the result
    can be run from the varying start states the support check needs.
    """
    seeds = [
        CapacityState(0, p, g)
        for p in sorted(contributor.states, key=repr)
        for g in registers.values
    ]
    seen = set(seeds)
    frontier = list(seeds)
    transitions = []
    while frontier:
        c = frontier.pop()
        for letter, c2 in ck_successors(contributor, registers, c, allowed_nu):
            transitions.append((c, letter, c2))
            if c2 not in seen:
                if len(seen) >= state_cap:
                    raise LimitExceeded("contributor summary too large")
                seen.add(c2)
                frontier.append(c2)
    init = CapacityState(0, contributor.init_state, registers.init_value)
    fts = FiniteTS(seen, transitions, init)
    fts.registers = registers
    return fts


class SupportQuery(NamedTuple):
    h_seq: tuple  # pairwise-distinct register values, enrollment order
    p_seq: tuple  # tracked-contributor start states, one per enrollment
    g: str  # register content at both ends of every tracked loop

    @property
    def m(self) -> int:
        return len(self.h_seq)

    def check(self, registers: RegisterDomain):
        if len(self.h_seq) != len(self.p_seq):
            raise ValueError("need one tracked state per enrolled value")
        if len(set(self.h_seq)) != len(self.h_seq):
            raise ValueError("enrolled values must be pairwise distinct")
        if self.m > len(registers.values):
            raise ValueError("more enrollments than register values")
        for h in self.h_seq:
            if h not in registers.values:
                raise ValueError(f"unknown register value {h!r}")


def _nu_pattern(v):
    return tuple(a.value for a in v if is_nu(a))


def support_automaton(Ck: FiniteTS, i: int, q: SupportQuery, extra_letters=()):
    """NFA over leader letters and markers for the i-th support condition.

    Accepts exactly the projections of tracked-contributor interleavings
    that follow the word, enroll q.h_seq in order, produce the mandatory
    write of h_i immediately after its marker, and return to (p_i, q.g)
    with everything enrolled.  Tracked-contributor letters become silent
    edges; `extra_letters` (leader internal labels) become self-loops.
    """
    registers = Ck.registers
    q.check(registers)
    if not 1 <= i <= q.m:
        raise ValueError("support index out of range")
    h_i = q.h_seq[i - 1]
    full = kbits(registers, q.h_seq)
    # nodes carry the value of the last consumed word letter separately:
    # trailing tracked moves may restore the summary register, but the word
    # itself must still close at q.g
    start = (CapacityState(0, q.p_seq[i - 1], q.g), 0, False, None)
    seen = {start}
    frontier = [start]
    transitions = []
    while frontier:
        node = frontier.pop()
        cstate, phase, pending, vreg = node

        def add(letter, node2):
            transitions.append((node, letter, node2))
            if node2 not in seen:
                seen.add(node2)
                frontier.append(node2)

        if pending:
            for a, c2 in Ck.moves(cstate):
                if a == cw(h_i):
                    add(None, (c2, phase, False, vreg))
            continue
        for letter in extra_letters:
            add(letter, node)
        for a, c2 in Ck.moves(cstate):
            if is_nu(a):
                if phase < q.m and a.value == q.h_seq[phase]:
                    add(a, (c2, phase + 1, phase + 1 == i, a.value))
            elif a.role == LEADER:
                add(a, (c2, phase, False, a.value))
            else:
                add(None, (c2, phase, False, vreg))
    target = CapacityState(full, q.p_seq[i - 1], q.g)
    accepting = [
        n for n in seen if n[0] == target and n[1] == q.m and not n[2] and n[3] == q.g
    ]
    return Nfa(seen, transitions, start, accepting)


def check_omega_support(v, q: SupportQuery, Ck: FiniteTS) -> bool:
    """Direct test that the word v meets every support condition.

    Bounded memoized search over interleavings; the decision procedures use
    support_automaton instead, this is the independent cross-check.
    """
    registers = Ck.registers
    q.check(registers)
    if _nu_pattern(v) != tuple(q.h_seq):
        raise ValueError("word does not enroll exactly the queried values")
    v = tuple(v)
    if q.m and last_value(v) != q.g:
        return False
    full = kbits(registers, q.h_seq)

    nth = {}
    count = 0
    for pos, a in enumerate(v):
        if is_nu(a):
            count += 1
            nth[pos] = count

    def supported(i: int) -> bool:
        h_i = q.h_seq[i - 1]
        goal = (len(v), CapacityState(full, q.p_seq[i - 1], q.g), False)
        start = (0, CapacityState(0, q.p_seq[i - 1], q.g), False)
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            if node == goal:
                return True
            pos, cstate, pending = node
            moves = Ck.moves(cstate)
            if pending:
                for a, c2 in moves:
                    if a == cw(h_i):
                        nxt = (pos, c2, False)
                        if nxt not in seen:
                            seen.add(nxt)
                            frontier.append(nxt)
                continue
            succs = []
            for a, c2 in moves:
                if is_nu(a) or a.role == LEADER:
                    if pos < len(v) and v[pos] == a:
                        succs.append((pos + 1, c2, is_nu(a) and nth[pos] == i))
                else:
                    succs.append((pos, c2, False))
            if pos < len(v) and not v[pos].touches_register \
                    and not is_nu(v[pos]) and v[pos].role == LEADER:
                succs.append((pos + 1, cstate, False))
            for nxt in succs:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    return all(supported(i) for i in range(1, q.m + 1))
