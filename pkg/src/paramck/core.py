"""Model types for leader/contributor shared-register systems.

A system couples one identified pushdown process (the leader) with an
arbitrary number of identical anonymous processes (the contributors), all
communicating through a single shared register that holds values from a fixed
finite domain.  Writes always succeed, reads are guarded by the current
register value, and there is no atomic read-modify-write.

This module holds the basic vocabulary: actions, the two process shapes
(pushdown and finite-state), the combined system, configurations with a
contributor multiset, validation, and the one-step successor relation.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

LEADER = "leader"
CONTRIBUTOR = "contributor"

KIND_WRITE = "write"
KIND_READ = "read"
KIND_INTERNAL = "internal"
KIND_EPS = "eps"


class LimitExceeded(Exception):
    """An internal exploration cap was hit; the query is undecided, not No."""


class Action(NamedTuple):
    role: str
    kind: str
    value: str  # register value, internal label, or "" for eps

    @property
    def is_eps(self) -> bool:
        return self.kind == KIND_EPS

    @property
    def touches_register(self) -> bool:
        return self.kind in (KIND_WRITE, KIND_READ)

    def pretty(self) -> str:
        tag = "D" if self.role == LEADER else "C"
        if self.kind == KIND_WRITE:
            return f"{tag}:w({self.value})"
        if self.kind == KIND_READ:
            return f"{tag}:r({self.value})"
        if self.kind == KIND_INTERNAL:
            return f"{tag}:act({self.value})"
        return f"{tag}:eps"


def lw(g: str) -> Action:
    return Action(LEADER, KIND_WRITE, g)


def lr(g: str) -> Action:
    return Action(LEADER, KIND_READ, g)


def lact(label: str) -> Action:
    return Action(LEADER, KIND_INTERNAL, label)


def cw(g: str) -> Action:
    return Action(CONTRIBUTOR, KIND_WRITE, g)


def cr(g: str) -> Action:
    return Action(CONTRIBUTOR, KIND_READ, g)


def cact(label: str) -> Action:
    return Action(CONTRIBUTOR, KIND_INTERNAL, label)


EPS_L = Action(LEADER, KIND_EPS, "")
EPS_C = Action(CONTRIBUTOR, KIND_EPS, "")

#: Conventional name for the distinguished leader action of the four queries.
TOP = lact("top")


def trace_of(actions: Iterable[Action]) -> tuple[Action, ...]:
    """Drop silent steps; what remains is the observable trace."""
    return tuple(a for a in actions if not a.is_eps)


class PdsRule(NamedTuple):
    state: object
    top: str
    action: Action
    target: object
    push: tuple[str, ...]  # replaces the top symbol; length <= MAX_PUSH


#: Replacement words are capped so a single step stays constant-size; longer
#: pushes must be pre-expanded through intermediate states.
MAX_PUSH = 2


class PushdownSystem:
    """Control states over a stack; transitions fire on the top symbol."""

    def __init__(self, states, stack_alphabet, rules, init_state, init_stack):
        self.states = frozenset(states)
        self.stack_alphabet = frozenset(stack_alphabet)
        self.rules = tuple(rules)
        self.init_state = init_state
        self.init_stack = init_stack
        by_top: dict[tuple, list[PdsRule]] = {}
        for rule in self.rules:
            by_top.setdefault((rule.state, rule.top), []).append(rule)
        self.by_top = {k: tuple(v) for k, v in by_top.items()}

    def moves(self, state, stack: tuple[str, ...]):
        """Successor (action, state, stack) triples, ignoring the register."""
        if not stack:
            return ()
        out = []
        for rule in self.by_top.get((state, stack[0]), ()):
            out.append((rule.action, rule.target, rule.push + stack[1:]))
        return out

    @property
    def init_config(self):
        return (self.init_state, (self.init_stack,))


class FiniteTS:
    """Finite transition system; states may be any hashable, comparable set."""

    def __init__(self, states, transitions, init_state):
        self.states = frozenset(states)
        self.transitions = tuple(transitions)
        self.init_state = init_state
        by_state: dict[object, list] = {}
        for s, a, t in self.transitions:
            by_state.setdefault(s, []).append((a, t))
        self.by_state = {k: tuple(v) for k, v in by_state.items()}

    def moves(self, state):
        return self.by_state.get(state, ())


class RegisterDomain:
    def __init__(self, values, initial: int = 0):
        self.values = tuple(values)
        self.initial = initial

    @property
    def init_value(self) -> str:
        return self.values[self.initial]

    def __contains__(self, g) -> bool:
        return g in self.values


class Configuration(NamedTuple):
    contributors: tuple  # sorted multiset of local configurations
    leader: tuple  # (state, stack)
    register: str


class CDSystem:
    def __init__(self, registers: RegisterDomain, contributor, leader: PushdownSystem):
        self.registers = registers
        self.contributor = contributor
        self.leader = leader

    @property
    def contributor_is_pushdown(self) -> bool:
        return isinstance(self.contributor, PushdownSystem)

    def contributor_init_local(self):
        if self.contributor_is_pushdown:
            return self.contributor.init_config
        return self.contributor.init_state

    def initial_config(self, n: int) -> Configuration:
        locals_ = tuple([self.contributor_init_local()] * n)
        return Configuration(locals_, self.leader.init_config, self.registers.init_value)


def canon_multiset(locals_: Iterable) -> tuple:
    return tuple(sorted(locals_))


def validate(sys: CDSystem) -> list[str]:
    """Well-formedness report; empty list means the system is usable."""
    report: list[str] = []
    regs = sys.registers
    if not regs.values:
        report.append("register domain is empty")
    if len(set(regs.values)) != len(regs.values):
        report.append("register values are not pairwise distinct")
    if not (0 <= regs.initial < max(1, len(regs.values))):
        report.append("initial register index out of range")

    def check_action(a: Action, role: str, where: str):
        if a.role != role:
            report.append(f"{where}: role mismatch ({a.pretty()} in {role} process)")
        if a.touches_register and a.value not in regs.values:
            report.append(f"{where}: unknown register value {a.value!r}")
        if a.kind not in (KIND_WRITE, KIND_READ, KIND_INTERNAL, KIND_EPS):
            report.append(f"{where}: unknown action kind {a.kind!r}")

    def check_pds(pds: PushdownSystem, role: str, name: str):
        if pds.init_state not in pds.states:
            report.append(f"{name}: initial state undeclared")
        if pds.init_stack not in pds.stack_alphabet:
            report.append(f"{name}: initial stack symbol undeclared")
        for i, rule in enumerate(pds.rules):
            where = f"{name} rule {i}"
            if rule.state not in pds.states or rule.target not in pds.states:
                report.append(f"{where}: undeclared state")
            if rule.top not in pds.stack_alphabet:
                report.append(f"{where}: undeclared stack symbol {rule.top!r}")
            if any(x not in pds.stack_alphabet for x in rule.push):
                report.append(f"{where}: undeclared pushed symbol")
            if len(rule.push) > MAX_PUSH:
                report.append(f"{where}: push word longer than {MAX_PUSH}")
            check_action(rule.action, role, where)

    def check_fts(fts: FiniteTS, role: str, name: str):
        if fts.init_state not in fts.states:
            report.append(f"{name}: initial state undeclared")
        for i, (s, a, t) in enumerate(fts.transitions):
            where = f"{name} transition {i}"
            if s not in fts.states or t not in fts.states:
                report.append(f"{where}: undeclared state")
            check_action(a, role, where)

    check_pds(sys.leader, LEADER, "leader")
    if sys.contributor_is_pushdown:
        check_pds(sys.contributor, CONTRIBUTOR, "contributor")
    else:
        check_fts(sys.contributor, CONTRIBUTOR, "contributor")
    return report


def _register_effect(action: Action, g: str):
    """New register value, or None when the move is disabled at g."""
    if action.kind == KIND_WRITE:
        return action.value
    if action.kind == KIND_READ:
        return action.value if action.value == g else None
    return g


def leader_moves(sys: CDSystem, leader_cfg, g: str):
    out = []
    for action, state, stack in sys.leader.moves(*leader_cfg):
        h = _register_effect(action, g)
        if h is not None:
            out.append((action, (state, stack), h))
    return out


def contributor_moves(sys: CDSystem, local, g: str):
    out = []
    if sys.contributor_is_pushdown:
        for action, state, stack in sys.contributor.moves(*local):
            h = _register_effect(action, g)
            if h is not None:
                out.append((action, (state, stack), h))
    else:
        for action, target in sys.contributor.moves(local):
            h = _register_effect(action, g)
            if h is not None:
                out.append((action, target, h))
    return out


def step(sys: CDSystem, c: Configuration):
    """All one-step successors, sorted for deterministic search orders."""
    succs = []
    for action, leader_cfg, h in leader_moves(sys, c.leader, c.register):
        succs.append((action, Configuration(c.contributors, leader_cfg, h)))
    for local in set(c.contributors):
        rest = list(c.contributors)
        rest.remove(local)
        for action, new_local, h in contributor_moves(sys, local, c.register):
            contributors = canon_multiset(rest + [new_local])
            succs.append((action, Configuration(contributors, c.leader, h)))
    succs.sort()
    return succs


class LeaderProduct(NamedTuple):
    pds: PushdownSystem
    repeating: frozenset  # product states whose property component repeats
    final: frozenset  # product states whose property component accepts finite runs


def product_leader_automaton(leader: PushdownSystem, prop) -> LeaderProduct:
    """Synchronize the leader with a property automaton over its actions.

    `prop` must expose `states`, `initial`, `repeating`, `final` and
    `successors(state, action)`.  Silent leader steps do not advance the
    property.  Only pairs reachable from the initial pair are materialized.
    """
    dead = ("__dead__", None)
    if not prop.states or prop.initial not in prop.states:
        pds = PushdownSystem([dead], leader.stack_alphabet, [], dead, leader.init_stack)
        return LeaderProduct(pds, frozenset(), frozenset())

    init = (leader.init_state, prop.initial)
    seen = {init}
    frontier = [init]
    rules = []
    while frontier:
        q, p = frontier.pop()
        for rule in leader.rules:
            if rule.state != q:
                continue
            if rule.action.is_eps:
                targets = [p]
            else:
                targets = sorted(prop.successors(p, rule.action))
            for p2 in targets:
                pair = (rule.target, p2)
                rules.append(PdsRule((q, p), rule.top, rule.action, pair, rule.push))
                if pair not in seen:
                    seen.add(pair)
                    frontier.append(pair)
    pds = PushdownSystem(seen, leader.stack_alphabet, rules, init, leader.init_stack)
    repeating = frozenset(s for s in seen if s[1] in prop.repeating)
    final = frozenset(s for s in seen if s[1] in prop.final)
    return LeaderProduct(pds, repeating, final)
