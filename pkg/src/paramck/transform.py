"""Single-register protocol normal form and its trace correspondences.

The constructions here re-route every register interaction through the
leader: contributors stop touching the register directly and instead post a
request value, which the leader confirms by writing a matching
acknowledgment.  After the rewrite the leader's write sequence alone
determines the whole observable behavior, which is what makes the property
pipeline work: a trace property over both processes turns into a property
over leader writes only.

Three layers build on each other:

* ``simplify`` produces the request/acknowledge system over the enlarged
  value set (one request, acknowledgment and announcement value per
  operation, plus a fresh initial value).
* ``maximality_preserving`` extends the simplified system so that ends of
  maximal finite runs can be guessed, and mis-guesses are betrayed by a
  distinguished flag value; maximal traces avoiding the flag correspond to
  maximal traces of the source system.
* ``flatten_registers`` applies the same idea to systems with several
  registers, caching the register vector in the leader's control state.

``trans`` projects words of the rewritten systems back to source-alphabet
words, ``lift_trace`` is the converse per-letter expansion, and
``is_stutter_expansion`` is the contributor-replication preorder connecting
the two trace sets.

State names of source systems must be mutually comparable and comparable
with short strings (plain string names satisfy both); rewritten states are
uniformly shaped tuples so that configuration orderings stay well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    CONTRIBUTOR,
    EPS_L,
    KIND_EPS,
    KIND_INTERNAL,
    KIND_READ,
    KIND_WRITE,
    LEADER,
    Action,
    CDSystem,
    FiniteTS,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    canon_multiset,
    cr,
    cw,
    lr,
    lw,
    step,
)
from .downclosure import _sccs

#: Value spelling prefixes; source register values must not collide with them.
ASK = "ask"  # contributor requests an operation
OK = "ok"  # leader acknowledges a contributor operation
DID = "did"  # leader announces her own operation
BOOT_VALUE = "boot"  # fresh initial register value of rewritten systems


def _sorted(xs):
    return sorted(xs, key=repr)


class SimplifiedAlphabet:
    """Value vocabulary of the rewritten single-register systems.

    For every source value g there are six values: two request spellings
    (contributor asks for a write or a read of g), two acknowledgment
    spellings (leader confirms such an operation), and two announcement
    spellings (leader reports her own write or read of g).  Leader internal
    labels get announcement spellings too, and a fresh value seeds the
    register.  ``index`` distinguishes registers in the multi-register
    variant; None gives the plain spellings.
    """

    def __init__(self, values, internal_labels=(), index=None):
        self.source_values = tuple(values)
        self.internal_labels = tuple(internal_labels)
        self.index = index
        bad = [g for g in self.source_values if is_reserved_value(g)]
        if bad:
            raise ValueError(f"register values collide with protocol spellings: {bad}")

    def _op(self, op: str) -> str:
        return op if self.index is None else f"{op}{self.index}"

    def ask(self, op: str, g: str) -> str:
        return f"{ASK}:{self._op(op)}:{g}"

    def ok(self, op: str, g: str) -> str:
        return f"{OK}:{self._op(op)}:{g}"

    def did(self, op: str, g: str) -> str:
        return f"{DID}:{self._op(op)}:{g}"

    def values(self) -> tuple[str, ...]:
        out = [BOOT_VALUE]
        for g in self.source_values:
            for op in ("w", "r"):
                out.append(self.ask(op, g))
                out.append(self.ok(op, g))
                out.append(self.did(op, g))
        for label in self.internal_labels:
            out.append(self.did("act", label))
        return tuple(out)


def is_reserved_value(value: str) -> bool:
    if value == BOOT_VALUE:
        return True
    return value.split(":", 1)[0] in (ASK, OK, DID)


def decode_leader_write(value: str):
    """Source letter a leader write of this value announces, or None.

    Acknowledgments decode to the contributor letter they confirm,
    announcements to the leader letter they report.  Requests, the boot
    value and anything unprefixed decode to None; so do index-tagged
    spellings, which have no single-register counterpart.
    """
    parts = value.split(":", 2)
    if len(parts) != 3:
        return None
    family, op, g = parts
    if op and op[-1].isdigit():
        return None
    if family == OK and op == "w":
        return cw(g)
    if family == OK and op == "r":
        return cr(g)
    if family == DID and op == "w":
        return lw(g)
    if family == DID and op == "r":
        return lr(g)
    if family == DID and op == "act":
        return Action(LEADER, KIND_INTERNAL, g)
    return None


def _neutral(sym) -> tuple:
    return (sym,)


# ---------------------------------------------------------------------------
# The request/acknowledge rewrite.


def simplify(sys: CDSystem) -> CDSystem:
    """Rewrite a system so contributors talk to the register via the leader.

    Contributor operations split into a request write and an acknowledgment
    read, with a waiting state in between; the leader gains unconditional
    confirm rules answering any pending request.  Leader operations become
    writes of announcement values, with the register value she relies on
    cached in her control state.  Internal leader letters are announced as
    writes too, so infinite rewritten runs with infinitely many leader
    letters have infinitely many leader writes; silent steps stay silent.
    """
    G = sys.registers.values
    labels = _sorted(
        {r.action.value for r in sys.leader.rules if r.action.kind == KIND_INTERNAL}
    )
    alpha = SimplifiedAlphabet(G, labels)
    regs = RegisterDomain(alpha.values(), 0)
    leader = _simplify_leader(sys.leader, G, alpha, sys.registers.init_value)
    if sys.contributor_is_pushdown:
        contrib = _simplify_pushdown_contributor(sys.contributor, alpha)
    else:
        contrib = _simplify_finite_contributor(sys.contributor, alpha)
    return CDSystem(regs, contrib, leader)


def _hold(t, x):
    return ("hold", t, x)


def _simplify_leader(leader: PushdownSystem, G, alpha: SimplifiedAlphabet, g_init):
    states = set()
    marks = [(op, h) for op in ("w", "r") for h in _sorted(G)]
    for t in leader.states:
        for g in G:
            states.add(_hold(t, g))
        for op, h in marks:
            states.add(_hold(t, alpha.ok(op, h)))
    rules = []
    for r in leader.rules:
        if r.action.kind == KIND_WRITE:
            for g in _sorted(G):
                rules.append(PdsRule(_hold(r.state, g), r.top,
                                     lw(alpha.did("w", r.action.value)),
                                     _hold(r.target, r.action.value), r.push))
        elif r.action.kind == KIND_READ:
            g = r.action.value
            rules.append(PdsRule(_hold(r.state, g), r.top, lw(alpha.did("r", g)),
                                 _hold(r.target, g), r.push))
        elif r.action.kind == KIND_INTERNAL:
            for g in _sorted(G):
                rules.append(PdsRule(_hold(r.state, g), r.top,
                                     lw(alpha.did("act", r.action.value)),
                                     _hold(r.target, g), r.push))
        else:  # silent
            for g in _sorted(G):
                rules.append(PdsRule(_hold(r.state, g), r.top, EPS_L,
                                     _hold(r.target, g), r.push))
    # Confirm rules: from any control, answer any pending request.  A read
    # request is only confirmed when the cached value matches it.
    for t in _sorted(leader.states):
        for X in _sorted(leader.stack_alphabet):
            for g in _sorted(G):
                for h in _sorted(G):
                    rules.append(PdsRule(_hold(t, g), X, lr(alpha.ask("w", h)),
                                         _hold(t, alpha.ok("w", h)), _neutral(X)))
                rules.append(PdsRule(_hold(t, g), X, lr(alpha.ask("r", g)),
                                     _hold(t, alpha.ok("r", g)), _neutral(X)))
            for op, h in marks:
                rules.append(PdsRule(_hold(t, alpha.ok(op, h)), X,
                                     lw(alpha.ok(op, h)), _hold(t, h), _neutral(X)))
    return PushdownSystem(states, leader.stack_alphabet, rules,
                          _hold(leader.init_state, g_init), leader.init_stack)


def _at(s):
    return ("at", s)


def _simplify_finite_contributor(contrib: FiniteTS, alpha: SimplifiedAlphabet):
    states = {_at(s) for s in contrib.states}
    transitions = []
    for s, a, s2 in contrib.transitions:
        if a.kind == KIND_WRITE:
            op = "w"
        elif a.kind == KIND_READ:
            op = "r"
        else:  # internal or silent: unchanged
            transitions.append((_at(s), a, _at(s2)))
            continue
        pend = ("wait", op, a.value, s, s2)
        states.add(pend)
        transitions.append((_at(s), cw(alpha.ask(op, a.value)), pend))
        transitions.append((pend, cr(alpha.ok(op, a.value)), _at(s2)))
    return FiniteTS(states, transitions, _at(contrib.init_state))


def _simplify_pushdown_contributor(contrib: PushdownSystem, alpha: SimplifiedAlphabet):
    states = {_at(s) for s in contrib.states}
    rules = []
    for i, r in enumerate(contrib.rules):
        if r.action.kind == KIND_WRITE:
            op = "w"
        elif r.action.kind == KIND_READ:
            op = "r"
        else:
            rules.append(PdsRule(_at(r.state), r.top, r.action, _at(r.target), r.push))
            continue
        pend = ("wait", i)
        states.add(pend)
        rules.append(PdsRule(_at(r.state), r.top, cw(alpha.ask(op, r.action.value)),
                             pend, _neutral(r.top)))
        rules.append(PdsRule(pend, r.top, cr(alpha.ok(op, r.action.value)),
                             _at(r.target), r.push))
    return PushdownSystem(states, contrib.stack_alphabet, rules,
                          _at(contrib.init_state), contrib.init_stack)


# ---------------------------------------------------------------------------
# End-of-run preservation.


def _bottom_leader(sys: CDSystem) -> CDSystem:
    """Give the leader a stack bottom she can never pop.

    A leader that empties her stack is stuck without standing at any
    (state, top) pair, which the finish machinery cannot observe.  A fresh
    bottom symbol under the original stack turns that situation into an
    ordinary stuck pair.  Traces are unchanged: the bottom symbol is never
    matched by an original rule and the one added boot step is silent.
    """
    leader = sys.leader
    bot = "_bot"
    while bot in leader.stack_alphabet:
        bot += "_"
    boot = "_boot"
    while boot in leader.states:
        boot += "_"
    rules = list(leader.rules)
    rules.append(PdsRule(boot, bot, EPS_L, leader.init_state,
                         (leader.init_stack, bot)))
    bottomed = PushdownSystem(set(leader.states) | {boot},
                              set(leader.stack_alphabet) | {bot},
                              rules, boot, bot)
    return CDSystem(sys.registers, sys.contributor, bottomed)


def _leader_stuck_triples(leader: PushdownSystem, G, tops):
    """(state, top, value) triples at which the leader has no enabled rule.

    Writes, internal letters and silent steps are always enabled; a read
    only at the matching register value.  Pairs with no rules at all are
    stuck at every value.  ``tops`` restricts which stack symbols are
    considered: symbols that can never surface need no entries.
    """
    stuck = []
    for t in _sorted(leader.states):
        for X in _sorted(tops):
            rules = leader.by_top.get((t, X), ())
            for g in _sorted(G):
                if not any(r.action.kind != KIND_READ or r.action.value == g
                           for r in rules):
                    stuck.append((t, X, g))
    return stuck


def maximality_preserving(sys: CDSystem, guard_on: str = "target"):
    """Extend the simplified system so maximality survives the rewrite.

    Returns ``(extended_system, flag)``.  Maximal finite traces of the
    extended system that never write ``flag`` project, via ``trans`` with
    the source values and the flag dropped, exactly onto maximal traces of
    ``sys``; infinite traces coincide with those of the plain simplified
    system because the added machinery only ever moves forward into sinks.

    The leader guesses that the run is over by writing the bare source
    value she relies on; afterwards any request she could read, or the
    flag itself, proves the guess wrong and forces her to write the flag.
    Contributors park in a checking state on their last acknowledgment;
    once the bare value is out, a parked contributor that could still act
    reads it and writes the flag.  ``guard_on`` selects which state the
    parking inspects: ``"target"`` (default) always parks and adds an
    escape read of every value when the reached source state retains a
    write, internal or silent move; ``"source"`` instead forbids parking
    when the state the last operation started from had a write rule, which
    is stricter and misses some run ends.
    """
    if guard_on not in ("target", "source"):
        raise ValueError(f"guard_on must be 'target' or 'source': {guard_on!r}")
    G = sys.registers.values
    bottomed = _bottom_leader(sys)
    prime = simplify(bottomed)
    flag = "#"
    while flag in G:
        flag += "#"
    values = prime.registers.values + tuple(_sorted(G)) + (flag,)
    regs = RegisterDomain(values, 0)
    asks = [a for a in prime.registers.values if a.split(":", 1)[0] == ASK]
    # The fresh bottom symbol can only surface when some source rule pops.
    tops = set(sys.leader.stack_alphabet)
    if any(not r.push for r in sys.leader.rules):
        tops = set(bottomed.leader.stack_alphabet)
    leader = _extend_leader(prime.leader, bottomed.leader, G, asks, flag, tops,
                            set(sys.leader.states))
    if sys.contributor_is_pushdown:
        contrib = _extend_pushdown_contributor(prime.contributor, sys.contributor,
                                               G, flag, guard_on)
    else:
        contrib = _extend_finite_contributor(prime.contributor, sys.contributor,
                                             G, flag, guard_on)
    return CDSystem(regs, contrib, leader), flag


def _extend_leader(prime_leader: PushdownSystem, source_leader: PushdownSystem,
                   G, asks, flag, tops, finish_states):
    # finish_states excludes the synthetic boot state: its only reachable
    # top always has the silent push enabled, so it is never stuck.
    states = set(prime_leader.states)
    rules = list(prime_leader.rules)
    watch = [flag] + list(asks)
    for t in _sorted(finish_states):
        fin, alert, halt = ("fin", t), ("alert", t), ("halt", t)
        states.update((fin, alert, halt))
        for X in _sorted(tops):
            for a in watch:
                rules.append(PdsRule(fin, X, lr(a), alert, _neutral(X)))
            rules.append(PdsRule(alert, X, lw(flag), halt, _neutral(X)))
    for t, X, g in _leader_stuck_triples(source_leader, G, tops):
        if t not in finish_states:
            continue
        rules.append(PdsRule(_hold(t, g), X, lw(g), ("fin", t), _neutral(X)))
    return PushdownSystem(states, prime_leader.stack_alphabet, rules,
                          prime_leader.init_state, prime_leader.init_stack)


_FLAG_STATE = ("flag",)
_FLAGGED_STATE = ("flagged",)


def _extend_finite_contributor(prime: FiniteTS, source: FiniteTS, G, flag, guard_on):
    reads = {}
    loose = set()  # states with a write, internal or silent move
    writers = set()
    for s, a, _ in source.transitions:
        if a.kind == KIND_READ:
            reads.setdefault(s, set()).add(a.value)
        else:
            loose.add(s)
        if a.kind == KIND_WRITE:
            writers.add(s)
    states = set(prime.states) | {("fin", s) for s in source.states}
    states |= {_FLAG_STATE, _FLAGGED_STATE}
    transitions = list(prime.transitions)
    for s, a, s2 in source.transitions:
        if a.kind == KIND_WRITE:
            op = "w"
        elif a.kind == KIND_READ:
            op = "r"
        else:
            continue
        if guard_on == "source" and s in writers:
            continue
        pend = ("wait", op, a.value, s, s2)
        transitions.append((pend, cr(f"{OK}:{op}:{a.value}"), ("fin", s2)))
    for s in _sorted(source.states):
        escapes = set(reads.get(s, ()))
        if guard_on == "target" and s in loose:
            escapes = set(G)
        for g in _sorted(escapes):
            transitions.append((("fin", s), cr(g), _FLAG_STATE))
        for g in _sorted(G):
            transitions.append((_at(s), cr(g), _FLAG_STATE))
    for st in _sorted(prime.states):
        if st[0] == "wait":
            for g in _sorted(G):
                transitions.append((st, cr(g), _FLAG_STATE))
    transitions.append((_FLAG_STATE, cw(flag), _FLAGGED_STATE))
    return FiniteTS(states, transitions, prime.init_state)


def _extend_pushdown_contributor(prime: PushdownSystem, source: PushdownSystem,
                                 G, flag, guard_on):
    reads = {}
    loose = set()
    writers = set()
    for r in source.rules:
        if r.action.kind == KIND_READ:
            reads.setdefault((r.state, r.top), set()).add(r.action.value)
        else:
            loose.add((r.state, r.top))
        if r.action.kind == KIND_WRITE:
            writers.add((r.state, r.top))
    states = set(prime.states) | {("fin", s) for s in source.states}
    states |= {_FLAG_STATE, _FLAGGED_STATE}
    rules = list(prime.rules)
    for i, r in enumerate(source.rules):
        if r.action.kind == KIND_WRITE:
            op = "w"
        elif r.action.kind == KIND_READ:
            op = "r"
        else:
            continue
        if guard_on == "source" and (r.state, r.top) in writers:
            continue
        rules.append(PdsRule(("wait", i), r.top, cr(f"{OK}:{op}:{r.action.value}"),
                             ("fin", r.target), r.push))
    for s in _sorted(source.states):
        for X in _sorted(source.stack_alphabet):
            escapes = set(reads.get((s, X), ()))
            if guard_on == "target" and (s, X) in loose:
                escapes = set(G)
            for g in _sorted(escapes):
                rules.append(PdsRule(("fin", s), X, cr(g), _FLAG_STATE, _neutral(X)))
            for g in _sorted(G):
                rules.append(PdsRule(_at(s), X, cr(g), _FLAG_STATE, _neutral(X)))
    for st in _sorted(prime.states):
        if st[0] == "wait":
            for X in _sorted(source.stack_alphabet):
                for g in _sorted(G):
                    rules.append(PdsRule(st, X, cr(g), _FLAG_STATE, _neutral(X)))
    for X in _sorted(prime.stack_alphabet):
        rules.append(PdsRule(_FLAG_STATE, X, cw(flag), _FLAGGED_STATE, _neutral(X)))
    return PushdownSystem(states, prime.stack_alphabet, rules,
                          prime.init_state, prime.init_stack)


# ---------------------------------------------------------------------------
# Word correspondences.


def trans(word, drop_values=frozenset()):
    """Project a rewritten-system word back to source-alphabet letters.

    Contributor letters and leader reads disappear; leader writes decode to
    the letter their value announces or confirms.  Writes of values in
    ``drop_values`` (bare source values and the flag, when projecting the
    end-preserving system) disappear too.  Anything else is an error: the
    word is not over the rewritten vocabulary.
    """
    out = []
    for a in word:
        if a.role == CONTRIBUTOR or a.kind in (KIND_EPS, KIND_READ):
            continue
        if a.kind != KIND_WRITE:
            raise ValueError(f"not a rewritten-system letter: {a.pretty()}")
        if a.value in drop_values:
            continue
        decoded = decode_leader_write(a.value)
        if decoded is None:
            raise ValueError(f"cannot decode leader write of {a.value!r}")
        out.append(decoded)
    return tuple(out)


def lift_trace(word):
    """Per-letter expansion of a source word into the rewritten vocabulary.

    Leader operations become their announcement writes; contributor
    operations become the four-letter request/confirm/acknowledge exchange.
    The result is a word of the simplified system whenever the input is a
    word of the source system, and ``trans`` maps it back exactly.
    """
    out = []
    for a in word:
        if a.kind == KIND_EPS:
            raise ValueError("silent steps are not trace letters")
        if a.role == LEADER:
            op = {KIND_WRITE: "w", KIND_READ: "r", KIND_INTERNAL: "act"}[a.kind]
            out.append(lw(f"{DID}:{op}:{a.value}"))
            continue
        if a.kind == KIND_INTERNAL:
            out.append(a)
            continue
        op = "w" if a.kind == KIND_WRITE else "r"
        g = a.value
        out.extend((cw(f"{ASK}:{op}:{g}"), lr(f"{ASK}:{op}:{g}"),
                    lw(f"{OK}:{op}:{g}"), cr(f"{OK}:{op}:{g}")))
    return tuple(out)


def is_stutter_expansion(base, word) -> bool:
    """Does ``word`` arise from ``base`` by replicating contributor letters?

    Each contributor letter of ``base`` may occur one or more times in a
    row in ``word``; leader letters must match exactly.  Runs of equal
    adjacent contributor letters are compared by length, which is when some
    per-position multiplicity assignment works.
    """
    i = j = 0
    n, m = len(base), len(word)
    while i < n:
        a = base[i]
        if a.role == LEADER:
            if j >= m or word[j] != a:
                return False
            i += 1
            j += 1
            continue
        run_b = 1
        while i + run_b < n and base[i + run_b] == a:
            run_b += 1
        run_w = 0
        while j + run_w < m and word[j + run_w] == a:
            run_w += 1
        if run_w < run_b:
            return False
        i += run_b
        j += run_w
    return j == m


_DEAD = ("dead",)


class LiftedProperty:
    """A trace property transported to the rewritten leader vocabulary.

    Wraps a property automaton over source letters so it can run in
    lockstep with the rewritten leader: announcement and acknowledgment
    writes advance the wrapped automaton on the letter they decode to,
    reads and writes of dropped values are invisible, and a write of the
    flag moves to a dead state that accepts nothing.  Exposes the same
    state/successor protocol the wrapped automaton does.
    """

    def __init__(self, prop, flag=None, drop_values=frozenset()):
        self.prop = prop
        self.flag = flag
        self.drop_values = frozenset(drop_values)
        self.states = tuple(prop.states) + (_DEAD,)
        self.initial = prop.initial
        self.repeating = frozenset(prop.repeating)
        self.final = frozenset(prop.final)

    def successors(self, state, action):
        if state == _DEAD:
            return (_DEAD,)
        if action.role == CONTRIBUTOR or action.kind in (KIND_READ, KIND_EPS):
            return (state,)
        if action.kind == KIND_INTERNAL:
            return tuple(self.prop.successors(state, action))
        value = action.value
        if self.flag is not None and value == self.flag:
            return (_DEAD,)
        if value in self.drop_values:
            return (state,)
        decoded = decode_leader_write(value)
        if decoded is None:
            return (state,)
        return tuple(self.prop.successors(state, decoded))


def lift_property(prop, flag=None, drop_values=frozenset()) -> LiftedProperty:
    """Transport a property over source letters to the rewritten leader."""
    return LiftedProperty(prop, flag, drop_values)


# ---------------------------------------------------------------------------
# Several registers.
#
# Register interactions of a multi-register system carry the register index
# in the action value, separated by "|".  Flattening caches the whole value
# vector in the leader's control state and reuses the request/acknowledge
# protocol with index-tagged spellings, leaving a single-register system.


def wreg(i: int, g: str) -> Action:
    return lw(f"{i}|{g}")


def rreg(i: int, g: str) -> Action:
    return lr(f"{i}|{g}")


def cwreg(i: int, g: str) -> Action:
    return cw(f"{i}|{g}")


def crreg(i: int, g: str) -> Action:
    return cr(f"{i}|{g}")


def _reg_value(value: str):
    i, _, g = value.partition("|")
    return int(i), g


@dataclass(frozen=True)
class MultiRegisterSystem:
    """A leader and contributors sharing several bounded-value registers.

    All registers range over one value set; reads and writes name their
    register through the indexed action spelling ("2|high" touches register
    2).  ``contributor`` is a FiniteTS or PushdownSystem, ``leader`` a
    PushdownSystem, both over indexed actions.
    """

    registers: tuple
    contributor: object
    leader: PushdownSystem

    def __post_init__(self):
        if not self.registers:
            raise ValueError("need at least one register")
        vals = self.registers[0].values
        for d in self.registers[1:]:
            if d.values != vals:
                raise ValueError("registers must share one value set")
        for g in vals:
            if "|" in g:
                raise ValueError(f"register value may not contain '|': {g!r}")

    @property
    def m(self) -> int:
        return len(self.registers)

    @property
    def values(self):
        return self.registers[0].values

    @property
    def contributor_is_pushdown(self) -> bool:
        return isinstance(self.contributor, PushdownSystem)

    def init_vector(self):
        return tuple(d.init_value for d in self.registers)

    def initial_config(self, n: int):
        if self.contributor_is_pushdown:
            local = (self.contributor.init_state, (self.contributor.init_stack,))
        else:
            local = self.contributor.init_state
        return (canon_multiset([local] * n),
                (self.leader.init_state, (self.leader.init_stack,)),
                self.init_vector())


def _vector_effect(action: Action, vec, m, values):
    """New register vector after the action, or None when disabled."""
    if action.kind in (KIND_EPS, KIND_INTERNAL):
        return vec
    i, g = _reg_value(action.value)
    if not 0 <= i < m or g not in values:
        raise ValueError(f"bad indexed action value {action.value!r}")
    if action.kind == KIND_WRITE:
        return vec[:i] + (g,) + vec[i + 1:]
    return vec if vec[i] == g else None


def mr_step(msys: MultiRegisterSystem, config):
    """Successor (action, configuration) pairs, deterministically ordered."""
    contribs, (lstate, lstack), vec = config
    succs = []
    m, values = msys.m, msys.values
    for local in set(contribs):
        rest = list(contribs)
        rest.remove(local)
        if msys.contributor_is_pushdown:
            moves = [(a, (s2, st2)) for a, s2, st2
                     in msys.contributor.moves(*local)]
        else:
            moves = msys.contributor.moves(local)
        for action, new_local in moves:
            vec2 = _vector_effect(action, vec, m, values)
            if vec2 is None:
                continue
            succs.append((action, (canon_multiset(rest + [new_local]),
                                   (lstate, lstack), vec2)))
    for action, t2, stack2 in msys.leader.moves(lstate, lstack):
        vec2 = _vector_effect(action, vec, m, values)
        if vec2 is None:
            continue
        succs.append((action, (contribs, (t2, stack2), vec2)))
    succs.sort(key=repr)
    return succs


def flatten_registers(msys: MultiRegisterSystem) -> CDSystem:
    """Cache the register vector in the leader and keep one register.

    The single remaining register carries index-tagged request,
    acknowledgment and announcement values.  Reachable end configurations
    of the two systems correspond, with the vector readable off the
    leader's control state.
    """
    labels = _sorted({r.action.value for r in msys.leader.rules
                      if r.action.kind == KIND_INTERNAL})
    alphas = [SimplifiedAlphabet(msys.values, (), index=i) for i in range(msys.m)]
    plain = SimplifiedAlphabet(msys.values, labels)
    values = [BOOT_VALUE]
    for alpha in alphas:
        values.extend(v for v in alpha.values() if v != BOOT_VALUE)
    values.extend(plain.did("act", a) for a in labels)
    regs = RegisterDomain(tuple(values), 0)
    leader = _flatten_leader(msys, alphas, plain)
    if msys.contributor_is_pushdown:
        contrib = _flatten_pushdown_contributor(msys.contributor, alphas)
    else:
        contrib = _flatten_finite_contributor(msys.contributor, alphas)
    return CDSystem(regs, contrib, leader)


def _vectors(values, m):
    vecs = [()]
    for _ in range(m):
        vecs = [v + (g,) for v in vecs for g in values]
    return vecs


def _flatten_leader(msys: MultiRegisterSystem, alphas, plain):
    leader = msys.leader
    G = _sorted(msys.values)
    m = msys.m
    vecs = _vectors(G, m)

    def marked(vec, i, op, h):
        return vec[:i] + (alphas[i].ok(op, h),) + vec[i + 1:]

    states = set()
    for t in leader.states:
        for vec in vecs:
            states.add(_hold(t, vec))
            for i in range(m):
                for op in ("w", "r"):
                    for h in G:
                        states.add(_hold(t, marked(vec, i, op, h)))
    rules = []
    for r in leader.rules:
        if r.action.kind == KIND_WRITE:
            i, h = _reg_value(r.action.value)
            for vec in vecs:
                rules.append(PdsRule(_hold(r.state, vec), r.top,
                                     lw(alphas[i].did("w", h)),
                                     _hold(r.target, vec[:i] + (h,) + vec[i + 1:]),
                                     r.push))
        elif r.action.kind == KIND_READ:
            i, g = _reg_value(r.action.value)
            for vec in vecs:
                if vec[i] != g:
                    continue
                rules.append(PdsRule(_hold(r.state, vec), r.top,
                                     lw(alphas[i].did("r", g)),
                                     _hold(r.target, vec), r.push))
        elif r.action.kind == KIND_INTERNAL:
            for vec in vecs:
                rules.append(PdsRule(_hold(r.state, vec), r.top,
                                     lw(plain.did("act", r.action.value)),
                                     _hold(r.target, vec), r.push))
        else:
            for vec in vecs:
                rules.append(PdsRule(_hold(r.state, vec), r.top, EPS_L,
                                     _hold(r.target, vec), r.push))
    for t in _sorted(leader.states):
        for X in _sorted(leader.stack_alphabet):
            for vec in vecs:
                for i in range(m):
                    for h in G:
                        rules.append(PdsRule(_hold(t, vec), X,
                                             lr(alphas[i].ask("w", h)),
                                             _hold(t, marked(vec, i, "w", h)),
                                             _neutral(X)))
                    g = vec[i]
                    rules.append(PdsRule(_hold(t, vec), X,
                                         lr(alphas[i].ask("r", g)),
                                         _hold(t, marked(vec, i, "r", g)),
                                         _neutral(X)))
                for i in range(m):
                    for op in ("w", "r"):
                        for h in G:
                            rules.append(PdsRule(_hold(t, marked(vec, i, op, h)), X,
                                                 lw(alphas[i].ok(op, h)),
                                                 _hold(t, vec[:i] + (h,) + vec[i + 1:]),
                                                 _neutral(X)))
    rules = list(dict.fromkeys(rules))
    return PushdownSystem(states, leader.stack_alphabet, rules,
                          _hold(leader.init_state, msys.init_vector()),
                          leader.init_stack)


def _flatten_finite_contributor(contrib: FiniteTS, alphas):
    states = {_at(s) for s in contrib.states}
    transitions = []
    for s, a, s2 in contrib.transitions:
        if a.kind == KIND_WRITE:
            op = "w"
        elif a.kind == KIND_READ:
            op = "r"
        else:
            transitions.append((_at(s), a, _at(s2)))
            continue
        i, g = _reg_value(a.value)
        pend = ("wait", op, i, g, s, s2)
        states.add(pend)
        transitions.append((_at(s), cw(alphas[i].ask(op, g)), pend))
        transitions.append((pend, cr(alphas[i].ok(op, g)), _at(s2)))
    return FiniteTS(states, transitions, _at(contrib.init_state))


def _flatten_pushdown_contributor(contrib: PushdownSystem, alphas):
    states = {_at(s) for s in contrib.states}
    rules = []
    for j, r in enumerate(contrib.rules):
        if r.action.kind == KIND_WRITE:
            op = "w"
        elif r.action.kind == KIND_READ:
            op = "r"
        else:
            rules.append(PdsRule(_at(r.state), r.top, r.action, _at(r.target), r.push))
            continue
        i, g = _reg_value(r.action.value)
        pend = ("wait", j)
        states.add(pend)
        rules.append(PdsRule(_at(r.state), r.top, cw(alphas[i].ask(op, g)),
                             pend, _neutral(r.top)))
        rules.append(PdsRule(pend, r.top, cr(alphas[i].ok(op, g)),
                             _at(r.target), r.push))
    return PushdownSystem(states, contrib.stack_alphabet, rules,
                          _at(contrib.init_state), contrib.init_stack)


# ---------------------------------------------------------------------------
# Bounded structural checks.


def check_theorem4_items(transformed: CDSystem, original: CDSystem = None,
                         n: int = 2, stack_bound: int = 6,
                         config_cap: int = 20000) -> dict:
    """Bounded sanity report on a rewritten system's run structure.

    Explores configurations up to the caps and checks two consequences of
    the rewrite: every cycle of the explored configuration graph contains a
    leader write (so infinite runs have infinitely many leader writes), and
    when a source system is supplied, the existence of cycles agrees
    between the two explorations.
    """
    graph, complete = _config_graph(transformed, n, stack_bound, config_cap)
    cycles = [c for c in _sccs(_drop_labels(graph)) if _cyclic(c, graph)]
    quiet = {c: [d for a, d in outs if d in graph and not
                 (a.role == LEADER and a.kind == KIND_WRITE)]
             for c, outs in graph.items()}
    bad = [c for c in _sccs(quiet)
           if len(c) > 1 or any(n2 in quiet[n1] for n1 in c for n2 in c)]
    report = {
        "configs": len(graph),
        "exploration_complete": complete,
        "cycles": len(cycles),
        "all_loops_have_leader_write": not bad,
        "infinite_runs": bool(cycles),
    }
    if original is not None:
        g2, c2 = _config_graph(original, n, stack_bound, config_cap)
        src = any(_cyclic(c, g2) for c in _sccs(_drop_labels(g2)))
        report["source_infinite_runs"] = src
        report["source_exploration_complete"] = c2
        report["infinite_runs_agree"] = src == bool(cycles)
    return report


def _config_graph(sys: CDSystem, n, stack_bound, config_cap):
    start = sys.initial_config(n)
    graph = {}
    frontier = [start]
    seen = {start}
    complete = True
    while frontier:
        cfg = frontier.pop()
        outs = []
        for action, nxt in step(sys, cfg):
            if _too_deep(nxt, stack_bound):
                complete = False
                continue
            if nxt not in seen:
                if len(seen) >= config_cap:
                    complete = False
                    continue
                seen.add(nxt)
                frontier.append(nxt)
            outs.append((action, nxt))
        graph[cfg] = outs
    for cfg in graph:
        graph[cfg] = [(a, d) for a, d in graph[cfg] if d in graph]
    return graph, complete


def _drop_labels(graph):
    return {c: [d for _, d in outs] for c, outs in graph.items()}


def _cyclic(component, graph):
    if len(component) > 1:
        return True
    (node,) = component
    return any(d == node for _, d in graph[node])


def _too_deep(config, stack_bound):
    contribs, (_, lstack), _ = config
    if len(lstack) > stack_bound:
        return True
    for local in contribs:
        if isinstance(local, tuple) and len(local) == 2 \
                and isinstance(local[1], tuple) and len(local[1]) > stack_bound:
            return True
    return False
