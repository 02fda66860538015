"""Finite-state restriction of a pushdown contributor.

A contributor's behavior up to a bounded "still useful" stack depth can be
replayed by a finite-state process whose states are (control state, stack
word) pairs with the word capped at N symbols.  A step may drop any suffix of
its successor stack (keeping at least one symbol unless the stack genuinely
empties): dropped symbols are ones the process commits to never popping back
to.  Keeping a non-empty prefix mandatory avoids fake dead states that a real
run could not reproduce, which matters downstream when deadlocks are
interpreted.

The default depth bound is quadratic in the control size and linear in the
stack alphabet; it is the bound under which reachability and repeated
reachability agree with the unbounded contributor.
"""

from __future__ import annotations

from collections import deque

from .core import FiniteTS, LimitExceeded, PushdownSystem


def default_bound(contributor: PushdownSystem) -> int:
    q = len(contributor.states)
    gamma = len(contributor.stack_alphabet)
    return 2 * q * q * gamma + 2


def restrict(contributor: PushdownSystem, N: int, state_cap: int = 200_000) -> FiniteTS:
    """Reachable part of the depth-N restriction, as a finite system.

    States are (control state, stack word) with 1 <= len(word) <= N, except
    for genuinely emptied stacks.  Construction is breadth-first from the
    initial state, so only reachable states materialize; state_cap guards
    against contributors whose bounded stack language is still huge.
    """
    if N < 1:
        raise ValueError("restriction depth must be at least 1")
    init = (contributor.init_state, (contributor.init_stack,))
    states = {init}
    transitions = []
    frontier = deque([init])
    while frontier:
        p, alpha = frontier.popleft()
        if not alpha:
            continue
        for rule in contributor.by_top.get((p, alpha[0]), ()):
            result = rule.push + alpha[1:]
            if result:
                targets = [result[:k] for k in range(1, min(len(result), N) + 1)]
            else:
                targets = [()]
            for kept in targets:
                target = (rule.target, kept)
                transitions.append(((p, alpha), rule.action, target))
                if target not in states:
                    if len(states) >= state_cap:
                        raise LimitExceeded(
                            f"restriction exceeds {state_cap} states at depth {N}"
                        )
                    states.add(target)
                    frontier.append(target)
    return FiniteTS(states, transitions, init)


def restrict_tracked(contributor: PushdownSystem, N: int, state_cap: int = 200_000) -> FiniteTS:
    """Depth-N restriction whose states also remember whether truncation happened.

    States are (control state, stack word, clipped).  The clipped flag is set
    the first time a step drops part of its successor stack and sticks from
    then on.  An unclipped state with an empty word is therefore a genuine
    dead end: some real run empties its stack exactly there.  A clipped state
    with an empty word only means the retained part was exhausted while an
    unknown frozen tail remains, so nothing about enabled moves below it can
    be certified; those states are collected in the .uncertain_states
    attribute and callers that reason about blocked configurations must not
    treat them as blocked.
    """
    if N < 1:
        raise ValueError("restriction depth must be at least 1")
    init = (contributor.init_state, (contributor.init_stack,), False)
    states = {init}
    transitions = []
    frontier = deque([init])
    while frontier:
        p, alpha, clipped = frontier.popleft()
        if not alpha:
            continue
        for rule in contributor.by_top.get((p, alpha[0]), ()):
            result = rule.push + alpha[1:]
            if result:
                targets = [
                    (result[:k], clipped or k < len(result))
                    for k in range(1, min(len(result), N) + 1)
                ]
            else:
                targets = [((), clipped)]
            for kept, kept_clipped in targets:
                target = (rule.target, kept, kept_clipped)
                transitions.append(((p, alpha, clipped), rule.action, target))
                if target not in states:
                    if len(states) >= state_cap:
                        raise LimitExceeded(
                            f"restriction exceeds {state_cap} states at depth {N}"
                        )
                    states.add(target)
                    frontier.append(target)
    fts = FiniteTS(states, transitions, init)
    fts.uncertain_states = frozenset(s for s in states if not s[1] and s[2])
    return fts


def effective_heights(stacks: list) -> list[int]:
    """Per-configuration effective stack-height of an explicitly given run.

    The ineffective part of stack i is its longest suffix that is a proper
    suffix of every later stack and of stack i itself; what remains on top is
    the part the run still uses (reading the top symbol counts as use, hence
    "proper").
    """
    heights = []
    for i, alpha in enumerate(stacks):
        rest = stacks[i:]
        limit = min(len(s) for s in rest) - 1
        best = 0
        for length in range(min(len(alpha), limit), 0, -1):
            suffix = alpha[len(alpha) - length:]
            if all(s[len(s) - length:] == suffix for s in rest):
                best = length
                break
        heights.append(len(alpha) - best)
    return heights
