"""Subword utilities and the downward closure of pushdown languages.

The downward (subword) closure of a context-free language is regular; it is
computed here by converting the pushdown acceptor to a grammar and analyzing
the grammar's strongly connected components:

* a component none of whose productions mention the component itself
  contributes the union of its right-hand sides;
* a self-referential component whose productions stay linear in the
  component pumps left and right context segments, giving star-closed
  context languages around the escape productions;
* a component with a production containing two occurrences of the component
  can duplicate derivations without bound, so its closure collapses to the
  star over every letter it can ever derive.

All three cases produce plain NFA fragments that are glued by silent edges.
Since a subword closure may always drop letters, every letter edge in the
result carries a silent bypass, making the output subword-closed by shape.
"""

from __future__ import annotations

from itertools import count

from .core import PushdownSystem


def is_subword(u, v) -> bool:
    """True iff u can be obtained by erasing letters of v."""
    it = iter(v)
    return all(any(x == y for y in it) for x in u)


class Nfa:
    def __init__(self, states, transitions, initial, accepting):
        self.states = frozenset(states)
        self.transitions = tuple(transitions)  # (state, letter or None, state)
        self.initial = initial
        self.accepting = frozenset(accepting)
        self._by_state: dict = {}
        self._eps: dict = {}
        for s, a, t in self.transitions:
            if a is None:
                self._eps.setdefault(s, []).append(t)
            else:
                self._by_state.setdefault((s, a), []).append(t)

    def eps_closure(self, states) -> frozenset:
        seen = set(states)
        todo = list(states)
        while todo:
            s = todo.pop()
            for t in self._eps.get(s, ()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)

    def step(self, states, letter) -> frozenset:
        moved = {t for s in states for t in self._by_state.get((s, letter), ())}
        return self.eps_closure(moved)

    def accepts(self, word) -> bool:
        current = self.eps_closure({self.initial})
        for letter in word:
            current = self.step(current, letter)
            if not current:
                return False
        return bool(current & self.accepting)

    def alphabet(self):
        return sorted({a for _, a, _ in self.transitions if a is not None}, key=repr)

    def is_empty(self) -> bool:
        seen = set(self.eps_closure({self.initial}))
        todo = list(seen)
        while todo:
            s = todo.pop()
            for (src, _), targets in self._by_state.items():
                if src != s:
                    continue
                for t in targets:
                    for u in self.eps_closure({t}):
                        if u not in seen:
                            seen.add(u)
                            todo.append(u)
        return not (seen & self.accepting)

    def language_upto(self, n: int):
        """All accepted words of length <= n (for bounded comparisons)."""
        out = set()
        start = self.eps_closure({self.initial})
        frontier = [((), start)]
        seen = {((), start)}  # (word, stateset) pairs are never revisited
        letters = self.alphabet()
        while frontier:
            word, states = frontier.pop()
            if states & self.accepting:
                out.add(word)
            if len(word) == n:
                continue
            for a in letters:
                nxt = self.step(states, a)
                if nxt:
                    item = (word + (a,), nxt)
                    if (item[0], item[1]) not in seen:
                        seen.add(item)
                        frontier.append(item)
        return out


def _is_silent(letter) -> bool:
    return letter is None or getattr(letter, "is_eps", False)


def _generating_triples(rules):
    """Triples (p, X, q) such that control p with single stack symbol X can
    reach control q with the symbol popped.  Worklist fixpoint over the rule
    shapes, so only derivable triples ever materialize."""
    gen = set()
    by_head: dict = {}  # (p, X) -> set of end controls
    swap_watch: dict = {}  # (q, Y) -> [(p, X)]
    push_first: dict = {}  # (q, Y) -> [(p, X, Z)]
    push_second: dict = {}  # Z -> [(p, X, q, Y)]
    todo = []

    def add(triple):
        if triple not in gen:
            gen.add(triple)
            by_head.setdefault((triple[0], triple[1]), set()).add(triple[2])
            todo.append(triple)

    for p, x, _, q, push in rules:
        if len(push) == 0:
            add((p, x, q))
        elif len(push) == 1:
            swap_watch.setdefault((q, push[0]), []).append((p, x))
        else:
            push_first.setdefault((q, push[0]), []).append((p, x, push[1]))
            push_second.setdefault(push[1], []).append((p, x, q, push[0]))

    while todo:
        c, y, e = todo.pop()
        for p, x in swap_watch.get((c, y), ()):
            add((p, x, e))
        for p, x, z in push_first.get((c, y), ()):
            for r in by_head.get((e, z), ()):
                add((p, x, r))
        for p, x, q, y2 in push_second.get(y, ()):
            if c in by_head.get((q, y2), ()):
                add((p, x, e))
    return gen, by_head


def _pda_to_grammar(pda: PushdownSystem, accepting):
    """Empty-stack triple grammar, with a drain state gluing acceptance.

    Nonterminals are (p, X, q): "from control p with X on top, reach q with
    X popped".  Acceptance by control state is reduced to acceptance by
    empty stack through a fresh drain control that silently pops everything.
    Productions are emitted only for triples that are derivable and reachable
    from the start triple, keeping the grammar near the size of the useful
    part of the pushdown rather than cubic in its control states.
    """
    drain = ("__drain__",)
    boot = ("__boot__",)
    bottom = ("__bot__",)
    symbols = set(pda.stack_alphabet) | {bottom}
    rules = [(r.state, r.top, r.action, r.target, r.push) for r in pda.rules]
    # pad the stack with a fresh bottom symbol so acceptance with an empty
    # stack still has something for the drain to pop
    rules.append((boot, bottom, None, pda.init_state, (pda.init_stack, bottom)))
    for f in accepting:
        for x in symbols:
            rules.append((f, x, None, drain, ()))
    for x in symbols:
        rules.append((drain, x, None, drain, ()))

    start = (boot, bottom, drain)
    gen, by_head = _generating_triples(rules)
    if start not in gen:
        return start, {}
    ends = {key: sorted(vals, key=repr) for key, vals in by_head.items()}

    rules_by_head: dict = {}
    for p, x, a, q, push in rules:
        rules_by_head.setdefault((p, x), []).append((a, q, push))

    prods: dict = {}  # nonterminal -> list of RHS (tuples of letters/nonterminals)
    todo = [start]
    while todo:
        nt = todo.pop()
        if nt in prods:
            continue
        p, x, r = nt
        out = []
        for a, q, push in rules_by_head.get((p, x), ()):
            letter = () if _is_silent(a) else (("t", a),)
            if len(push) == 0:
                if q == r:
                    out.append(letter)
            elif len(push) == 1:
                if r in by_head.get((q, push[0]), ()):
                    out.append(letter + ((q, push[0], r),))
            else:
                for s in ends.get((q, push[0]), ()):
                    if r in by_head.get((s, push[1]), ()):
                        out.append(letter + ((q, push[0], s), (s, push[1], r)))
        prods[nt] = out
        for rhs in out:
            for sym in rhs:
                if not _is_terminal(sym) and sym not in prods:
                    todo.append(sym)
    return start, prods


def _is_terminal(symbol) -> bool:
    return isinstance(symbol, tuple) and len(symbol) == 2 and symbol[0] == "t"


def _sccs(graph: dict):
    """Tarjan, iterative; returns list of components (sets), bottom-up order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    result = []
    counter = count()
    for root in graph:
        if root in index:
            continue
        work = [(root, iter(graph[root]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = next(counter)
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(graph[succ])))
                    advanced = True
                    break
                elif succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.add(member)
                    if member == node:
                        break
                result.append(comp)
    return result


class _Builder:
    """Accumulates NFA fragments; every letter edge has a silent bypass."""

    def __init__(self):
        self.counter = count()
        self.transitions = []

    def fresh(self):
        return next(self.counter)

    def edge(self, a, b, letter=None):
        if letter is None:
            self.transitions.append((a, None, b))
        else:
            self.transitions.append((a, letter, b))
            self.transitions.append((a, None, b))

    def letters_star(self, letters):
        s = self.fresh()
        for x in letters:
            self.edge(s, s, x)
        return s, s


def _derivable_letters(nts, prods):
    seen = set(nts)
    todo = list(nts)
    letters = set()
    while todo:
        nt = todo.pop()
        for rhs in prods.get(nt, ()):
            for sym in rhs:
                if _is_terminal(sym):
                    letters.add(sym[1])
                elif sym not in seen:
                    seen.add(sym)
                    todo.append(sym)
    return letters


def downward_closure(pda: PushdownSystem, accepting) -> Nfa:
    """NFA for the set of subwords of the pushdown's accepted words.

    The pushdown accepts by reaching a control state in `accepting` (with any
    stack content); silent rule labels contribute no letters.
    """
    start, prods = _pda_to_grammar(pda, accepting)
    bld = _Builder()
    if start not in prods:
        i, f = bld.fresh(), bld.fresh()
        return Nfa(range(2), bld.transitions, i, [f])

    graph = {
        nt: [s for rhs in rhss for s in rhs if not _is_terminal(s)]
        for nt, rhss in prods.items()
    }
    frags: dict = {}  # nonterminal -> (in-state, out-state)

    def seq_fragment(symbols):
        """Concatenation fragment for a mixed terminal/nonterminal word."""
        first = bld.fresh()
        cur = first
        for sym in symbols:
            nxt = bld.fresh()
            if _is_terminal(sym):
                bld.edge(cur, nxt, sym[1])
            else:
                i, f = frags[sym]
                bld.edge(cur, i)
                bld.edge(f, nxt)
            cur = nxt
        return first, cur

    for comp in _sccs(graph):
        internal = [
            (nt, rhs)
            for nt in comp
            for rhs in prods.get(nt, ())
            if any(not _is_terminal(s) and s in comp for s in rhs)
        ]
        expansive = any(
            sum(1 for s in rhs if not _is_terminal(s) and s in comp) >= 2
            for _, rhs in internal
        )
        if expansive:
            letters = _derivable_letters(comp, prods)
            i, f = bld.letters_star(letters)
            for nt in comp:
                frags[nt] = (i, f)
            continue
        if not internal:
            for nt in comp:
                i, f = bld.fresh(), bld.fresh()
                for rhs in prods.get(nt, ()):
                    a, b = seq_fragment(rhs)
                    bld.edge(i, a)
                    bld.edge(b, f)
                frags[nt] = (i, f)
            continue
        # linear self-referential component: pump left and right contexts of
        # the in-component productions around the escaping ones
        left = bld.fresh()
        right = bld.fresh()
        for _, rhs in internal:
            pos = next(
                k for k, s in enumerate(rhs) if not _is_terminal(s) and s in comp
            )
            a, b = seq_fragment(rhs[:pos])
            bld.edge(left, a)
            bld.edge(b, left)
            a, b = seq_fragment(rhs[pos + 1:])
            bld.edge(right, a)
            bld.edge(b, right)
        mid_in, mid_out = bld.fresh(), bld.fresh()
        for nt in comp:
            for rhs in prods.get(nt, ()):
                if any(not _is_terminal(s) and s in comp for s in rhs):
                    continue
                a, b = seq_fragment(rhs)
                bld.edge(mid_in, a)
                bld.edge(b, mid_out)
        i, f = bld.fresh(), bld.fresh()
        bld.edge(i, left)
        bld.edge(left, mid_in)
        bld.edge(mid_out, right)
        bld.edge(right, f)
        for nt in comp:
            frags[nt] = (i, f)

    i, f = frags[start]
    states = {i, f}
    for a, _, b in bld.transitions:
        states.add(a)
        states.add(b)
    return Nfa(states, bld.transitions, i, [f])
