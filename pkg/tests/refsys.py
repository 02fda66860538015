"""Small hand-built reference systems shared across the test suite.

All three are two-value register systems exercising one specific behavior:

* write_then_check: a contributor must publish value 1 before the leader may
  pass its read guard and fire the distinguished action once.
* ping_loop: the leader can fire the distinguished action forever, re-armed
  by a contributor that can rewrite 1 at will.
* stall_pair: the leader can be starved into a deadlock (the contributor's
  single write enables a read into a sink), so a maximal run avoiding the
  distinguished action exists.
"""

from paramck.core import (
    CDSystem,
    FiniteTS,
    PdsRule,
    PushdownSystem,
    RegisterDomain,
    TOP,
    cw,
    lr,
)


def _leader(states, rules, init="t0"):
    return PushdownSystem(states, ["Z"], rules, init, "Z")


def write_then_check() -> CDSystem:
    contrib = FiniteTS(["s0", "s1"], [("s0", cw("1"), "s1")], "s0")
    leader = _leader(
        ["t0", "t1", "t2"],
        [
            PdsRule("t0", "Z", lr("1"), "t1", ("Z",)),
            PdsRule("t1", "Z", TOP, "t2", ("Z",)),
        ],
    )
    return CDSystem(RegisterDomain(["0", "1"]), contrib, leader)


def ping_loop() -> CDSystem:
    contrib = FiniteTS(["s0"], [("s0", cw("1"), "s0")], "s0")
    leader = _leader(
        ["t0", "t1"],
        [
            PdsRule("t0", "Z", lr("1"), "t1", ("Z",)),
            PdsRule("t1", "Z", TOP, "t0", ("Z",)),
        ],
    )
    return CDSystem(RegisterDomain(["0", "1"]), contrib, leader)


def stall_pair() -> CDSystem:
    contrib = FiniteTS(["s0", "s1"], [("s0", cw("1"), "s1")], "s0")
    leader = _leader(
        ["t0", "t1", "t2"],
        [
            PdsRule("t0", "Z", TOP, "t1", ("Z",)),
            PdsRule("t0", "Z", lr("1"), "t2", ("Z",)),
        ],
    )
    return CDSystem(RegisterDomain(["0", "1"]), contrib, leader)
