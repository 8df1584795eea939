"""Uncertainty stack with an event log, and the structural audits run on that log."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NotEnumerableError
from .policy import ENUM_LIMIT, PairIndex, PolicySpace, UncertaintyItem, is_dependent


@dataclass
class StackEvent:
    seq: int
    round: int
    kind: str  # "push" or "pop"
    item: UncertaintyItem
    uid: int
    depth: int  # stack depth right after the event
    eliminated: object = None  # action added to the constraint set on a pop
    realizable: tuple = ()  # oracle action set at the item's pair, recorded on a push


class UncertaintyStack:
    """FILO stack of :class:`UncertaintyItem` that logs every push and pop."""

    def __init__(self):
        self._items: list[tuple[int, UncertaintyItem]] = []
        self.events: list[StackEvent] = []
        self.round = 0
        self._next_uid = 0

    def __len__(self):
        return len(self._items)

    def __bool__(self):
        return bool(self._items)

    @property
    def top(self) -> UncertaintyItem:
        return self._items[-1][1]

    @property
    def items(self) -> list[UncertaintyItem]:
        return [it for _, it in self._items]

    def push(self, item: UncertaintyItem, realizable: tuple = ()) -> int:
        uid = self._next_uid
        self._next_uid += 1
        self._items.append((uid, item))
        self.events.append(StackEvent(len(self.events), self.round, "push", item, uid,
                                      len(self._items), realizable=tuple(realizable)))
        return uid

    def pop(self, eliminated=None) -> UncertaintyItem:
        uid, item = self._items.pop()
        self.events.append(StackEvent(len(self.events), self.round, "pop", item, uid,
                                      len(self._items), eliminated=eliminated))
        return item

    def pushes(self) -> int:
        return sum(e.kind == "push" for e in self.events)


@dataclass
class Violation:
    check: str
    round: int
    message: str

    def __str__(self):
        return f"[{self.check}] round {self.round}: {self.message}"


@dataclass
class AuditResult:
    violations: list = field(default_factory=list)
    checked: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, check, rnd, message):
        self.violations.append(Violation(check, rnd, message))

    def merge(self, other: "AuditResult"):
        self.violations += other.violations
        self.checked += [c for c in other.checked if c not in self.checked]
        self.skipped += [c for c in other.skipped if c not in self.skipped]

    def as_dict(self):
        return {"ok": self.ok, "checked": self.checked, "skipped": self.skipped,
                "violations": [vars(v) for v in self.violations]}


def y_sequence(events: list[StackEvent]) -> list[tuple]:
    """The chain ``(y_i, l_i, r_i)``: ``y_1`` is the first popped item; ``y_i`` is the first
    item popped whose push comes after the pop of ``y_{i-1}`` (event order, so a push
    later in the same round as that pop counts).
    """
    push_of = {e.uid: e for e in events if e.kind == "push"}
    chain = []
    last_pop_seq = -1
    for e in events:
        if e.kind != "pop":
            continue
        pushed = push_of.get(e.uid)
        if pushed is None:
            raise ValueError(f"pop of item {e.uid} without a recorded push")
        if pushed.seq > last_pop_seq:
            chain.append((e.item, pushed.round, e.round))
            last_pop_seq = e.seq
    return chain


def op_count_by_round(events: list[StackEvent]):
    """``sigma(n)``: number of rounds ``<= n`` with at least one stack operation."""
    rounds = sorted({e.round for e in events})

    def sigma(n):
        lo, hi = 0, len(rounds)
        while lo < hi:
            mid = (lo + hi) // 2
            if rounds[mid] <= n:
                lo = mid + 1
            else:
                hi = mid
        return lo

    return sigma


def audit_stack(events: list[StackEvent], space: PolicySpace | None, depth_limit: int,
                limit: int = ENUM_LIMIT) -> AuditResult:
    """Depth, epoch order, pushed-item independence, sigma bookkeeping, one push per round."""
    result = AuditResult()
    result.checked += ["depth", "epoch-order", "sigma", "one-push-per-round"]

    # depth and strictly increasing epochs, by replaying the log
    live: list[UncertaintyItem] = []
    for e in events:
        if e.kind == "push":
            if live and e.item.epoch <= live[-1].epoch:
                result.fail("epoch-order", e.round,
                            f"pushed epoch {e.item.epoch} on top of epoch {live[-1].epoch}")
            live.append(e.item)
        else:
            if not live:
                result.fail("depth", e.round, "pop from an empty stack")
                continue
            live.pop()
        if len(live) > depth_limit:
            result.fail("depth", e.round, f"stack depth {len(live)} exceeds {depth_limit}")

    pushes_per_round: dict = {}
    for e in events:
        if e.kind == "push":
            pushes_per_round[e.round] = pushes_per_round.get(e.round, 0) + 1
    for rnd, n in sorted(pushes_per_round.items()):
        if n > 1:
            result.fail("one-push-per-round", rnd, f"{n} pushes in one round")

    sigma = op_count_by_round(events)
    prev_r = None
    for i, (item, l_i, r_i) in enumerate(y_sequence(events)):
        if sigma(r_i) != sigma(l_i) + 1:
            result.fail("sigma", r_i, f"sigma(r_{i + 1})={sigma(r_i)} but sigma(l_{i + 1})+1="
                                      f"{sigma(l_i) + 1}")
        base = sigma(prev_r) if prev_r is not None else 0
        if sigma(l_i) > base + 2 * depth_limit:
            result.fail("sigma", l_i, f"sigma(l_{i + 1})={sigma(l_i)} exceeds {base} + 2*{depth_limit}")
        prev_r = r_i

    if space is None:
        result.skipped.append("independence")
        return result
    try:
        index = None
        if not _has_fast_dependency(space):
            index = PairIndex(space, limit)
    except NotEnumerableError:
        result.skipped.append("independence")
        return result
    result.checked.append("independence")
    popped: list[UncertaintyItem] = []
    for e in events:
        if e.kind == "pop":
            popped.append(e.item)
        elif is_dependent(space, e.item, popped, limit, index=index):
            result.fail("independence", e.round,
                        f"pushed {tuple(e.item)} depends on the {len(popped)} items popped so far")
    return result


def _has_fast_dependency(space) -> bool:
    from .policy import Gf2Linear

    return isinstance(space, Gf2Linear)
