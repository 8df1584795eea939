"""Policy classes, constraint sets and the elimination oracle.

A policy class maps a parameter ``theta`` and a pair ``(state, epoch)`` to one
action. A :class:`ConstraintSet` is an append-only list of forbidden
``(state, action, epoch)`` triples; the surviving class is every ``theta`` that
avoids all of them. Each class supplies an incremental *solver* that answers
"which actions can a surviving policy take at ``(s, h)``?" without enumerating
parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import gf2
from .errors import EmptyClassError, MissingFeatureError, NotEnumerableError
from .exact import as_fraction, find_feasible_point, solve_linear_system

ENUM_LIMIT = 1 << 12


@dataclass(frozen=True)
class UncertaintyItem:
    state: Hashable
    a1: int
    a2: int
    epoch: int

    def __post_init__(self):
        if self.a1 == self.a2:
            raise ValueError(f"uncertainty item needs two distinct actions, got {self.a1} twice")

    def __iter__(self):
        return iter((self.state, self.a1, self.a2, self.epoch))


class ConstraintSet:
    """Append-only list ``Z`` of ``(state, action, epoch)`` triples, indexed by ``(state, epoch)``."""

    def __init__(self, items: Iterable = ()):
        self._items: list[tuple] = []
        self._by_pair: dict = {}
        for s, a, h in items:
            self.add(s, a, h)

    def add(self, state, action, epoch) -> None:
        self._items.append((state, action, epoch))
        self._by_pair.setdefault((state, epoch), set()).add(action)

    def forbidden(self, state, epoch) -> frozenset:
        return frozenset(self._by_pair.get((state, epoch), ()))

    def copy(self) -> "ConstraintSet":
        return ConstraintSet(self._items)

    def __len__(self):
        return len(self._items)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __contains__(self, triple):
        s, a, h = triple
        return a in self._by_pair.get((s, h), ())

    def __repr__(self):
        return f"ConstraintSet({self._items!r})"


# ---------------------------------------------------------------------------
# policy classes

class PolicySpace:
    """Common interface. Subclasses set ``actions`` and implement the hooks below."""

    actions: tuple = (0, 1)

    def action(self, theta, state, epoch):
        raise NotImplementedError

    def solver(self) -> "Solver":
        """Fresh incremental oracle state for an empty constraint set."""
        return BruteForceSolver(self)

    def members(self, limit: int = ENUM_LIMIT) -> list:
        """Every parameter of the class, if there are at most ``limit`` of them."""
        raise NotEnumerableError(f"{type(self).__name__} cannot be enumerated")

    def shifted(self, offset: int) -> "PolicySpace":
        """The same class with every epoch moved by ``offset``."""
        raise NotImplementedError

    def policy(self, theta) -> Callable:
        return lambda s, h: self.action(theta, s, h)

    def avoids(self, theta, constraints: Iterable) -> bool:
        for s, a, h in constraints:
            try:
                if self.action(theta, s, h) == a:
                    return False
            except MissingFeatureError:
                continue
        return True


class Solver:
    def add(self, state, action, epoch) -> None:
        raise NotImplementedError

    def actions(self, state, epoch) -> tuple:
        raise NotImplementedError


class BruteForceSolver(Solver):
    """Filters an explicit member list; used as the reference implementation."""

    def __init__(self, space: PolicySpace, limit: int = ENUM_LIMIT):
        self.space = space
        self.alive = list(space.members(limit))

    def add(self, state, action, epoch):
        self.alive = [t for t in self.alive if self.space.avoids(t, [(state, action, epoch)])]

    def actions(self, state, epoch):
        return tuple(sorted({self.space.action(t, state, epoch) for t in self.alive}))


class Finite(PolicySpace):
    """Explicit list of deterministic policies, each a ``(state, epoch) -> action`` table.

    ``theta`` is the index into the list.
    """

    def __init__(self, policies: Sequence[Mapping], actions: Iterable | None = None):
        if not policies:
            raise ValueError("a finite class needs at least one policy")
        self.tables = tuple(dict(p) for p in policies)
        seen = set()
        for table in self.tables:
            seen.update(table.values())
        self.actions = tuple(sorted(set(actions) if actions is not None else seen))
        # (s, h) -> {action: bitmask of policy indices}
        masks: dict = {}
        for i, table in enumerate(self.tables):
            for pair, a in table.items():
                by_action = masks.setdefault(pair, {})
                by_action[a] = by_action.get(a, 0) | (1 << i)
        self._masks = masks

    def __len__(self):
        return len(self.tables)

    def action(self, theta, state, epoch):
        if not isinstance(theta, int) or not 0 <= theta < len(self.tables):
            raise ValueError(f"policy index {theta!r} out of range")
        try:
            return self.tables[theta][(state, epoch)]
        except KeyError:
            raise MissingFeatureError((state, epoch)) from None

    def members(self, limit=ENUM_LIMIT):
        if len(self.tables) > limit:
            raise NotEnumerableError(f"{len(self.tables)} policies exceed the limit {limit}")
        return list(range(len(self.tables)))

    def solver(self):
        return _FiniteSolver(self)

    def shifted(self, offset):
        return Finite([{(s, h + offset): a for (s, h), a in t.items()} for t in self.tables],
                      self.actions)


class _FiniteSolver(Solver):
    def __init__(self, space: Finite):
        self.space = space
        self.alive = (1 << len(space.tables)) - 1

    def add(self, state, action, epoch):
        mask = self.space._masks.get((state, epoch), {}).get(action, 0)
        self.alive &= ~mask

    def actions(self, state, epoch):
        by_action = self.space._masks.get((state, epoch))
        if by_action is None:
            raise MissingFeatureError((state, epoch))
        return tuple(sorted(a for a, m in by_action.items() if m & self.alive))


class TabularAll(PolicySpace):
    """Every deterministic map from ``domain`` (a list of ``(state, epoch)``) to ``actions``.

    ``theta`` is a tuple of actions aligned with ``domain``, or a mapping.
    """

    def __init__(self, domain: Sequence, actions: Iterable):
        self.domain = tuple(domain)
        self.actions = tuple(sorted(actions))
        self._index = {pair: i for i, pair in enumerate(self.domain)}

    @classmethod
    def over(cls, states, actions, horizon):
        return cls([(s, h) for h in range(horizon) for s in states], actions)

    def action(self, theta, state, epoch):
        i = self._index.get((state, epoch))
        if i is None:
            raise MissingFeatureError((state, epoch))
        a = theta[(state, epoch)] if isinstance(theta, Mapping) else theta[i]
        if a not in self.actions:
            raise ValueError(f"malformed parameter: action {a!r} not in {self.actions}")
        return a

    def members(self, limit=ENUM_LIMIT):
        size = len(self.actions) ** len(self.domain)
        if size > limit:
            raise NotEnumerableError(f"{size} tabular policies exceed the limit {limit}")
        return list(itertools.product(self.actions, repeat=len(self.domain)))

    def solver(self):
        return _TabularSolver(self)

    def shifted(self, offset):
        return TabularAll([(s, h + offset) for s, h in self.domain], self.actions)


class _TabularSolver(Solver):
    def __init__(self, space: TabularAll):
        self.space = space
        self.forbidden: dict = {}
        self.empty = False

    def add(self, state, action, epoch):
        if (state, epoch) not in self.space._index or action not in self.space.actions:
            return
        bad = self.forbidden.setdefault((state, epoch), set())
        bad.add(action)
        if len(bad) == len(self.space.actions):
            self.empty = True

    def actions(self, state, epoch):
        if (state, epoch) not in self.space._index:
            raise MissingFeatureError((state, epoch))
        if self.empty:
            return ()
        bad = self.forbidden.get((state, epoch), ())
        return tuple(a for a in self.space.actions if a not in bad)


class Gf2Linear(PolicySpace):
    """Linear policies over the two-element field: ``action = <theta, phi(s, h)> mod 2``.

    ``theta`` and feature vectors are ints read as bitsets (bit ``i`` is
    coordinate ``i``). Bit strings are accepted for features.
    """

    actions = (0, 1)

    def __init__(self, dimension: int, features: Mapping):
        if dimension < 0:
            raise ValueError("dimension must be non-negative")
        self.dimension = dimension
        feats = {}
        for pair, phi in features.items():
            phi = gf2.bits_to_int(phi) if isinstance(phi, str) else int(phi)
            if phi >> dimension:
                raise ValueError(f"feature at {pair} has bits beyond dimension {dimension}")
            feats[tuple(pair)] = phi
        self.features = feats

    def feature(self, state, epoch) -> int:
        try:
            return self.features[(state, epoch)]
        except KeyError:
            raise MissingFeatureError((state, epoch)) from None

    def action(self, theta, state, epoch):
        if not isinstance(theta, (int, np.integer)) or theta < 0 or int(theta) >> self.dimension:
            raise ValueError(f"malformed parameter {theta!r} for dimension {self.dimension}")
        return gf2.dot(int(theta), self.feature(state, epoch))

    def members(self, limit=ENUM_LIMIT):
        if (1 << self.dimension) > limit:
            raise NotEnumerableError(f"2^{self.dimension} parameters exceed the limit {limit}")
        return list(range(1 << self.dimension))

    def solver(self):
        return _Gf2Solver(self)

    def shifted(self, offset):
        return Gf2Linear(self.dimension, {(s, h + offset): v for (s, h), v in self.features.items()})

    def consistent_parameter(self, constraints: Iterable) -> int | None:
        solver = _Gf2Solver(self)
        for s, a, h in constraints:
            solver.add(s, a, h)
        return solver.system.solve()


class _Gf2Solver(Solver):
    def __init__(self, space: Gf2Linear):
        self.space = space
        self.system = gf2.Gf2System(space.dimension)

    def add(self, state, action, epoch):
        if action not in (0, 1):
            return
        # forbidding action a means <theta, phi> = 1 - a
        self.system.add(self.space.feature(state, epoch), 1 - action)

    def actions(self, state, epoch):
        if not self.system.consistent:
            return ()
        value = self.system.value_of(self.space.feature(state, epoch))
        return (0, 1) if value is None else (value,)


class LinearThreshold(PolicySpace):
    """Threshold policies ``action = 1[<theta, phi> > c]`` with ``(phi, c)`` per pair.

    ``theta`` ranges over all of ``R^d``; the oracle decides feasibility exactly
    with rational arithmetic and records a witness parameter for every action it
    reports in ``solver.witnesses``.
    """

    actions = (0, 1)

    def __init__(self, dimension: int, features: Mapping):
        self.dimension = dimension
        feats = {}
        for pair, (phi, c) in features.items():
            phi = tuple(as_fraction(v) for v in phi)
            if len(phi) != dimension:
                raise ValueError(f"feature at {pair} has length {len(phi)}, expected {dimension}")
            feats[tuple(pair)] = (phi, as_fraction(c))
        self.features = feats

    def feature(self, state, epoch):
        try:
            return self.features[(state, epoch)]
        except KeyError:
            raise MissingFeatureError((state, epoch)) from None

    def action(self, theta, state, epoch):
        if len(theta) != self.dimension:
            raise ValueError(f"parameter has length {len(theta)}, expected {self.dimension}")
        phi, c = self.feature(state, epoch)
        return int(sum((as_fraction(t) * p for t, p in zip(theta, phi)), Fraction(0)) > c)

    def solver(self):
        return _ThresholdSolver(self)

    def shifted(self, offset):
        return LinearThreshold(self.dimension,
                               {(s, h + offset): v for (s, h), v in self.features.items()})


class _ThresholdSolver(Solver):
    """Rows over ``x = (theta, t)`` with ``t >= 1``; ``theta / t`` is the policy parameter.

    ``<theta, phi> > c`` becomes ``<theta, phi> - c t >= 1`` and
    ``<theta, phi> <= c`` becomes ``c t - <theta, phi> >= 0``; both are
    invariant under positive scaling, so nothing is lost.
    """

    def __init__(self, space: LinearThreshold):
        self.space = space
        d = space.dimension
        self.rows = [[Fraction(0)] * d + [Fraction(1)]]
        self.rhs = [Fraction(1)]
        self.constraints: list[tuple] = []
        self.witnesses: dict = {}

    def _row(self, state, epoch, action):
        phi, c = self.space.feature(state, epoch)
        if action == 1:
            return list(phi) + [-c], Fraction(1)
        return [-v for v in phi] + [c], Fraction(0)

    def add(self, state, action, epoch):
        if action not in (0, 1):
            return
        # forbidding an action means requiring the other one
        row, rhs = self._row(state, epoch, 1 - action)
        self.rows.append(row)
        self.rhs.append(rhs)
        self.constraints.append((state, action, epoch))

    def actions(self, state, epoch):
        out = []
        for b in (0, 1):
            row, rhs = self._row(state, epoch, b)
            x = find_feasible_point(self.rows + [row], self.rhs + [rhs])
            if x is None:
                continue
            theta = tuple(v / x[-1] for v in x[:-1])
            # re-check the witness by evaluating the policy directly
            if self.space.action(theta, state, epoch) != b or not self.space.avoids(theta, self.constraints):
                raise ArithmeticError(f"feasibility witness {theta} fails direct evaluation")
            self.witnesses[(state, epoch, b)] = theta
            out.append(b)
        return tuple(out)


def _fourier_index(x) -> int:
    """Hypercube point in ``{-1, 1}^D`` -> truth-table index (bit j set iff ``x_j = -1``)."""
    idx = 0
    for j, v in enumerate(x):
        if v == -1:
            idx |= 1 << j
        elif v != 1:
            raise ValueError(f"hypercube coordinates must be +-1, got {v!r}")
    return idx


def character(subset, x) -> int:
    out = 1
    for j in subset:
        out *= x[j]
    return out


class FourierSupport(PolicySpace):
    """Boolean functions on ``{-1, 1}^D`` whose Fourier coefficients vanish outside ``family``.

    Features are hypercube points; action 0 means ``f(x) = +1`` and action 1
    means ``f(x) = -1``. ``theta`` is a truth table as an int (bit ``i`` set iff
    ``f = -1`` at the point with index ``i``). ``mode="relaxation"`` decides the
    oracle with real linear systems in the coefficient vector, which does not
    force the function to be Boolean elsewhere; ``mode="exact"`` filters the
    enumerated class.
    """

    actions = (0, 1)
    MAX_EXACT_D = 4

    def __init__(self, dimension: int, family: Iterable, features: Mapping, mode: str = "relaxation"):
        if mode not in ("relaxation", "exact"):
            raise ValueError(f"unknown mode {mode!r}")
        self.dimension = dimension
        fam = []
        for subset in family:
            subset = tuple(sorted(set(subset)))
            if any(not 0 <= j < dimension for j in subset):
                raise ValueError(f"subset {subset} outside [0, {dimension})")
            if subset not in fam:
                fam.append(subset)
        self.family = tuple(fam)
        self.features = {tuple(pair): tuple(int(v) for v in x) for pair, x in features.items()}
        for pair, x in self.features.items():
            if len(x) != dimension:
                raise ValueError(f"feature at {pair} has length {len(x)}, expected {dimension}")
            _fourier_index(x)
        self.mode = mode
        self._members = None

    def feature(self, state, epoch):
        try:
            return self.features[(state, epoch)]
        except KeyError:
            raise MissingFeatureError((state, epoch)) from None

    def action(self, theta, state, epoch):
        return (int(theta) >> _fourier_index(self.feature(state, epoch))) & 1

    def characters(self, x) -> list[int]:
        return [character(S, x) for S in self.family]

    def members(self, limit=ENUM_LIMIT):
        if self._members is None:
            if self.dimension > self.MAX_EXACT_D:
                raise NotEnumerableError(f"dimension {self.dimension} too large to enumerate")
            self._members = boolean_functions_with_support(self.dimension, self.family)
        if len(self._members) > limit:
            raise NotEnumerableError(f"{len(self._members)} functions exceed the limit {limit}")
        return list(self._members)

    def solver(self):
        if self.mode == "exact":
            return _FourierExactSolver(self)
        return _FourierRelaxedSolver(self)

    def with_mode(self, mode) -> "FourierSupport":
        return FourierSupport(self.dimension, self.family, self.features, mode)

    def shifted(self, offset):
        return FourierSupport(self.dimension, self.family,
                              {(s, h + offset): v for (s, h), v in self.features.items()}, self.mode)


def boolean_functions_with_support(dimension: int, family: Sequence) -> list[int]:
    """Truth tables of all ``{-1,1}``-valued functions with Fourier support inside ``family``."""
    n = 1 << dimension
    if n > 16:
        raise NotEnumerableError("truth-table enumeration is limited to dimension 4")
    points = [tuple(-1 if (i >> j) & 1 else 1 for j in range(dimension)) for i in range(n)]
    allowed = {tuple(sorted(S)) for S in family}
    outside = [S for k in range(dimension + 1) for S in itertools.combinations(range(dimension), k)
               if S not in allowed]
    tables = np.arange(1 << n, dtype=np.int64)
    values = 1 - 2 * ((tables[:, None] >> np.arange(n)) & 1)  # (2^n, n) of +-1
    if outside:
        chars = np.array([[character(S, x) for x in points] for S in outside], dtype=np.int64)
        coeffs = values @ chars.T  # unnormalized Fourier coefficients, exact integers
        keep = np.all(coeffs == 0, axis=1)
    else:
        keep = np.ones(len(tables), dtype=bool)
    return [int(t) for t in tables[keep]]


class _FourierRelaxedSolver(Solver):
    def __init__(self, space: FourierSupport):
        self.space = space
        self.rows: list[list[int]] = []
        self.rhs: list[int] = []
        self.consistent = True

    def add(self, state, action, epoch):
        if action not in (0, 1):
            return
        x = self.space.feature(state, epoch)
        # forbidding action a forces the other sign: f(x) = -(+1 if a == 0 else -1)
        self.rows.append(self.space.characters(x))
        self.rhs.append(-1 if action == 0 else 1)
        if solve_linear_system(self.rows, self.rhs) is None:
            self.consistent = False

    def actions(self, state, epoch):
        if not self.consistent:
            return ()
        row = self.space.characters(self.space.feature(state, epoch))
        return tuple(b for b in (0, 1)
                     if solve_linear_system(self.rows + [row], self.rhs + [1 if b == 0 else -1]) is not None)


class _FourierExactSolver(BruteForceSolver):
    def __init__(self, space: FourierSupport):
        super().__init__(space, limit=1 << 16)


class RelabeledSpace(PolicySpace):
    """A class whose ``(state, epoch)`` pairs are aliases for keys of a base class.

    ``mapping`` may grow after construction (features released on first
    visit). Pairs in ``constant`` take a fixed action under every parameter.
    """

    def __init__(self, base: PolicySpace, mapping: Mapping | None = None, constant: Mapping | None = None):
        self.base = base
        self.actions = tuple(base.actions)
        self.mapping = dict(mapping or {})
        self.constant = dict(constant or {})

    def assign(self, pair, key) -> None:
        self.mapping[tuple(pair)] = tuple(key)

    def key(self, state, epoch):
        try:
            return self.mapping[(state, epoch)]
        except KeyError:
            raise MissingFeatureError((state, epoch)) from None

    def action(self, theta, state, epoch):
        fixed = self.constant.get((state, epoch))
        if fixed is not None:
            return fixed
        return self.base.action(theta, *self.key(state, epoch))

    def members(self, limit=ENUM_LIMIT):
        return self.base.members(limit)

    def solver(self):
        return _RelabeledSolver(self)

    def shifted(self, offset):
        return RelabeledSpace(self.base, {(s, h + offset): k for (s, h), k in self.mapping.items()},
                              {(s, h + offset): a for (s, h), a in self.constant.items()})

    def as_gf2(self) -> "Gf2Linear":
        """Materialize as a plain Gf2Linear when the base class is one."""
        if not isinstance(self.base, Gf2Linear):
            raise TypeError("base class is not Gf2Linear")
        if any(a != 0 for a in self.constant.values()):
            raise ValueError("only constant action 0 has a Gf2 feature (the zero vector)")
        feats = {pair: self.base.feature(*key) for pair, key in self.mapping.items()}
        feats.update({pair: 0 for pair in self.constant})
        return Gf2Linear(self.base.dimension, feats)


class _RelabeledSolver(Solver):
    def __init__(self, space: RelabeledSpace):
        self.space = space
        self.inner = space.base.solver()
        self.empty = False

    def add(self, state, action, epoch):
        fixed = self.space.constant.get((state, epoch))
        if fixed is not None:
            if action == fixed:
                self.empty = True
            return
        ks, kh = self.space.key(state, epoch)
        self.inner.add(ks, action, kh)

    def actions(self, state, epoch):
        if self.empty:
            return ()
        fixed = self.space.constant.get((state, epoch))
        if fixed is not None:
            # still need the rest of the class to be non-empty
            return (fixed,) if self._nonempty() else ()
        return self.inner.actions(*self.space.key(state, epoch))

    def _nonempty(self):
        for pair in self.space.mapping.values():
            return bool(self.inner.actions(*pair))
        return True


# ---------------------------------------------------------------------------
# oracle entry points

def policy_action(space: PolicySpace, theta, state, epoch):
    return space.action(theta, state, epoch)


def elimination_oracle(space: PolicySpace, constraints: Iterable, state, epoch) -> tuple:
    """Actions realizable at ``(state, epoch)`` by policies avoiding every constraint."""
    solver = space.solver()
    for s, a, h in constraints:
        solver.add(s, a, h)
    out = solver.actions(state, epoch)
    if not out:
        raise EmptyClassError("every policy violates the constraint set")
    return out


def brute_force_oracle(space: PolicySpace, constraints: Iterable, state, epoch,
                       limit: int = ENUM_LIMIT) -> tuple:
    constraints = list(constraints)
    alive = [t for t in space.members(limit) if space.avoids(t, constraints)]
    if not alive:
        raise EmptyClassError("every policy violates the constraint set")
    return tuple(sorted({space.action(t, state, epoch) for t in alive}))


class EliminationOracle:
    """Oracle bound to one run's ConstraintSet, with call accounting.

    New constraints are pushed into the class solver incrementally; answers are
    cached per ``(state, epoch)`` until the constraint set grows. ``calls``
    counts every query, cached or not.
    """

    def __init__(self, space: PolicySpace, constraints: ConstraintSet | None = None):
        self.space = space
        self.constraints = ConstraintSet() if constraints is None else constraints
        self._solver = space.solver()
        self._synced = 0
        self._cache: dict = {}
        self.calls = 0
        self.max_constraints = 0

    def _sync(self):
        z = self.constraints
        if self._synced < len(z):
            for i in range(self._synced, len(z)):
                self._solver.add(*z[i])
            self._synced = len(z)
            self._cache.clear()

    def __call__(self, state, epoch) -> tuple:
        self.calls += 1
        self._sync()
        self.max_constraints = max(self.max_constraints, len(self.constraints))
        key = (state, epoch)
        out = self._cache.get(key)
        if out is None:
            out = self._solver.actions(state, epoch)
            if not out:
                raise EmptyClassError(
                    f"every policy violates the constraint set ({len(self.constraints)} constraints)"
                )
            self._cache[key] = out
        return out

    @property
    def solver(self) -> Solver:
        self._sync()
        return self._solver


# ---------------------------------------------------------------------------
# distinguishability and dependency

def distinguishable(space: PolicySpace, theta1, theta2, item, ordered: bool = True) -> bool:
    """Whether the two policies take ``a1`` and ``a2`` at the item's pair.

    With ``ordered=False`` either assignment counts, which is the reading used
    for dependency and the eluder dimension.
    """
    s, a1, a2, h = item
    if a1 == a2:
        raise ValueError("item actions must differ")
    b1, b2 = space.action(theta1, s, h), space.action(theta2, s, h)
    if (b1, b2) == (a1, a2):
        return True
    return not ordered and (b1, b2) == (a2, a1)


class PairIndex:
    """Bitmask encoding of the unordered distinguishing pairs of every item.

    Pair ``(i, j)`` of enumerated members is bit ``i * n + j``; each item's mask
    holds both orientations so unions and subset tests are plain int ops.
    """

    def __init__(self, space: PolicySpace, limit: int = ENUM_LIMIT):
        self.space = space
        self.members = space.members(limit)
        self.n = len(self.members)
        self._cache: dict = {}
        self._by_action: dict = {}

    def _action_masks(self, state, epoch) -> dict:
        key = (state, epoch)
        masks = self._by_action.get(key)
        if masks is None:
            masks = {}
            for i, theta in enumerate(self.members):
                a = self.space.action(theta, state, epoch)
                masks[a] = masks.get(a, 0) | (1 << i)
            self._by_action[key] = masks
        return masks

    def mask(self, item) -> int:
        s, a1, a2, h = item
        key = (s, min(a1, a2), max(a1, a2), h)
        out = self._cache.get(key)
        if out is None:
            masks = self._action_masks(s, h)
            m1, m2 = masks.get(a1, 0), masks.get(a2, 0)
            out = 0
            n = self.n
            for i in _bits(m1):
                out |= m2 << (i * n)
            for i in _bits(m2):
                out |= m1 << (i * n)
            self._cache[key] = out
        return out

    def independent(self, item, covered: int) -> bool:
        return bool(self.mask(item) & ~covered)


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def is_dependent(space: PolicySpace, item, history: Iterable, limit: int = ENUM_LIMIT,
                 index: PairIndex | None = None) -> bool:
    """True iff every pair that agrees on all history items also agrees on ``item``.

    For Gf2Linear and {0, 1} items this is span membership of the feature
    vectors, so no enumeration is needed.
    """
    history = [x if isinstance(x, UncertaintyItem) else UncertaintyItem(*x) for x in history]
    item = item if isinstance(item, UncertaintyItem) else UncertaintyItem(*item)
    if index is None and isinstance(space, Gf2Linear) and all(
            {x.a1, x.a2} == {0, 1} for x in history + [item]):
        system = gf2.Gf2System(space.dimension)
        for s, _, _, h in history:
            system.add(space.feature(s, h), 0)
        s, _, _, h = item
        return system.reduce(space.feature(s, h))[0] == 0
    index = PairIndex(space, limit) if index is None else index
    covered = 0
    for x in history:
        covered |= index.mask(x)
    return not index.independent(item, covered)


def binary_items(space: PolicySpace, pairs: Iterable) -> list[UncertaintyItem]:
    """One item per ``(state, epoch)`` and unordered action pair."""
    out = []
    for s, h in pairs:
        for a1, a2 in itertools.combinations(space.actions, 2):
            out.append(UncertaintyItem(s, a1, a2, h))
    return out
