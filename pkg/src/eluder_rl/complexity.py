"""Eluder and Littlestone dimensions of small policy classes, plus witness objects.

Exact searches enumerate the class once and encode, for every item, the set of
member pairs it tells apart as an int bitmask (see :class:`PairIndex`). The
eluder search is then a longest-path problem over unions of those masks, and
the Littlestone search a recursion over surviving-member masks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import gf2
from .errors import NotEnumerableError
from .policy import (
    ENUM_LIMIT,
    FourierSupport,
    Gf2Linear,
    PairIndex,
    PolicySpace,
    TabularAll,
    UncertaintyItem,
    binary_items,
    is_dependent,
)

SEARCH_BUDGET = 200_000


@dataclass
class IndependenceSequence:
    items: list

    def __len__(self):
        return len(self.items)

    def verify(self, space: PolicySpace, limit: int = ENUM_LIMIT) -> bool:
        index = PairIndex(space, limit)
        return all(not is_dependent(space, x, self.items[:i], index=index)
                   for i, x in enumerate(self.items))


@dataclass
class ShatteredTree:
    """Complete binary tree of ``(state, epoch)`` keys with one witness per leaf.

    ``nodes`` maps a label prefix (tuple of bits) to the key queried at that
    node; ``witnesses`` maps each full label path to a parameter realizing it.
    """

    depth: int
    nodes: dict
    witnesses: dict

    def node(self, prefix) -> tuple:
        return self.nodes[tuple(prefix)]

    def paths(self):
        return itertools.product((0, 1), repeat=self.depth)

    def verify(self, space: PolicySpace) -> bool:
        for labels in self.paths():
            theta = self.witnesses.get(labels)
            if theta is None:
                return False
            for i in range(self.depth):
                s, h = self.nodes[labels[:i]]
                if space.action(theta, s, h) != labels[i]:
                    return False
        return True

    def distinct_nodes(self) -> bool:
        keys = list(self.nodes.values())
        return len(set(keys)) == len(keys)


@dataclass
class DimensionResult:
    value: int
    witness: object
    mode: str = "exact"  # or "lower-bound"
    method: str = "search"
    universe_size: int = 0
    notes: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.value, self.witness))

    @property
    def exact(self) -> bool:
        return self.mode == "exact"


def _as_items(space: PolicySpace, universe: Iterable) -> list:
    items = []
    pairs = []
    for u in universe:
        if isinstance(u, UncertaintyItem) or len(u) == 4:
            items.append(UncertaintyItem(*u))
        else:
            pairs.append(tuple(u))
    return items + binary_items(space, pairs)


def gf2_full_space(dimension: int) -> Gf2Linear:
    """Gf2Linear whose feature universe is all of ``F_2^D``, keyed ``(vector, 0)``."""
    return Gf2Linear(dimension, {(v, 0): v for v in range(1 << dimension)})


def eluder_dim_exact(space: PolicySpace, universe: Iterable, budget: int = SEARCH_BUDGET,
                     limit: int = ENUM_LIMIT, method: str = "auto") -> DimensionResult:
    """Longest sequence of universe items each independent of its prefix.

    ``universe`` holds items ``(s, a1, a2, h)`` or bare ``(s, h)`` pairs (expanded
    to every action pair). For Gf2Linear the answer is the rank of the feature
    vectors (``method="auto"``); otherwise a memoized depth-first search over
    covered-pair masks runs until ``budget`` expansions, after which the best
    sequence found is returned with ``mode="lower-bound"``.
    """
    items = _as_items(space, universe)
    if method == "auto" and isinstance(space, Gf2Linear):
        return _gf2_rank_dimension(space, items)
    index = PairIndex(space, limit)
    masks = []
    for x in items:
        m = index.mask(x)
        if m:
            masks.append((m, x))
    # items with identical masks are interchangeable; keep one of each
    unique = {}
    for m, x in masks:
        unique.setdefault(m, x)
    masks = sorted(unique.items(), key=lambda mx: -mx[0].bit_count())

    memo: dict = {}
    expansions = 0
    exhausted = False

    def best_from(covered: int) -> int:
        nonlocal expansions, exhausted
        hit = memo.get(covered)
        if hit is not None:
            return hit[0]
        expansions += 1
        if expansions > budget:
            exhausted = True
            return 0
        best, choice = 0, None
        for m, x in masks:
            if m & ~covered:
                value = 1 + best_from(covered | m)
                if value > best:
                    best, choice = value, (m, x)
        if not exhausted:
            memo[covered] = (best, choice)
        return best

    value = best_from(0)
    witness = _replay(memo, masks)
    mode = "lower-bound" if exhausted else "exact"
    value = len(witness)
    return DimensionResult(value, witness, mode, "search", len(items))


def _replay(memo, masks) -> IndependenceSequence:
    seq, covered = [], 0
    while True:
        hit = memo.get(covered)
        if hit is None or hit[1] is None:
            break
        m, x = hit[1]
        seq.append(x)
        covered |= m
    # after a budget cut the memo chain stops early; finish greedily
    for m, x in masks:
        if m & ~covered:
            seq.append(x)
            covered |= m
    return IndependenceSequence(seq)


def _gf2_rank_dimension(space: Gf2Linear, items: Sequence) -> DimensionResult:
    binary = [x for x in items if {x.a1, x.a2} == {0, 1}]
    picked = gf2.basis_indices([space.feature(x.state, x.epoch) for x in binary])
    witness = IndependenceSequence([binary[i] for i in picked])
    return DimensionResult(len(picked), witness, "exact", "gf2-rank", len(items))


def greedy_independence(space: PolicySpace, universe: Iterable, limit: int = ENUM_LIMIT) -> DimensionResult:
    """Single greedy pass; always a certified lower bound only."""
    items = _as_items(space, universe)
    index = PairIndex(space, limit)
    covered, seq = 0, []
    for x in items:
        m = index.mask(x)
        if m & ~covered:
            seq.append(x)
            covered |= m
    return DimensionResult(len(seq), IndependenceSequence(seq), "lower-bound", "greedy", len(items))


def littlestone_dim_exact(space: PolicySpace, universe: Iterable, budget: int = SEARCH_BUDGET,
                          limit: int = ENUM_LIMIT) -> DimensionResult:
    """Depth of the deepest tree over ``universe`` (``(s, h)`` keys) shattered by the class.

    Iterative deepening on "is there a shattered tree of depth k for this
    surviving set?", memoized on the surviving-member bitmask. If the budget
    runs out the last certified depth is returned as a lower bound.
    """
    if tuple(space.actions) != (0, 1):
        raise ValueError("Littlestone dimension needs the binary action set {0, 1}")
    members = space.members(limit)
    keys = [tuple(k) for k in universe]
    splits = []
    seen = set()
    for key in keys:
        ones = 0
        for i, theta in enumerate(members):
            if space.action(theta, *key) == 1:
                ones |= 1 << i
        if ones not in seen:
            seen.add(ones)
            splits.append((key, ones))
    full = (1 << len(members)) - 1

    memo: dict = {}
    expansions = 0

    class _Budget(Exception):
        pass

    def shatters(alive: int, depth: int):
        """A key splitting ``alive`` whose halves both shatter ``depth - 1``, else None."""
        nonlocal expansions
        if depth == 0:
            return ()
        hit = memo.get((alive, depth))
        if hit is not None:
            return hit or None
        expansions += 1
        if expansions > budget:
            raise _Budget
        found = False
        for key, ones in splits:
            a1, a0 = alive & ones, alive & ~ones
            if a1 and a0 and shatters(a0, depth - 1) is not None and shatters(a1, depth - 1) is not None:
                found = (key, ones)
                break
        memo[(alive, depth)] = found
        return found or None

    best = 0
    mode = "exact"
    if not members:
        return DimensionResult(0, ShatteredTree(0, {}, {}), mode, "search", len(keys))
    try:
        while best < len(members) and shatters(full, best + 1) is not None:
            best += 1
    except _Budget:
        mode = "lower-bound"
    tree = _build_tree(memo, full, best, members)
    return DimensionResult(best, tree, mode, "search", len(keys))


def _build_tree(memo, full, depth, members) -> ShatteredTree:
    nodes, witnesses = {}, {}

    def walk(alive, prefix, remaining):
        if remaining == 0:
            witnesses[prefix] = members[(alive & -alive).bit_length() - 1]
            return
        key, ones = memo[(alive, remaining)]
        nodes[prefix] = key
        walk(alive & ~ones, prefix + (0,), remaining - 1)
        walk(alive & ones, prefix + (1,), remaining - 1)

    walk(full, (), depth)
    return ShatteredTree(depth, nodes, witnesses)


def gf2_standard_tree(dimension: int) -> tuple[Gf2Linear, ShatteredTree]:
    """Tree with basis vector ``e_i`` at every node of level ``i``; witness = the label vector."""
    space = Gf2Linear(dimension, {(1 << i, 0): 1 << i for i in range(dimension)})
    nodes = {}
    for i in range(dimension):
        for prefix in itertools.product((0, 1), repeat=i):
            nodes[prefix] = (1 << i, 0)
    witnesses = {labels: sum(b << i for i, b in enumerate(labels))
                 for labels in itertools.product((0, 1), repeat=dimension)}
    return space, ShatteredTree(dimension, nodes, witnesses)


# ---------------------------------------------------------------------------
# random Gaussian features against a finite sphere packing

@dataclass
class FeatureExperimentReport:
    bound: float
    rows: list  # (trial, length, bound, exceeded)

    @property
    def lengths(self) -> list:
        return [r[1] for r in self.rows]

    @property
    def exceed_fraction(self) -> float:
        return sum(r[3] for r in self.rows) / len(self.rows) if self.rows else 0.0


def packing_bound(epsilon: float, size: int, delta: float) -> float:
    return 4 * math.pi / epsilon * math.log(size / delta)


def check_packing(thetas: np.ndarray, epsilon: float, tol: float = 1e-9) -> None:
    thetas = np.asarray(thetas, dtype=float)
    norms = np.linalg.norm(thetas, axis=1)
    if np.any(np.abs(norms - 1) > tol):
        raise ValueError("packing points must lie on the unit sphere")
    if len(thetas) > 1:
        diff = np.linalg.norm(thetas[:, None, :] - thetas[None, :, :], axis=-1)
        np.fill_diagonal(diff, np.inf)
        if diff.min() < epsilon - tol:
            raise ValueError(f"packing points closer than epsilon={epsilon}: {diff.min():.4f}")


def sphere_packing(d: int, epsilon: float, size: int, rng, max_tries: int = 100_000) -> np.ndarray:
    """Rejection-sample ``size`` unit vectors with pairwise distance at least ``epsilon``."""
    rng = np.random.default_rng(rng)
    points = []
    for _ in range(max_tries):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        if all(np.linalg.norm(v - p) >= epsilon for p in points):
            points.append(v)
            if len(points) == size:
                return np.array(points)
    raise ValueError(f"could not place {size} points at separation {epsilon} in dimension {d}")


def independence_run(thetas: np.ndarray, rng, max_draws: int = 100_000) -> int:
    """Draw Gaussian features until every pair of thresholds disagrees on one of them.

    A drawn feature joins the sequence only when it splits some group of
    parameters that agreed on every earlier member; the return value is the
    sequence length at the moment all groups are singletons.
    """
    n, d = thetas.shape
    groups = np.zeros(n, dtype=np.int64)
    n_groups = 1
    length = 0
    draws = 0
    while n_groups < n:
        if draws >= max_draws:
            raise RuntimeError("feature draws exhausted before every pair was separated")
        draws += 1
        phi = rng.standard_normal(d)
        labels = (thetas @ phi > 0).astype(np.int64)
        _, refined = np.unique(groups * 2 + labels, return_inverse=True)
        k = int(refined.max()) + 1
        if k > n_groups:
            groups, n_groups = refined, k
            length += 1
    return length


def random_feature_experiment(epsilon: float, thetas, delta: float, trials: int, rng) -> FeatureExperimentReport:
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2:
        raise ValueError("thetas must be a (count, d) array")
    check_packing(thetas, epsilon)
    bound = packing_bound(epsilon, len(thetas), delta)
    if isinstance(rng, np.random.SeedSequence):
        seeds = rng
    elif isinstance(rng, (int, np.integer)):
        seeds = np.random.SeedSequence(int(rng))
    else:
        seeds = np.random.SeedSequence(int(np.random.default_rng(rng).integers(2**63)))
    rows = []
    for t, child in enumerate(seeds.spawn(trials)):
        length = independence_run(thetas, np.random.default_rng(child))
        rows.append((t, length, bound, int(length > bound)))
    return FeatureExperimentReport(bound, rows)


# ---------------------------------------------------------------------------
# one-dimensional thresholds shatter every depth

@dataclass(frozen=True)
class BisectionStep:
    phi: Fraction
    c: Fraction
    label: int
    interval: tuple


def threshold_shatter_witness(depth: int, labels: Sequence | None = None):
    """Bisection of ``[0, 1]``: node ``i`` queries ``(phi, c) = (1, midpoint)``.

    Label 1 keeps the upper half and label 0 the lower half, so after ``i``
    steps the consistent parameters form an interval of length ``2^-i``. With
    ``labels`` given returns that path's steps; otherwise a dict over every
    label path.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if labels is None:
        return {path: threshold_shatter_witness(depth, path)
                for path in itertools.product((0, 1), repeat=depth)}
    if len(labels) != depth:
        raise ValueError(f"expected {depth} labels")
    lo, hi = Fraction(0), Fraction(1)
    steps = []
    for b in labels:
        mid = (lo + hi) / 2
        if b == 1:
            lo = mid
        elif b == 0:
            hi = mid
        else:
            raise ValueError("labels must be bits")
        steps.append(BisectionStep(Fraction(1), mid, b, (lo, hi)))
    return steps


def threshold_witness_parameter(steps) -> Fraction:
    """Midpoint of the final interval; realizes every label on the path."""
    lo, hi = steps[-1].interval
    theta = (lo + hi) / 2
    for st in steps:
        if int(theta * st.phi > st.c) != st.label:
            raise ArithmeticError(f"witness {theta} disagrees with step {st}")
    return theta


# ---------------------------------------------------------------------------
# Boolean functions with restricted Fourier support

def degree_family(dimension: int, degree: int) -> list[tuple]:
    return [S for k in range(degree + 1) for S in itertools.combinations(range(dimension), k)]


def fourier_dim_bound(family: Iterable) -> int:
    return len({tuple(sorted(set(S))) for S in family})


def hypercube_space(dimension: int, family: Iterable, mode: str = "relaxation") -> FourierSupport:
    points = {}
    for i in range(1 << dimension):
        x = tuple(-1 if (i >> j) & 1 else 1 for j in range(dimension))
        points[(i, 0)] = x
    return FourierSupport(dimension, family, points, mode)


def fourier_dim_check(dimension: int, family: Iterable, budget: int = SEARCH_BUDGET):
    """Exact eluder dimension of the enumerated class over the whole cube, with its bound."""
    family = list(family)
    space = hypercube_space(dimension, family, mode="exact")
    result = eluder_dim_exact(space, list(space.features), budget=budget, limit=1 << 16)
    return result, fourier_dim_bound(family)


def tabular_dim_bound(n_states: int, n_actions: int, horizon: int) -> int:
    return n_states * n_actions ** 2 * horizon
