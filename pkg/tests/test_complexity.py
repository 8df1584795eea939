import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eluder_rl.complexity import (degree_family, eluder_dim_exact, fourier_dim_bound, fourier_dim_check,
                                  gf2_full_space, gf2_standard_tree, greedy_independence, hypercube_space,
                                  independence_run, littlestone_dim_exact, packing_bound,
                                  random_feature_experiment, sphere_packing, tabular_dim_bound,
                                  threshold_shatter_witness, threshold_witness_parameter)
from eluder_rl.policy import Finite, Gf2Linear, LinearThreshold, TabularAll, UncertaintyItem


def thresholds_on(points):
    """Monotone labelings of an ordered domain: policy k labels x >= k as 1."""
    return Finite([{(x, 0): int(x >= k) for x in points} for k in range(1, len(points) + 2)])


def test_singleton_class_dimensions():
    single = Finite([{(0, 0): 1, (1, 0): 0}])
    assert eluder_dim_exact(single, [(0, 0), (1, 0)]).value == 0
    assert littlestone_dim_exact(single, [(0, 0), (1, 0)]).value == 0


@pytest.mark.parametrize("D", [2, 3, 4])
def test_gf2_eluder_equals_dimension(D):
    space = gf2_full_space(D)
    res = eluder_dim_exact(space, list(space.features))
    assert res.value == D and res.exact
    assert res.witness.verify(space)


@pytest.mark.parametrize("D", [2, 3])
def test_gf2_eluder_by_search_agrees_with_rank(D):
    space = gf2_full_space(D)
    res = eluder_dim_exact(space, list(space.features), method="search")
    assert res.value == D and res.exact
    assert res.witness.verify(space)


@pytest.mark.parametrize("D", [1, 2, 3])
def test_gf2_littlestone_equals_dimension(D):
    space = gf2_full_space(D)
    res = littlestone_dim_exact(space, list(space.features))
    assert res.value == D and res.exact
    assert res.witness.verify(space)
    std_space, tree = gf2_standard_tree(D)
    assert tree.verify(std_space)


def test_finite_three_policies_eluder_at_most_two():
    space = Finite([{(0, 0): 0, (1, 0): 0}, {(0, 0): 1, (1, 0): 0}, {(0, 0): 1, (1, 0): 1}])
    res = eluder_dim_exact(space, [(0, 0), (1, 0)])
    assert res.value <= 2


def test_size_bound_with_three_actions_is_only_for_binary_items():
    # with three actions one pair can show up in several items, so |Theta| - 1 is not a cap
    space = Finite([{(0, 0): 0}, {(0, 0): 1}, {(0, 0): 2}], actions=(0, 1, 2))
    res = eluder_dim_exact(space, [(0, 0)])
    assert res.value == 3 > len(space) - 1
    assert res.witness.verify(space)


def test_thresholds_littlestone_two():
    space = thresholds_on([1, 2, 3, 4])
    assert len(space) == 5
    res = littlestone_dim_exact(space, [(x, 0) for x in [1, 2, 3, 4]])
    assert res.value == 2 and res.witness.verify(space)


def test_littlestone_at_most_eluder_on_random_classes():
    rng = random.Random(3)
    for _ in range(15):
        n_pol, n_pts = rng.randint(1, 6), rng.randint(1, 4)
        space = Finite([{(x, 0): rng.randint(0, 1) for x in range(n_pts)} for _ in range(n_pol)], (0, 1))
        pts = [(x, 0) for x in range(n_pts)]
        assert littlestone_dim_exact(space, pts).value <= eluder_dim_exact(space, pts).value


def test_eluder_permutation_invariant():
    space = TabularAll.over([0, 1], (0, 1), 2)
    universe = [(s, h) for s in (0, 1) for h in (0, 1)]
    values = {eluder_dim_exact(space, perm).value for perm in itertools.permutations(universe)}
    assert len(values) == 1


def test_tabular_bound():
    for S, A, H in [(1, 2, 2), (2, 2, 1), (1, 3, 2), (3, 2, 2), (2, 3, 1)]:
        if S * A * H > 12:
            continue
        space = TabularAll.over(range(S), range(A), H)
        res = eluder_dim_exact(space, [(s, h) for s in range(S) for h in range(H)])
        assert res.exact and res.value <= tabular_dim_bound(S, A, H)


def test_greedy_is_lower_bound():
    space = gf2_full_space(3)
    greedy = greedy_independence(space, list(space.features))
    assert greedy.mode == "lower-bound"
    assert greedy.value <= eluder_dim_exact(space, list(space.features)).value


def test_budget_exhaustion_flags_lower_bound():
    space = TabularAll.over([0, 1, 2], (0, 1), 2)
    res = eluder_dim_exact(space, [(s, h) for s in range(3) for h in range(2)], budget=3)
    assert res.mode == "lower-bound"
    assert res.witness.verify(space)


# --- thresholds shatter any depth ------------------------------------------

def test_threshold_witness_examples():
    (step,) = threshold_shatter_witness(1, [1])
    assert step.interval == (Fraction(1, 2), Fraction(1)) and threshold_witness_parameter([step]) == Fraction(3, 4)
    (step,) = threshold_shatter_witness(1, [0])
    assert step.interval == (Fraction(0), Fraction(1, 2))


@pytest.mark.parametrize("depth", [1, 3, 6])
def test_threshold_witness_every_path(depth):
    space_cache = {}
    for labels, steps in threshold_shatter_witness(depth).items():
        lo, hi = steps[-1].interval
        assert hi - lo == Fraction(1, 2 ** depth) > 0
        theta = threshold_witness_parameter(steps)
        for st in steps:
            key = st.c
            space = space_cache.setdefault(key, LinearThreshold(1, {(0, 0): ((st.phi,), st.c)}))
            assert space.action((theta,), 0, 0) == st.label


# --- Fourier support ---------------------------------------------------------

def test_fourier_bound_examples():
    assert fourier_dim_bound([()]) == 1
    assert fourier_dim_bound(degree_family(3, 1)) == 4
    assert fourier_dim_bound(degree_family(3, 3)) == 8
    assert len(hypercube_space(3, degree_family(3, 3)).members()) == 2 ** 2 ** 3


@pytest.mark.parametrize("D", [1, 2, 3, 4])
def test_fourier_degree_one_within_bound(D):
    result, bound = fourier_dim_check(D, degree_family(D, 1))
    assert result.exact and result.value <= bound


# --- random features against a packing -------------------------------------

def test_packing_bound_value():
    assert packing_bound(0.5, 16, 0.1) == pytest.approx(4 * math.pi / 0.5 * math.log(160))
    assert packing_bound(0.5, 16, 0.1) == pytest.approx(127.55, abs=0.01)


def test_single_parameter_needs_no_features():
    rep = random_feature_experiment(0.5, np.array([[1.0, 0.0, 0.0]]), 0.1, 20, 0)
    assert rep.lengths == [0] * 20


def test_antipodal_pair_length_one():
    thetas = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    rep = random_feature_experiment(2.0, thetas, 0.1, 200, 1)
    assert all(n == 1 for n in rep.lengths)


def test_packing_validation():
    with pytest.raises(ValueError):
        random_feature_experiment(0.5, np.array([[1.0, 0, 0], [1.0, 0.1, 0]]) / [[1], [np.hypot(1, 0.1)]], 0.1, 1, 0)
    with pytest.raises(ValueError):
        random_feature_experiment(0.5, np.array([[2.0, 0, 0]]), 0.1, 1, 0)


def test_feature_experiment_reproducible():
    thetas = sphere_packing(3, 0.5, 16, 0)
    a = random_feature_experiment(0.5, thetas, 0.1, 30, 9)
    b = random_feature_experiment(0.5, thetas, 0.1, 30, 9)
    assert a.rows == b.rows
    assert independence_run(thetas, np.random.default_rng(0)) >= math.ceil(math.log2(16))


small_classes = st.integers(1, 4).flatmap(lambda n_pts: st.lists(
    st.lists(st.integers(0, 1), min_size=n_pts, max_size=n_pts), min_size=1, max_size=6))


@settings(max_examples=60, deadline=None)
@given(small_classes)
def test_dimensions_ordered_and_witnessed(rows):
    space = Finite([{(x, 0): a for x, a in enumerate(row)} for row in rows], (0, 1))
    pts = [(x, 0) for x in range(len(rows[0]))]
    el, ls = eluder_dim_exact(space, pts), littlestone_dim_exact(space, pts)
    assert ls.value <= el.value
    assert el.witness.verify(space)
    assert ls.value == 0 or ls.witness.verify(space)
    # removing a policy cannot raise either dimension
    if len(rows) > 1:
        fewer = Finite([{(x, 0): a for x, a in enumerate(row)} for row in rows[1:]], (0, 1))
        assert eluder_dim_exact(fewer, pts).value <= el.value
        assert littlestone_dim_exact(fewer, pts).value <= ls.value
