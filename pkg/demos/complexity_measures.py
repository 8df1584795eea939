"""
Measuring policy classes
========================

Eluder and Littlestone dimensions of small classes, computed exactly by search,
next to the closed-form values and bounds they are compared with.
"""

import numpy as np

from eluder_rl.complexity import (degree_family, eluder_dim_exact, fourier_dim_check, gf2_full_space,
                                  littlestone_dim_exact, random_feature_experiment, sphere_packing,
                                  threshold_shatter_witness, threshold_witness_parameter)
from eluder_rl.policy import Finite

# linear policies over GF(2): both dimensions equal the ambient dimension
for D in (1, 2, 3):
    space = gf2_full_space(D)
    pairs = list(space.features)
    print(f"GF(2)^{D}: eluder {eluder_dim_exact(space, pairs).value},"
          f" littlestone {littlestone_dim_exact(space, pairs).value}")

# thresholds on four ordered points: shallow trees, but not deep ones
thresholds = Finite([{(x, 0): int(x >= k) for x in range(1, 5)} for k in range(1, 6)])
pairs = [(x, 0) for x in range(1, 5)]
print("\nthresholds on 4 points: eluder", eluder_dim_exact(thresholds, pairs).value,
      "littlestone", littlestone_dim_exact(thresholds, pairs).value)

# over the reals a threshold class shatters a tree of any depth by bisection
steps = threshold_shatter_witness(5, [1, 0, 1, 1, 0])
print("bisection path intervals:", [tuple(map(str, st.interval)) for st in steps])
print("parameter realizing that path:", threshold_witness_parameter(steps))

# degree-one Boolean functions: eluder dimension against the support size
print()
for D in (2, 3, 4):
    result, bound = fourier_dim_check(D, degree_family(D, 1))
    print(f"Fourier D={D}, degree <= 1: eluder {result.value}, support size {bound}")

# random Gaussian features against a packing of the sphere
thetas = sphere_packing(3, 0.5, 16, np.random.default_rng(0))
report = random_feature_experiment(0.5, thetas, 0.1, 500, 1)
lengths = np.array(report.lengths)
print(f"\nindependent runs: mean {lengths.mean():.2f}, max {lengths.max()},"
      f" bound {report.bound:.1f}, exceeded in {report.exceed_fraction:.1%} of trials")
