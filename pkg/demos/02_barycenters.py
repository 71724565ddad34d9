"""
Averaging time series under soft-DTW
====================================

A soft-DTW barycenter minimizes the weighted sum of soft-DTW discrepancies
to a set of series. With a smooth objective, L-BFGS can be used directly.
The two classical DTW averaging methods (DBA and subgradient descent) work
with the non-smooth gamma = 0 objective instead.
"""

import numpy as np

from softdtw.barycenter import (
    BarycenterProblem,
    OptimizerConfig,
    compute_barycenter,
    dtw_loss,
    init_euclidean_mean,
    init_random,
    soft_barycenter,
)
from softdtw.core import dtw
from softdtw.synthetic import bump, bump_family

rng = np.random.default_rng(7)
series = bump_family(rng, n_series=10, length=60, max_shift=7.5, noise=0.2)
problem = BarycenterProblem(series)
init = init_random(problem, seed=0)
config = OptimizerConfig(max_iterations=100)

# Every method is scored with the same yardstick: the DTW (gamma = 0) loss.
print(f"{'method':<22}{'DTW loss':>10}")
print(f"{'random init':<22}{dtw_loss(init, problem):>10.4f}")
for method, gamma in (("dba", 0.0), ("subgradient", 0.0), ("soft", 1.0), ("soft", 0.1), ("soft", 0.01)):
    result = compute_barycenter(problem, method, gamma, init, config)
    label = method if method != "soft" else f"soft, gamma={gamma}"
    print(f"{label:<22}{dtw_loss(result.barycenter, problem):>10.4f}")

# Weights move the barycenter between its inputs. With two shapes, the
# barycenter lands closer (in DTW) to whichever series carries more weight.
a = (bump(30, 8, 2.0, 2.0) + bump(30, 22, 2.0, 2.0))[np.newaxis]
b = bump(30, 15, 3.0, 3.0)[np.newaxis]
print(f"\n{'weight on a':<12}{'DTW to a':>10}{'DTW to b':>10}")
for w in (0.1, 0.25, 0.5, 0.75, 0.9):
    pair = BarycenterProblem([a, b], weights=[w, 1 - w])
    x = soft_barycenter(pair, 1.0, init_euclidean_mean(pair)).barycenter
    print(f"{w:<12}{dtw(x, a):>10.3f}{dtw(x, b):>10.3f}")
