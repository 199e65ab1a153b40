"""How much accuracy is lost by evaluating the kernel on fewer subsets?

Gini mean difference of 200 uniform points: the complete statistic needs
C(200, 2) = 19900 kernel evaluations. Random designs use far fewer.
"""
import math

import numpy as np

from incomplete_ustat import (complete_design, design_stats, estimate_complete,
                              estimate_incomplete, get_kernel, random_design)

rng = np.random.default_rng(7)
n = 200
x = rng.uniform(-1, 1, n)
gini = get_kernel("gini")

full = estimate_complete(gini, x)
print(f"complete: {full.natural_value:.5f} from {full.eval_count} evaluations")
print(f"true mean |X - X'| for U[-1, 1]: {2 / 3:.5f}")

st = design_stats(complete_design(n, 2))
print(f"complete design  A={st.a:.4f}  B={st.b:.6f}  C={st.c:.4f}\n")

# A, B and C shrink towards the complete-design values as M grows
print(f"{'M':>7} {'estimate':>9} {'|diff|':>9} {'A':>7} {'B':>9} {'C':>7}")
for M in (n, int(n * math.log(n)), int(n ** 1.5), n * n // 4):
    d = random_design(n, 2, M, seed=int(rng.integers(2 ** 31)))
    est = estimate_incomplete(gini, x, d)
    s = design_stats(d)
    print(f"{M:>7} {est.natural_value:9.5f} {abs(est.value - full.value):9.5f} "
          f"{s.a:7.4f} {s.b:9.6f} {s.c:7.4f}")

# spread of the estimate over fresh designs at a fixed budget
M = 2000
vals = [estimate_incomplete(gini, x, random_design(n, 2, M, seed=s)).value for s in range(200)]
print(f"\nM={M}: design-to-design sd {np.std(vals):.5f}, mean {np.mean(vals) + 1:.5f}")
