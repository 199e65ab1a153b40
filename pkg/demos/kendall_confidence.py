"""A confidence bound for Kendall's tau from a random design.

The random-design deviation bound needs sigma_1^2 and alpha of the kernel.
For i.i.d. uniform pairs the analytic sigma_1^2 is known; alpha is not, so
the certified worst case is used.
"""
import math

import numpy as np

from incomplete_ustat import (bound_random_design_delta, estimate_incomplete, get_distribution,
                              get_kernel, profile, random_design)
from incomplete_ustat.bounds import random_design_supported

rng = np.random.default_rng(3)
kendall = get_kernel("kendall")
prof = profile(kendall, get_distribution("uniform2d"), rng=0, n_mc=20_000).certified()
print("sigma_1^2 =", round(prof.sigma1_sq, 4), f"({prof.provenance['sigma1_sq']})",
      " alpha =", round(prof.alpha, 3), f"({prof.provenance['alpha']})")

n = 2000
pts = rng.uniform(-1, 1, (n, 2))
for M in (n, 10 * n, n * n // 10):
    d = random_design(n, 2, M, seed=11)
    est = estimate_incomplete(kendall, pts, d)
    eps = bound_random_design_delta(n, 2, M, prof.sigma1_sq, prof.alpha, 0.025, 0.025)
    ok = "ok" if random_design_supported(n, M) else "M < ln^2 n"
    print(f"M={M:>7}: tau_hat={est.value:+.4f}  95% upper deviation {eps:.3f}  [{ok}]")

# the third term decays like 1/sqrt(M); the first two are the complete-statistic rate
L = math.log(1 / 0.025)
print("complete-statistic part:",
      round(math.sqrt(8 * prof.sigma1_sq * L / n) + (4 * prof.alpha + 8 / 3) * L / n, 3))
