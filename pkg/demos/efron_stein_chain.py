"""The variance chain sum Var E[f|X_k] <= Var f <= ES(f) <= sum Var E[f|X_k] + H/4.

Computed exactly for an incomplete U-statistic on 8 Rademacher variables by
enumerating all 256 data vectors.
"""
from incomplete_ustat import (complete_design, get_distribution, get_kernel, partition_design,
                              random_design)
from incomplete_ustat.estimator import exact_UW_values
from incomplete_ustat.experiments import efron_stein_quantities

rad = get_distribution("rademacher")
n = 8
for name in ("mean", "product"):
    k = get_kernel(name)
    designs = [complete_design(n, k.degree), partition_design(n, k.degree),
               random_design(n, k.degree, 6, seed=1)]
    for d in designs:
        vals, _, _ = exact_UW_values(k, rad, d)
        q = efron_stein_quantities(vals, rad.probs, n)
        print(f"{name:8s} {d.tag:18s} {q['sum_cond_var']:.5f} <= {q['var']:.5f} <= "
              f"{q['es']:.5f} <= {q['sum_cond_var'] + q['H'] / 4:.5f}")
# for the degree-1 kernel U_W is a sum of independent terms and H = 0
