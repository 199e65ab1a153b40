import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from incomplete_ustat.bounds import (ClosedStats, bound_complete_tail, bound_incomplete_delta,
                                     bound_incomplete_tail, variance_complete)
from incomplete_ustat.designs import abc, design_stats, expected_stats, random_design
from incomplete_ustat.estimator import estimate_incomplete, exact_distribution_of_UW, exact_theta
from incomplete_ustat.kernels import get_distribution, get_kernel
from incomplete_ustat.sensitivity import SensitivityProfile, alpha

SETTINGS = settings(max_examples=60, deadline=None)


@st.composite
def nmM(draw, max_n=30, max_M=200):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(1, min(n - 1, 5)))
    M = draw(st.integers(1, max_M))
    return n, m, M


@st.composite
def profiles(draw):
    g = draw(st.floats(0, 8))
    b = draw(st.floats(0, 1)) * g
    s1 = draw(st.floats(0, 1))
    return SensitivityProfile(s1, max(s1, draw(st.floats(0, 1))), b, g, alpha(b, g),
                              provenance={"gamma": "enumerated"})


@SETTINGS
@given(nmM(), st.integers(0, 2 ** 32 - 1))
def test_design_count_identities(params, seed):
    n, m, M = params
    d = random_design(n, m, M, seed)
    s = design_stats(d)
    assert int(s.r.sum()) == m * M
    assert 2 * sum(s.r_pair.values()) == m * (m - 1) * M
    assert s.a_num * n >= m * m * M * M  # A >= m^2/n, exactly in integers
    assert int(s.r.max()) * n >= m * M  # C >= m/n
    assert abc(d.indices, n) == (s.a, s.b, s.c)


@SETTINGS
@given(nmM())
def test_expected_stats_below_simple_upper_bounds(params):
    n, m, M = params
    ex = expected_stats(n, m, M)
    assert ex.a_exact <= ex.a_upper * (1 + 1e-12)
    assert ex.b_exact <= ex.b_upper * (1 + 1e-12)


@SETTINGS
@given(st.integers(3, 40), st.integers(1, 500), st.integers(0, 10 ** 6),
       st.sampled_from(["product", "gini", "gini3", "variance", "product3"]))
def test_estimator_permutation_and_thread_invariance(n, M, seed, name):
    k = get_kernel(name)
    if k.degree >= n:
        return
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 1))
    d = random_design(n, k.degree, M, seed)
    base = estimate_incomplete(k, x, d).value
    perm = rng.permutation(n)
    x_perm = np.empty_like(x)
    x_perm[perm] = x
    assert estimate_incomplete(k, x_perm, d.relabel(perm)).value == base
    assert estimate_incomplete(k, x, d, threads=3, chunk=16).value == base
    assert k.lo <= base <= k.hi


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 7), st.integers(1, 6), st.integers(0, 10 ** 6),
       st.sampled_from(["rademacher", "skewed3"]), st.sampled_from(["product", "product3"]))
def test_exact_distribution_unbiased(n, M, seed, dist, name):
    k, d = get_kernel(name), get_distribution(dist)
    if k.degree >= n:
        return
    pmf = exact_distribution_of_UW(k, d, random_design(n, k.degree, M, seed))
    assert abs(math.fsum(p for _, p in pmf) - 1) <= 1e-12
    assert abs(math.fsum(v * p for v, p in pmf) - exact_theta(k, d)) <= 1e-12


@SETTINGS
@given(profiles(), st.floats(0.01, 3), st.floats(0, 3), st.floats(0.001, 1),
       st.floats(1e-4, 1), st.floats(1e-4, 1))
def test_incomplete_tail_monotone_and_bounded(p, a, b, c, t1, t2):
    s = ClosedStats(a, b, c)
    lo, hi = sorted((t1, t2))
    v_lo, v_hi = bound_incomplete_tail(s, p, lo), bound_incomplete_tail(s, p, hi)
    assert 0 <= v_hi <= v_lo <= 1


@SETTINGS
@given(profiles(), st.floats(0.01, 3), st.floats(0, 3), st.floats(0.001, 1),
       st.floats(1e-8, math.exp(-1)))
def test_delta_form_relaxes_tail_form(p, a, b, c, delta):
    s = ClosedStats(a, b, c)
    eps = bound_incomplete_delta(s, p, delta)
    if eps > 0:
        assert bound_incomplete_tail(s, p, eps) <= delta * (1 + 1e-9)


@SETTINGS
@given(profiles(), st.integers(2, 10 ** 6), st.integers(1, 8), st.floats(1e-4, 1))
def test_complete_bound_in_unit_interval(p, n, m, t):
    if m >= n:
        return
    assert 0 <= bound_complete_tail(n, m, p, t) <= 1


@SETTINGS
@given(st.integers(2, 60), st.integers(1, 6), st.lists(st.floats(0, 1), min_size=6,
                                                      max_size=6))
def test_variance_formula_bounds(n, m, raw):
    if m >= n:
        return
    sk = sorted(raw[:m])
    v = variance_complete(n, m, sk)
    # the complete statistic is never worse than one kernel evaluation
    assert -1e-15 <= v <= sk[-1] + 1e-12
