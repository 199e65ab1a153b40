import itertools
import math

import numpy as np
import pytest

from incomplete_ustat.kernels import (EnumerationCapError, average_kernel, builtin_distributions,
                                      builtin_registry, constant_kernel, get_distribution,
                                      get_kernel)
from incomplete_ustat.sensitivity import (SensitivityProfile, alpha, beta_gamma, profile,
                                          sigma_k_sq, worst_case_profile)

RAD = get_distribution("rademacher")


def _mixed_oracle(kernel, dist):
    """Brute-force beta and gamma over the support atoms with plain loops."""
    atoms = [tuple(a) if kernel.dim > 1 else a[0] for a in dist.atoms]
    probs = list(dist.probs)
    idx = range(len(atoms))
    m = kernel.degree

    def mixed(a, a2, b, b2, rest):
        def k(x, y):
            return kernel(x, y, *rest)
        return k(a, b) - k(a2, b) - k(a, b2) + k(a2, b2)

    beta, gamma = 0.0, 0.0
    for rest_ix in itertools.product(idx, repeat=m - 2):
        rest = [atoms[i] for i in rest_ix]
        p_rest = math.prod(probs[i] for i in rest_ix)
        for i, i2 in itertools.product(idx, repeat=2):
            inner = sum(probs[j] * probs[j2] * mixed(atoms[i], atoms[i2], atoms[j], atoms[j2],
                                                     rest) ** 2
                        for j, j2 in itertools.product(idx, repeat=2))
            beta += p_rest * probs[i] * probs[i2] * inner
            gamma = max(gamma, inner)
    return beta, gamma


def _conditional_variance_oracle(kernel, dist, k):
    atoms = [tuple(a) if kernel.dim > 1 else a[0] for a in dist.atoms]
    probs = list(dist.probs)
    m = kernel.degree
    cond = []
    for head in itertools.product(range(len(atoms)), repeat=k):
        ph = math.prod(probs[i] for i in head)
        val = sum(math.prod(probs[i] for i in tail) *
                  kernel(*[atoms[i] for i in head + tail])
                  for tail in itertools.product(range(len(atoms)), repeat=m - k))
        cond.append((ph, val))
    mean = sum(p * v for p, v in cond)
    return sum(p * (v - mean) ** 2 for p, v in cond)


def _finite_pairs():
    for kernel in builtin_registry():
        for dist in builtin_distributions():
            if dist.finite and dist.dim == kernel.dim and dist.support_size ** kernel.degree <= 125:
                yield kernel, dist


def test_sigma_examples_product_rademacher():
    k = get_kernel("product")
    assert sigma_k_sq(k, RAD, 1) == (0.0, "enumerated", 0.0)
    assert sigma_k_sq(k, RAD, 2) == (1.0, "enumerated", 0.0)
    for j in (1, 2):
        assert sigma_k_sq(constant_kernel(0.4), RAD, j)[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        sigma_k_sq(k, RAD, 3)
    with pytest.raises(EnumerationCapError):
        sigma_k_sq(k, get_distribution("uniform"), 1, method="exact")


def test_beta_gamma_examples():
    assert beta_gamma(get_kernel("product"), RAD)[:2] == (4.0, 8.0)
    b, g, _ = beta_gamma(constant_kernel(0.4), RAD)
    assert (b, g) == (0.0, 0.0)
    assert beta_gamma(get_kernel("mean"), RAD)[:2] == (0.0, 0.0)


def test_alpha_examples():
    assert alpha(0, 0) == 0
    assert alpha(8, 8) == pytest.approx(2 + math.sqrt(8)) and alpha(8, 8) <= 5
    assert alpha(4, 8) == pytest.approx(3 * math.sqrt(2))
    with pytest.raises(ValueError):
        alpha(-1, 0)


def test_worst_case_profile():
    for kernel in (get_kernel("product"), get_kernel("gini01"), get_kernel("gini3")):
        p = worst_case_profile(kernel)
        assert (p.sigma1_sq, p.beta, p.gamma) == (1.0, 8.0, 8.0)
        assert p.alpha == pytest.approx(2 + math.sqrt(8))
        assert set(p.provenance.values()) == {"worst_case"}
        assert p.check() == []


@pytest.mark.parametrize("kernel,dist", list(_finite_pairs()),
                         ids=lambda v: getattr(v, "name", str(v)))
def test_enumeration_matches_loop_oracle(kernel, dist):
    b, g, prov = beta_gamma(kernel, dist, method="exact")
    if kernel.degree >= 2:
        ob, og = _mixed_oracle(kernel, dist)
        assert b == pytest.approx(ob, abs=1e-12)
        assert g == pytest.approx(og, abs=1e-12)
    for k in range(1, kernel.degree + 1):
        v, tag, _ = sigma_k_sq(kernel, dist, k, method="exact")
        assert tag == "enumerated"
        assert v == pytest.approx(_conditional_variance_oracle(kernel, dist, k), abs=1e-12)


@pytest.mark.parametrize("kernel,dist", list(_finite_pairs()),
                         ids=lambda v: getattr(v, "name", str(v)))
def test_profile_invariants_by_enumeration(kernel, dist):
    p = profile(kernel, dist, method="exact")
    assert p.check() == []
    assert 0 <= p.beta <= p.gamma <= 8 + 1e-12
    assert p.alpha <= 2 + math.sqrt(8) + 1e-12
    s = np.array(p.sigma_k_sq)
    assert np.all(np.diff(s) >= -1e-12)


def test_sum_of_singletons_sigma1():
    for m in (1, 2, 3, 4):
        assert sigma_k_sq(average_kernel(m), RAD, 1)[0] == pytest.approx(1 / m ** 2, abs=1e-15)


def test_enumerated_beta_agrees_with_monte_carlo():
    k = get_kernel("product")
    exact, _, _ = beta_gamma(k, RAD)
    mc, _, prov = beta_gamma(k, RAD, method="mc", rng=4, n_mc=100_000)
    assert prov["beta"] == "monte_carlo" and prov["gamma"] == "search"
    se = profile(k, RAD, method="mc", rng=4, n_mc=100_000).std_errors["beta"]
    assert abs(mc - exact) <= 4 * se


@pytest.mark.parametrize("name,dist", [("product", "uniform"), ("variance", "uniform"),
                                       ("gini", "uniform"), ("gini3", "uniform"),
                                       ("product3", "uniform"), ("average3", "uniform"),
                                       ("kendall", "uniform2d")])
def test_analytic_values_agree_with_monte_carlo(name, dist):
    k, d = get_kernel(name), get_distribution(dist)
    info = k.analytic_for(dist)
    mc = profile(k, d, method="mc", rng=11, n_outer=3000, n_inner=3000, n_mc=400_000)
    for j, v in enumerate(info["sigma_k_sq"], start=1):
        se = mc.std_errors.get(f"sigma{j}_sq", 0.0)
        assert abs(mc.sigma_k_sq[j - 1] - v) <= 4 * se + 1e-9, (j, mc.sigma_k_sq[j - 1], v)
    if "beta" in info:
        assert abs(mc.beta - info["beta"]) <= 4 * mc.std_errors.get("beta", 0.0) + 1e-9
        # the search only explores a finite set of candidates
        assert mc.gamma <= 1.1 * info["gamma"] + 1e-9
        assert info["beta"] <= info["gamma"] <= 8


def test_analytic_values_survive_unit_rescaling():
    k = get_kernel("gini01")
    info = k.analytic_for("uniform")
    assert info["theta"] == pytest.approx(1 / 3)
    assert info["beta"] == pytest.approx(32 / 45 / 4)


def test_certified_replaces_estimates():
    k = get_kernel("kendall")
    p = profile(k, get_distribution("uniform2d"), rng=0, n_mc=20_000)
    assert p.provenance["gamma"] == "search"
    c = p.certified()
    assert c.gamma == 8 and c.provenance["gamma"] == "worst_case"
    assert c.beta == 8 and c.alpha == pytest.approx(2 + math.sqrt(8))
    assert c.sigma1_sq == pytest.approx(1 / 9)  # analytic value kept
    exact = profile(get_kernel("product"), RAD)
    assert exact.certified() is exact


def test_profile_roundtrip_and_check():
    p = profile(get_kernel("gini"), get_distribution("grid5"))
    q = SensitivityProfile.from_dict(p.to_dict())
    assert q == p
    bad = SensitivityProfile(0.5, 0.2, 9.0, 8.5, 1.0)
    assert len(bad.check()) >= 3
