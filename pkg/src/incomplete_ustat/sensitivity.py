"""Conditional variances and mixed-difference coefficients of a kernel.

``beta`` and ``gamma`` measure how strongly the kernel couples two of its
arguments: both are built from the mixed second difference

    K(y, z, ...) - K(y', z, ...) - K(y, z', ...) + K(y', z', ...)

with ``beta`` averaging its square over everything and ``gamma`` taking the
worst case over the first slot and the remaining arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import DEFAULT_ENUM_CAP, Distribution, EnumerationCapError, Kernel

__all__ = [
    "SensitivityProfile",
    "CERTIFIED",
    "WORST_BETA",
    "WORST_GAMMA",
    "WORST_ALPHA",
    "alpha",
    "sigma_k_sq",
    "beta_gamma",
    "worst_case_profile",
    "profile",
]

WORST_BETA = 8.0
WORST_GAMMA = 8.0
WORST_ALPHA = 2.0 + math.sqrt(8.0)

#: provenance tags whose values may be fed into a bound
CERTIFIED = frozenset({"analytic", "enumerated", "worst_case"})


def alpha(beta: float, gamma: float) -> float:
    if beta < 0 or gamma < 0:
        raise ValueError("beta and gamma must be nonnegative")
    return math.sqrt(beta / 2.0) + math.sqrt(gamma)


@dataclass(frozen=True)
class SensitivityProfile:
    """Kernel/distribution coefficients with the provenance of each value.

    ``provenance`` maps field names to ``analytic``, ``enumerated``,
    ``monte_carlo``, ``search`` or ``worst_case``; ``std_errors`` holds the
    Monte Carlo standard errors where applicable.
    """

    sigma1_sq: float
    sigma_m_sq: float
    beta: float
    gamma: float
    alpha: float
    sigma_k_sq: tuple | None = None
    provenance: dict = field(default_factory=dict)
    std_errors: dict = field(default_factory=dict)

    def is_certified(self, name: str = "gamma") -> bool:
        return self.provenance.get(name, "worst_case") in CERTIFIED

    def certified(self) -> "SensitivityProfile":
        """Replace estimated values by valid upper bounds.

        An uncertified ``gamma`` becomes 8; an uncertified ``beta`` becomes
        the (certified) ``gamma``, which dominates it; an uncertified
        ``sigma1_sq`` becomes ``sigma_m_sq`` if that is certified, else 1.
        """
        fields = ("sigma1_sq", "beta", "gamma")
        if all(self.is_certified(f) for f in fields):
            return self
        prov = dict(self.provenance)
        gamma, beta, s1 = self.gamma, self.beta, self.sigma1_sq
        if not self.is_certified("gamma"):
            gamma, prov["gamma"] = WORST_GAMMA, "worst_case"
        if not self.is_certified("beta"):
            beta, prov["beta"] = gamma, prov["gamma"]
        if not self.is_certified("sigma1_sq"):
            if self.is_certified("sigma_m_sq"):
                s1, prov["sigma1_sq"] = self.sigma_m_sq, prov.get("sigma_m_sq", "worst_case")
            else:
                s1, prov["sigma1_sq"] = 1.0, "worst_case"
        prov["alpha"] = prov["gamma"]
        return replace(self, sigma1_sq=s1, beta=beta, gamma=gamma,
                       alpha=alpha(beta, gamma), provenance=prov)

    def check(self, tol: float = 1e-9) -> list[str]:
        """Return the violated invariants (empty if none).

        Monte Carlo values are allowed four standard errors of slack.
        """
        se = self.std_errors
        s1_tol = tol + 4 * se.get("sigma1_sq", 0.0)
        sm_tol = tol + 4 * max((v for k, v in se.items() if k.startswith("sigma")), default=0.0)
        b_tol = tol + 4 * se.get("beta", 0.0)
        problems = []
        if not -s1_tol <= self.sigma1_sq <= self.sigma_m_sq + s1_tol + sm_tol:
            problems.append("0 <= sigma1^2 <= sigma_m^2")
        if self.sigma_m_sq > 1 + sm_tol:
            problems.append("sigma_m^2 <= 1")
        if self.sigma_k_sq is not None:
            s = np.asarray(self.sigma_k_sq)
            if np.any(np.diff(s) < -2 * sm_tol) or s[0] < -s1_tol:
                problems.append("sigma_k^2 nondecreasing in k")
        # a searched gamma is only a lower estimate, so beta may exceed it
        gamma_tol = math.inf if self.provenance.get("gamma") == "search" else tol
        if self.beta < -b_tol or self.beta > self.gamma + b_tol + gamma_tol:
            problems.append("0 <= beta <= gamma")
        if self.gamma > WORST_GAMMA + tol:
            problems.append("gamma <= 8")
        if abs(self.alpha - alpha(max(self.beta, 0), max(self.gamma, 0))) > tol:
            problems.append("alpha = sqrt(beta/2) + sqrt(gamma)")
        return problems

    def to_dict(self) -> dict:
        return {
            "sigma1_sq": self.sigma1_sq, "sigma_m_sq": self.sigma_m_sq,
            "sigma_k_sq": list(self.sigma_k_sq) if self.sigma_k_sq is not None else None,
            "beta": self.beta, "gamma": self.gamma, "alpha": self.alpha,
            "provenance": dict(self.provenance), "std_errors": dict(self.std_errors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensitivityProfile":
        beta, gamma = float(d["beta"]), float(d["gamma"])
        sk = d.get("sigma_k_sq")
        sigma1 = float(d.get("sigma1_sq", sk[0] if sk else 1.0))
        sigma_m = float(d.get("sigma_m_sq", sk[-1] if sk else 1.0))
        return cls(sigma1_sq=sigma1, sigma_m_sq=sigma_m, beta=beta, gamma=gamma,
                   alpha=float(d.get("alpha", alpha(beta, gamma))),
                   sigma_k_sq=tuple(sk) if sk else None,
                   provenance=dict(d.get("provenance", {})),
                   std_errors=dict(d.get("std_errors", {})))


def worst_case_profile(kernel: Kernel | int) -> SensitivityProfile:
    """Bounds valid for every kernel with values in ``[-1, 1]``."""
    m = kernel if isinstance(kernel, int) else kernel.degree
    if not isinstance(kernel, int) and not (-1 <= kernel.lo and kernel.hi <= 1):
        raise ValueError("worst-case constants need a kernel range inside [-1, 1]")
    prov = {k: "worst_case" for k in ("sigma1_sq", "sigma_m_sq", "sigma_k_sq",
                                       "beta", "gamma", "alpha")}
    return SensitivityProfile(sigma1_sq=1.0, sigma_m_sq=1.0, beta=WORST_BETA,
                              gamma=WORST_GAMMA, alpha=WORST_ALPHA,
                              sigma_k_sq=(1.0,) * m, provenance=prov)


# ---------------------------------------------------------------------------
# exact enumeration over a finite support


def _kernel_tensor(kernel: Kernel, dist: Distribution, cap: int) -> np.ndarray:
    """``T[i_1, ..., i_m] = K(a_{i_1}, ..., a_{i_m})`` over the support atoms."""
    s, m = dist.support_size, kernel.degree
    if s ** m > cap:
        raise EnumerationCapError(f"{s}^{m} kernel evaluations exceed the cap {cap}")
    grid = np.indices((s,) * m).reshape(m, -1).T
    return kernel.evaluate_batch(dist.atoms[grid]).reshape((s,) * m)


def _contract_last(t: np.ndarray, p: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        t = t @ p
    return t


def _weighted_var(g: np.ndarray, p: np.ndarray) -> float:
    w = p
    for _ in range(g.ndim - 1):
        w = np.multiply.outer(w, p)
    mean = float(np.sum(w * g))
    return max(float(np.sum(w * (g - mean) ** 2)), 0.0)


def _sigma_k_sq_exact(kernel, dist, k, cap):
    t = _kernel_tensor(kernel, dist, cap)
    return _weighted_var(_contract_last(t, dist.probs, kernel.degree - k), dist.probs)


def _mixed_sq_tensor(t: np.ndarray) -> np.ndarray:
    """``Q[a, a', b, b', rest] = (T[a,b] - T[a',b] - T[a,b'] + T[a',b'])^2``."""
    x = t[:, None, :, None] - t[None, :, :, None] - t[:, None, None, :] + t[None, :, None, :]
    return x * x


def _beta_gamma_exact(kernel, dist, cap):
    s, m = dist.support_size, kernel.degree
    if s ** (m + 2) > cap:
        raise EnumerationCapError(f"{s}^{m + 2} mixed differences exceed the cap {cap}")
    p = dist.probs
    q = _mixed_sq_tensor(_kernel_tensor(kernel, dist, cap))
    # average over the second slot pair (axes 2, 3) -> shape (s, s, rest...)
    inner = np.tensordot(np.tensordot(q, p, axes=([2], [0])), p, axes=([2], [0]))
    gamma = float(inner.max())
    beta = _contract_last(inner, p, m - 2)
    beta = float(p @ beta @ p)
    return beta, gamma


# ---------------------------------------------------------------------------
# Monte Carlo


def _sigma_k_sq_mc(kernel, dist, k, rng, n_outer, n_inner):
    m, d = kernel.degree, dist.dim
    if k == m:
        vals = kernel.evaluate_batch(dist.sample(rng, n_outer * m).reshape(n_outer, m, d))
        var = float(np.var(vals, ddof=1))
        se = float(np.std((vals - vals.mean()) ** 2, ddof=1) / math.sqrt(n_outer))
        return var, se
    head = dist.sample(rng, n_outer * k).reshape(n_outer, 1, k, d)
    tail = dist.sample(rng, n_outer * n_inner * (m - k)).reshape(n_outer, n_inner, m - k, d)
    args = np.concatenate([np.broadcast_to(head, (n_outer, n_inner, k, d)), tail], axis=2)
    vals = kernel.evaluate_batch(args)
    means = vals.mean(axis=1)
    within = vals.var(axis=1, ddof=1)
    dev = (means - means.mean()) ** 2 * n_outer / (n_outer - 1) - within / n_inner
    est = float(dev.mean())
    return max(est, 0.0), float(dev.std(ddof=1) / math.sqrt(n_outer))


def _mixed_sq_samples(kernel, y, y2, z, z2, rest):
    """Squared mixed differences for batches of slot-1 pair, slot-2 pair and rest."""
    def k(a, b):
        return kernel.evaluate_batch(np.concatenate([a, b, rest], axis=-2))
    diff = k(y, z) - k(y2, z) - k(y, z2) + k(y2, z2)
    return diff * diff


def _beta_mc(kernel, dist, rng, n):
    m, d = kernel.degree, dist.dim
    draw = dist.sample(rng, n * (m + 2)).reshape(n, m + 2, d)
    sq = _mixed_sq_samples(kernel, draw[:, 0:1], draw[:, 1:2], draw[:, 2:3], draw[:, 3:4],
                           draw[:, 4:])
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n))


def _gamma_search(kernel, dist, rng, n_candidates, n_inner):
    """Largest inner mean over sampled candidates: a lower estimate of gamma."""
    m, d = kernel.degree, dist.dim
    cand = dist.sample(rng, n_candidates * m).reshape(n_candidates, 1, m, d)
    if not dist.finite:
        # push half the candidates to the corners of the box
        corner = np.where(rng.random(cand.shape) < 0.5, dist.low, dist.high)
        cand[: n_candidates // 2] = corner[: n_candidates // 2]
    z = dist.sample(rng, n_inner * 2).reshape(1, n_inner, 2, d)
    shape = (n_candidates, n_inner)
    sq = _mixed_sq_samples(
        kernel,
        np.broadcast_to(cand[:, :, 0:1], shape + (1, d)),
        np.broadcast_to(cand[:, :, 1:2], shape + (1, d)),
        np.broadcast_to(z[:, :, 0:1], shape + (1, d)),
        np.broadcast_to(z[:, :, 1:2], shape + (1, d)),
        np.broadcast_to(cand[:, :, 2:], shape + (m - 2, d)))
    return float(sq.mean(axis=1).max())


# ---------------------------------------------------------------------------
# public operations


def _check_k(kernel, k):
    if not 1 <= k <= kernel.degree:
        raise ValueError(f"k must lie in 1..{kernel.degree}, got {k}")


def sigma_k_sq(kernel: Kernel, dist: Distribution, k: int, *, method: str = "auto",
               rng=None, n_outer: int = 2000, n_inner: int = 2000,
               cap: int = DEFAULT_ENUM_CAP) -> tuple[float, str, float]:
    """``Var[E[K(X_1..X_m) | X_1..X_k]]`` as ``(value, provenance, std_error)``.

    ``method`` is ``auto`` (analytic, then enumeration, then Monte Carlo),
    ``exact`` or ``mc``. The Monte Carlo estimator is nested (``n_outer``
    conditioning draws, ``n_inner`` completions each) with the within-group
    bias subtracted.
    """
    _check_k(kernel, k)
    info = kernel.analytic_for(dist.name)
    if method == "auto" and "sigma_k_sq" in info:
        return float(info["sigma_k_sq"][k - 1]), "analytic", 0.0
    if method in ("auto", "exact") and dist.finite:
        try:
            return _sigma_k_sq_exact(kernel, dist, k, cap), "enumerated", 0.0
        except EnumerationCapError:
            if method == "exact":
                raise
    elif method == "exact":
        raise EnumerationCapError(f"{dist.name!r} has continuous support; use method='mc'")
    rng = np.random.default_rng(rng)
    v, se = _sigma_k_sq_mc(kernel, dist, k, rng, n_outer, n_inner)
    return v, "monte_carlo", se


def beta_gamma(kernel: Kernel, dist: Distribution, *, method: str = "auto", rng=None,
               n_mc: int = 200_000, n_candidates: int = 400, n_inner: int = 2000,
               cap: int = DEFAULT_ENUM_CAP):
    """``(beta, gamma, provenance)`` where provenance is a dict for both.

    Over a finite support both are exact (the supremum in ``gamma`` runs over
    the support atoms). Otherwise ``beta`` is a Monte Carlo mean and ``gamma``
    a candidate-search lower estimate tagged ``search``; use
    :meth:`SensitivityProfile.certified` before feeding it into a bound.
    Degree-1 kernels have no mixed differences; both are 0.
    """
    if kernel.degree < 2:
        return 0.0, 0.0, {"beta": "analytic", "gamma": "analytic"}
    info = kernel.analytic_for(dist.name)
    if method == "auto" and "beta" in info and "gamma" in info:
        return float(info["beta"]), float(info["gamma"]), {"beta": "analytic",
                                                           "gamma": "analytic"}
    if method in ("auto", "exact") and dist.finite:
        try:
            b, g = _beta_gamma_exact(kernel, dist, cap)
            return b, g, {"beta": "enumerated", "gamma": "enumerated"}
        except EnumerationCapError:
            if method == "exact":
                raise
    elif method == "exact":
        raise EnumerationCapError(f"{dist.name!r} has continuous support; use method='mc'")
    rng = np.random.default_rng(rng)
    b, se = _beta_mc(kernel, dist, rng, n_mc)
    g = _gamma_search(kernel, dist, rng, n_candidates, n_inner)
    return b, g, {"beta": "monte_carlo", "gamma": "search", "beta_se": se}


def profile(kernel: Kernel, dist: Distribution, *, method: str = "auto", rng=None,
            n_mc: int = 200_000, n_outer: int = 2000, n_inner: int = 2000,
            cap: int = DEFAULT_ENUM_CAP) -> SensitivityProfile:
    """All coefficients for ``kernel`` under i.i.d. ``dist`` sampling."""
    if kernel.dim != dist.dim:
        raise ValueError(f"kernel {kernel.name!r} takes {kernel.dim}-d points, "
                         f"distribution {dist.name!r} is {dist.dim}-d")
    rng = np.random.default_rng(rng)
    prov, ses, sks = {}, {}, []
    for k in range(1, kernel.degree + 1):
        v, tag, se = sigma_k_sq(kernel, dist, k, method=method, rng=rng,
                                n_outer=n_outer, n_inner=n_inner, cap=cap)
        sks.append(v)
        if se:
            ses[f"sigma{k}_sq"] = se
        prov[f"sigma{k}_sq"] = tag
    b, g, bg_prov = beta_gamma(kernel, dist, method=method, rng=rng, n_mc=n_mc, cap=cap)
    if "beta_se" in bg_prov:
        ses["beta"] = bg_prov.pop("beta_se")
    prov.update(bg_prov)
    prov["sigma_m_sq"] = prov[f"sigma{kernel.degree}_sq"]
    prov["alpha"] = next((prov[f] for f in ("gamma", "beta") if prov[f] not in CERTIFIED),
                         prov["gamma"])
    return SensitivityProfile(sigma1_sq=sks[0], sigma_m_sq=sks[-1], beta=b, gamma=g,
                              alpha=alpha(b, g), sigma_k_sq=tuple(sks), provenance=prov,
                              std_errors=ses)
