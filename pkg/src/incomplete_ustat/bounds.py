"""Bernstein-type tail bounds for complete and incomplete U-statistics.

Tail forms return an upper bound on ``P(U - theta > t)`` (clamped to
``[0, 1]``); delta forms return a deviation ``eps`` with
``P(U - theta > eps) <= delta``. Exponents are formed in log space, and a
vanishing denominator with ``t > 0`` yields probability 0 (the limit of the
formula).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .designs import DesignStats, complete_stats
from .sensitivity import WORST_BETA, WORST_GAMMA, SensitivityProfile

__all__ = [
    "BoundError",
    "BoundReport",
    "ClosedStats",
    "variance_complete",
    "bound_hoeffding_tail",
    "bound_arcones_tail",
    "bound_variance_bernstein_tail",
    "bound_incomplete_tail",
    "bound_incomplete_delta",
    "bound_complete_tail",
    "bound_complete_delta",
    "bound_random_design_delta",
    "random_design_supported",
    "bound_subgauss_lower_tail",
    "bound_subgauss_sqrt",
    "check_unit_range",
    "dominance_check_vs_arcones",
    "DEFAULT_DOMINANCE_GRID",
    "log_tail",
]


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class ClosedStats:
    """The scalars A, B, C of a design, without the counts."""

    a: float
    b: float
    c: float


@dataclass
class BoundReport:
    """A named bound evaluated at given inputs.

    ``form`` is ``tail`` (``value`` is a probability) or ``delta`` (``value``
    is a deviation). ``flags`` records side conditions of the bound, e.g.
    ``{"n_divisible_by_m": False}``.
    """

    bound_name: str
    form: str
    value: float
    inputs: dict
    flags: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        return {"bound": self.bound_name, "form": self.form, "value": self.value,
                "inputs": self.inputs, "flags": self.flags, "valid": self.valid}


# ---------------------------------------------------------------------------
# helpers


def log_tail(t: float, denom: float, log_lead: float = 0.0) -> float:
    """``log_lead - t^2 / denom`` with the ``denom == 0`` limit."""
    if t <= 0:
        raise BoundError(f"t must be positive, got {t}")
    if denom < 0:
        raise BoundError(f"negative variance proxy {denom}")
    if denom == 0:
        return -math.inf
    return log_lead - t * t / denom


def _prob(logp: float) -> float:
    if logp >= 0:
        return 1.0
    return math.exp(logp)


def _log_inv(delta: float) -> float:
    if not 0 < delta < 1:
        raise BoundError(f"delta must lie in (0, 1), got {delta}")
    return math.log(1.0 / delta)


def _stats(stats) -> ClosedStats:
    if isinstance(stats, (DesignStats, ClosedStats)):
        return ClosedStats(stats.a, stats.b, stats.c)
    a, b, c = stats
    return ClosedStats(float(a), float(b), float(c))


def _require_certified(profile: SensitivityProfile):
    if not profile.is_certified("gamma"):
        raise BoundError(
            f"gamma has provenance {profile.provenance.get('gamma')!r}, which may "
            "underestimate it; call profile.certified() to fall back on gamma = 8")


# ---------------------------------------------------------------------------
# classical results


def variance_complete(n: int, m: int, sigma_k_sq: Iterable[float]) -> float:
    """Exact variance of the complete U-statistic from the conditional variances.

    ``Var U = C(n,m)^-1 * sum_k C(m,k) C(n-m, m-k) sigma_k^2``.
    """
    s = [float(v) for v in sigma_k_sq]
    if len(s) != m:
        raise BoundError(f"need {m} conditional variances, got {len(s)}")
    if not 1 <= m < n:
        raise BoundError(f"need 1 <= m < n, got n={n}, m={m}")
    total = math.comb(n, m)
    return math.fsum(math.comb(m, k) * math.comb(n - m, m - k) * s[k - 1]
                     for k in range(1, m + 1)) / total


def _hoeffding_log(n, m, sigma_m_sq, t):
    return log_tail(t, (2 * m * sigma_m_sq + 4 * m * t / 3) / n)


def bound_hoeffding_tail(n: int, m: int, sigma_m_sq: float, t: float) -> float:
    """Hoeffding's bound, stated for ``m | n``; see :func:`report` for the flag."""
    return _prob(_hoeffding_log(n, m, sigma_m_sq, t))


def _arcones_log(n, m, sigma1_sq, t):
    scale = 2.0 ** (m + 2) * float(m) ** m + 2.0 / (3.0 * m)
    return log_tail(t, (2 * m * m * sigma1_sq + scale * t) / n, math.log(2.0))


def bound_arcones_tail(n: int, m: int, sigma1_sq: float, t: float) -> float:
    """Arcones' bound (leading factor 2 included), clamped to 1."""
    return _prob(_arcones_log(n, m, sigma1_sq, t))


def bound_variance_bernstein_tail(n: int, m: int, var_u: float, t: float) -> float:
    """Bernstein-type tail driven by the exact variance ``var_u`` of the complete statistic."""
    if var_u < 0:
        raise BoundError("variance must be nonnegative")
    denom = 2 * var_u + 8 * m * m / n ** 2 + 4 * (m * m + m / 3) * t / n
    return _prob(log_tail(t, denom))


# ---------------------------------------------------------------------------
# incomplete statistics


def _incomplete_log(st: ClosedStats, p: SensitivityProfile, t: float) -> float:
    denom = (2 * st.a * p.sigma1_sq + st.b * p.beta / 2
             + (math.sqrt(st.b * p.gamma) + 4 * st.c / 3) * t)
    return log_tail(t, denom)


def bound_incomplete_tail(stats, profile: SensitivityProfile, t: float) -> float:
    """Tail bound for a fixed design with scalars ``stats = (A, B, C)``."""
    _require_certified(profile)
    return _prob(_incomplete_log(_stats(stats), profile, t))


def bound_incomplete_delta(stats, profile: SensitivityProfile, delta: float) -> float:
    """Deviation holding with probability ``1 - delta`` (needs ``delta <= 1/e``)."""
    _require_certified(profile)
    if not 0 < delta <= math.exp(-1):
        raise BoundError(
            f"delta = {delta} > 1/e: the deviation form relies on sqrt(ln(1/delta)) "
            "<= ln(1/delta); use the tail form instead")
    st = _stats(stats)
    L = math.log(1.0 / delta)
    return math.sqrt(2 * st.a * profile.sigma1_sq * L) + (
        profile.alpha * math.sqrt(st.b) + 4 * st.c / 3) * L


def _complete_closed(n: int, m: int, relaxed: bool) -> ClosedStats:
    a, b, c = complete_stats(n, m)
    if relaxed:
        b = m ** 4 / n ** 2
    return ClosedStats(a, b, c)


def bound_complete_tail(n: int, m: int, profile: SensitivityProfile, t: float,
                        relaxed: bool = False) -> float:
    """Tail bound for the complete statistic.

    Uses the exact ``B = m^2 (m-1)^2 / (n (n-1))`` unless ``relaxed``, which
    substitutes the simpler upper bound ``m^4 / n^2``.
    """
    return bound_incomplete_tail(_complete_closed(n, m, relaxed), profile, t)


def bound_complete_delta(n: int, m: int, profile: SensitivityProfile, delta: float,
                         relaxed: bool = False) -> float:
    return bound_incomplete_delta(_complete_closed(n, m, relaxed), profile, delta)


def random_design_supported(n: int, M: int) -> bool:
    return M >= math.log(n) ** 2


def bound_random_design_delta(n: int, m: int, M: int, sigma1_sq: float, alpha: float,
                              delta1: float, delta2: float) -> float:
    """Deviation for a design of ``M`` uniform subsets drawn with replacement.

    Holds with probability ``1 - delta1 - delta2`` jointly over data and
    design when ``M >= ln(n)^2`` (check :func:`random_design_supported`).
    """
    if delta1 <= 0 or delta2 <= 0:
        raise BoundError("delta1 and delta2 must be positive")
    L1 = math.log(1.0 / delta1)
    L2 = math.log(3.0 / delta2)
    return (math.sqrt(2 * m * m * sigma1_sq * L1 / n)
            + (alpha * m * m + 4 * m / 3) * L1 / n
            + (5 * alpha * m + 9 * math.sqrt(m) + 4) * L2 * L2 / math.sqrt(M))


# ---------------------------------------------------------------------------
# nonnegative kernels


def bound_subgauss_lower_tail(m: int, c: float, mean_u: float, t: float) -> float:
    """``P(E[U_W] - U_W > t)`` for a kernel with values in ``[0, 1]``."""
    if mean_u < 0:
        raise BoundError("E[U_W] must be nonnegative for a [0, 1]-valued kernel")
    return _prob(log_tail(t, 8 * m * c * mean_u))


def bound_subgauss_sqrt(m: int, c: float, u_observed: float, delta: float) -> float:
    """Upper confidence bound on ``sqrt(E[U_W])`` at level ``1 - delta``."""
    if u_observed < 0:
        raise BoundError("observed U_W must be nonnegative for a [0, 1]-valued kernel")
    return math.sqrt(u_observed) + math.sqrt(8 * m * c * _log_inv(delta))


def check_unit_range(kernel) -> None:
    if kernel.lo < 0 or kernel.hi > 1:
        raise BoundError(
            f"kernel {kernel.name!r} has range [{kernel.lo}, {kernel.hi}]; the lower-tail "
            "bound needs values in [0, 1]. Map it first with kernel.to_unit_interval()")


# ---------------------------------------------------------------------------
# dominance over Arcones


DEFAULT_DOMINANCE_GRID = {
    "m": tuple(range(2, 9)),
    "n": tuple(10 ** e for e in range(1, 7)),
    "t": tuple(float(v) for v in np.logspace(-3, 0, 13)),
    "sigma1_sq": (0.0, 0.25, 1.0),
}


def dominance_check_vs_arcones(grid: dict | None = None) -> dict:
    """Compare the worst-case complete bound with Arcones' bound on a grid.

    The worst-case complete bound uses ``beta = gamma = 8`` and the relaxed
    ``B = m^4 / n^2``. Both sides are compared as clamped log-probabilities.
    Returns ``{"points": N, "violations": [...], "rows": [...]}``.
    """
    g = dict(DEFAULT_DOMINANCE_GRID, **(grid or {}))
    worst = SensitivityProfile(sigma1_sq=0.0, sigma_m_sq=1.0, beta=WORST_BETA,
                               gamma=WORST_GAMMA, alpha=2 + math.sqrt(8),
                               provenance={"gamma": "worst_case", "beta": "worst_case"})
    rows, bad = [], []
    for m in g["m"]:
        for n in g["n"]:
            st = _complete_closed(n, m, relaxed=True)
            for s1 in g["sigma1_sq"]:
                p = SensitivityProfile(s1, 1.0, worst.beta, worst.gamma, worst.alpha,
                                       provenance=worst.provenance)
                for t in g["t"]:
                    new = min(0.0, _incomplete_log(st, p, t))
                    arc = min(0.0, _arcones_log(n, m, s1, t))
                    row = {"m": m, "n": n, "sigma1_sq": s1, "t": t,
                           "log_new": new, "log_arcones": arc}
                    rows.append(row)
                    if new > arc:
                        bad.append(row)
    return {"points": len(rows), "violations": bad, "rows": rows}


# ---------------------------------------------------------------------------
# uniform entry point for reports


BOUND_NAMES = ("hoeffding", "arcones", "variance-bernstein", "incomplete", "complete",
               "random-design", "subgauss")


def report(which: str, *, n: int, m: int, profile: SensitivityProfile,
           t: float | None = None, delta: float | None = None, M: int | None = None,
           stats=None, delta1: float | None = None, delta2: float | None = None,
           u_observed: float | None = None, relaxed: bool = False) -> BoundReport:
    """Evaluate bound ``which`` and wrap it with its inputs and validity flags."""
    if (t is None) == (delta is None) and which != "random-design":
        raise BoundError("give exactly one of t and delta")
    inputs = {"n": n, "m": m}
    flags = {}
    if t is not None:
        inputs["t"] = t
    if delta is not None:
        inputs["delta"] = delta

    def tail_only():
        if t is None:
            raise BoundError(f"bound {which!r} has only a tail form; pass t")

    if which == "hoeffding":
        tail_only()
        flags["n_divisible_by_m"] = n % m == 0
        inputs["sigma_m_sq"] = profile.sigma_m_sq
        return BoundReport(which, "tail", bound_hoeffding_tail(n, m, profile.sigma_m_sq, t),
                           inputs, flags)
    if which == "arcones":
        tail_only()
        inputs["sigma1_sq"] = profile.sigma1_sq
        return BoundReport(which, "tail", bound_arcones_tail(n, m, profile.sigma1_sq, t),
                           inputs, flags)
    if which == "variance-bernstein":
        tail_only()
        sk = profile.sigma_k_sq or (1.0,) * m
        var_u = variance_complete(n, m, sk)
        inputs["var_u"] = var_u
        return BoundReport(which, "tail", bound_variance_bernstein_tail(n, m, var_u, t), inputs,
                           flags)
    if which in ("incomplete", "complete"):
        inputs.update(sigma1_sq=profile.sigma1_sq, beta=profile.beta, gamma=profile.gamma,
                      alpha=profile.alpha)
        if which == "complete":
            inputs["relaxed"] = relaxed
            if t is not None:
                return BoundReport(which, "tail",
                                   bound_complete_tail(n, m, profile, t, relaxed), inputs)
            return BoundReport(which, "delta",
                               bound_complete_delta(n, m, profile, delta, relaxed), inputs)
        if stats is None:
            raise BoundError("the incomplete bound needs design statistics")
        st = _stats(stats)
        inputs.update(A=st.a, B=st.b, C=st.c, M=M)
        if t is not None:
            return BoundReport(which, "tail", bound_incomplete_tail(st, profile, t), inputs)
        return BoundReport(which, "delta", bound_incomplete_delta(st, profile, delta), inputs)
    if which == "random-design":
        if M is None:
            raise BoundError("the random-design bound needs M")
        if delta1 is None or delta2 is None:
            if delta is None:
                raise BoundError("give delta (split evenly) or delta1 and delta2")
            delta1 = delta2 = delta / 2
        inputs.update(M=M, delta1=delta1, delta2=delta2, sigma1_sq=profile.sigma1_sq,
                      alpha=profile.alpha)
        flags["M_ge_ln2_n"] = random_design_supported(n, M)
        return BoundReport(which, "delta", bound_random_design_delta(
            n, m, M, profile.sigma1_sq, profile.alpha, delta1, delta2), inputs, flags)
    if which == "subgauss":
        if stats is None:
            raise BoundError("the lower-tail bound needs design statistics (C)")
        st = _stats(stats)
        inputs["C"] = st.c
        if delta is not None:
            if u_observed is None:
                raise BoundError("the square-root form needs the observed U_W")
            inputs["u_observed"] = u_observed
            return BoundReport(which, "delta",
                               bound_subgauss_sqrt(m, st.c, u_observed, delta), inputs)
        if u_observed is None:
            raise BoundError("the tail form needs E[U_W] (pass it as u_observed)")
        inputs["mean_u"] = u_observed
        return BoundReport(which, "tail", bound_subgauss_lower_tail(m, st.c, u_observed, t),
                           inputs)
    raise BoundError(f"unknown bound {which!r}; choose from {', '.join(BOUND_NAMES)}")
