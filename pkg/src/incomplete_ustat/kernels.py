"""Bounded symmetric kernels, sample distributions and the substitution /
partial-difference operators.

Kernels are vectorized: the underlying function receives an array of shape
``(..., m, d)`` (any number of leading batch axes, then the ``m`` kernel
arguments, then the per-observation coordinates) and returns an array of
shape ``(...)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "Kernel",
    "Distribution",
    "KernelError",
    "KernelRangeError",
    "EnumerationCapError",
    "evaluate",
    "substitute",
    "partial_difference",
    "builtin_registry",
    "get_kernel",
    "builtin_distributions",
    "get_distribution",
    "constant_kernel",
    "average_kernel",
    "finite_distribution",
    "uniform_distribution",
    "check_symmetry",
    "DEFAULT_ENUM_CAP",
]

#: default cap on the number of points enumerated by brute-force oracles
DEFAULT_ENUM_CAP = 2 ** 20

_RANGE_TOL = 1e-12


class KernelError(ValueError):
    """Invalid kernel call (arity, dimension, non-finite input)."""


class KernelRangeError(KernelError):
    """A kernel produced a value outside its declared range."""


class EnumerationCapError(ValueError):
    """An exhaustive enumeration would exceed the configured cap."""


@dataclass(frozen=True, eq=False)
class Kernel:
    """A bounded kernel of degree ``m`` acting on ``d``-dimensional points.

    ``func`` maps ``(..., m, d)`` arrays to ``(...)`` arrays with values in
    ``[lo, hi]`` (a sub-interval of ``[-1, 1]``). If the kernel was obtained
    by rescaling a kernel with a wider natural range, the natural value is
    ``scale * value + offset``.

    ``analytic`` maps a distribution name (or ``"*"`` for any distribution)
    to known values of ``theta``, ``sigma_k_sq``, ``beta`` and ``gamma``.
    """

    name: str
    degree: int
    func: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    lo: float = -1.0
    hi: float = 1.0
    symmetric: bool = True
    scale: float = 1.0
    offset: float = 0.0
    analytic: Mapping[str, Mapping[str, object]] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.degree < 1:
            raise KernelError(f"kernel degree must be >= 1, got {self.degree}")
        if self.dim < 1:
            raise KernelError(f"point dimension must be >= 1, got {self.dim}")
        if not (-1.0 <= self.lo < self.hi <= 1.0):
            raise KernelError(
                f"kernel range [{self.lo}, {self.hi}] is not a sub-interval of [-1, 1]")

    @property
    def range(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def evaluate_batch(self, args) -> np.ndarray:
        """Evaluate on an array of argument tuples of shape ``(..., m, d)``."""
        args = np.asarray(args, dtype=float)
        if args.ndim < 2 or args.shape[-2] != self.degree or args.shape[-1] != self.dim:
            raise KernelError(
                f"kernel {self.name!r} expects argument arrays of shape (..., "
                f"{self.degree}, {self.dim}), got {args.shape}")
        values = np.asarray(self.func(args), dtype=float)
        bad = ~((values >= self.lo - _RANGE_TOL) & (values <= self.hi + _RANGE_TOL))
        if bad.any():
            v = values[bad].flat[0]
            raise KernelRangeError(
                f"kernel {self.name!r} returned {v!r} outside its range "
                f"[{self.lo}, {self.hi}]; check the kernel code and the data domain")
        return values

    def __call__(self, *args) -> float:
        return evaluate(self, args)

    def to_natural(self, value):
        """Map a value (or an estimate) back to the kernel's natural scale."""
        return self.scale * value + self.offset

    def to_unit_interval(self) -> "Kernel":
        """Affinely map the kernel onto ``[0, 1]``.

        The natural scale is preserved, so ``to_natural`` keeps working.
        """
        lo, hi = self.lo, self.hi
        width = hi - lo
        f = self.func

        def unit(args, _f=f, _lo=lo, _w=width):
            return np.clip((_f(args) - _lo) / _w, 0.0, 1.0)

        analytic = {}
        for dist, info in self.analytic.items():
            mapped = {}
            if "theta" in info:
                mapped["theta"] = (info["theta"] - lo) / width
            if "sigma_k_sq" in info:
                mapped["sigma_k_sq"] = tuple(v / width ** 2 for v in info["sigma_k_sq"])
            for key in ("beta", "gamma"):
                if key in info:
                    mapped[key] = info[key] / width ** 2
            analytic[dist] = mapped
        return replace(
            self, name=f"{self.name}01", func=unit, lo=0.0, hi=1.0,
            scale=self.scale * width, offset=self.offset + self.scale * lo,
            analytic=analytic)

    def analytic_for(self, dist_name: str) -> Mapping[str, object]:
        return self.analytic.get(dist_name) or self.analytic.get("*") or {}

    def __repr__(self):
        return (f"Kernel(name={self.name!r}, degree={self.degree}, dim={self.dim}, "
                f"range=[{self.lo}, {self.hi}], symmetric={self.symmetric})")


def _as_point(p, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise KernelError(f"sample point {p!r} does not have dimension {dim}")
    if not np.all(np.isfinite(arr)):
        raise KernelError(f"sample point {p!r} has non-finite coordinates")
    return arr


def evaluate(kernel: Kernel, args: Sequence) -> float:
    """Evaluate ``kernel`` at a single tuple of ``m`` sample points."""
    if len(args) != kernel.degree:
        raise KernelError(
            f"kernel {kernel.name!r} has degree {kernel.degree}, got {len(args)} arguments")
    pts = np.stack([_as_point(a, kernel.dim) for a in args])
    return float(kernel.evaluate_batch(pts[None])[0])


def substitute(args: Sequence, k: int, y) -> tuple:
    """Replace the ``k``-th argument (1-based) by ``y``."""
    if not 1 <= k <= len(args):
        raise IndexError(f"substitution index {k} outside 1..{len(args)}")
    out = list(args)
    out[k - 1] = y
    return tuple(out)


def partial_difference(kernel: Kernel, args: Sequence, k: int, y, y2) -> float:
    """``K(args with slot k := y) - K(args with slot k := y2)``."""
    return evaluate(kernel, substitute(args, k, y)) - evaluate(kernel, substitute(args, k, y2))


def check_symmetry(kernel: Kernel, points: np.ndarray, tol: float = 1e-12) -> bool:
    """Spot-check permutation invariance on argument tuples ``(N, m, d)``."""
    points = np.asarray(points, dtype=float)
    base = kernel.evaluate_batch(points)
    for perm in itertools.permutations(range(kernel.degree)):
        if not np.allclose(kernel.evaluate_batch(points[:, list(perm)]), base,
                           atol=tol, rtol=0):
            return False
    return True


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True, eq=False)
class Distribution:
    """An i.i.d. sampling distribution on ``R^d``.

    Either finite (``atoms`` with ``probs``) or uniform on the box
    ``[low, high]^d``.
    """

    name: str
    dim: int = 1
    atoms: np.ndarray | None = None
    probs: np.ndarray | None = None
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.atoms is not None:
            atoms = np.asarray(self.atoms, dtype=float).reshape(-1, self.dim)
            probs = np.asarray(self.probs, dtype=float)
            if probs.shape != (atoms.shape[0],):
                raise ValueError("atoms and probs have mismatched lengths")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"probabilities of {self.name!r} must be nonnegative and sum to 1")
            atoms.setflags(write=False)
            probs.setflags(write=False)
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "probs", probs)

    @property
    def finite(self) -> bool:
        return self.atoms is not None

    @property
    def support_size(self) -> int:
        if not self.finite:
            raise ValueError(f"distribution {self.name!r} has continuous support")
        return self.atoms.shape[0]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. points, returned as an ``(size, d)`` array."""
        if self.finite:
            idx = rng.choice(self.atoms.shape[0], size=size, p=self.probs)
            return self.atoms[idx]
        return rng.uniform(self.low, self.high, size=(size, self.dim))

    def enumerate(self, n: int, cap: int = DEFAULT_ENUM_CAP):
        """All ``|support|^n`` data vectors with their product probabilities.

        Returns ``(index_tuples, probs)`` where ``index_tuples`` has shape
        ``(s^n, n)`` and indexes into ``atoms``.
        """
        s = self.support_size
        if s ** n > cap:
            raise EnumerationCapError(
                f"enumerating {s}^{n} = {s ** n} data vectors exceeds the cap {cap}")
        grid = np.indices((s,) * n).reshape(n, -1).T
        probs = np.prod(self.probs[grid], axis=1)
        return grid, probs


def finite_distribution(name: str, atoms, probs=None, dim: int = 1) -> Distribution:
    atoms = np.asarray(atoms, dtype=float).reshape(-1, dim)
    if probs is None:
        probs = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return Distribution(name=name, dim=dim, atoms=atoms, probs=probs)


def uniform_distribution(name: str, low: float = -1.0, high: float = 1.0,
                         dim: int = 1) -> Distribution:
    return Distribution(name=name, dim=dim, low=low, high=high)


_DISTRIBUTIONS = {
    "rademacher": finite_distribution("rademacher", [-1.0, 1.0]),
    "grid5": finite_distribution("grid5", [-1.0, -0.5, 0.0, 0.5, 1.0]),
    "skewed3": finite_distribution("skewed3", [-1.0, 0.0, 1.0], [0.2, 0.3, 0.5]),
    "uniform": uniform_distribution("uniform"),
    "rademacher2d": finite_distribution(
        "rademacher2d", [[-1, -1], [-1, 1], [1, -1], [1, 1]], dim=2),
    "uniform2d": uniform_distribution("uniform2d", dim=2),
}


def builtin_distributions() -> list[Distribution]:
    return list(_DISTRIBUTIONS.values())


def get_distribution(name: str) -> Distribution:
    try:
        return _DISTRIBUTIONS[name]
    except KeyError:
        raise KeyError(
            f"unknown distribution {name!r}; available: {sorted(_DISTRIBUTIONS)}") from None


# ---------------------------------------------------------------------------
# built-in kernels
#
# All built-ins assume coordinates in [-1, 1]. Analytic sensitivities are for
# U[-1, 1] data (or U[-1, 1]^2 for the Kendall kernel); finite distributions
# are handled by enumeration instead.


def _product(a):
    return a[..., 0, 0] * a[..., 1, 0]


def _product3(a):
    return a[..., 0, 0] * a[..., 1, 0] * a[..., 2, 0]


def _mean(a):
    return a[..., 0, 0]


def _variance(a):
    return 0.5 * (a[..., 0, 0] - a[..., 1, 0]) ** 2 - 1.0


def _gini(a):
    return np.abs(a[..., 0, 0] - a[..., 1, 0]) - 1.0


def _gini3(a):
    x, y, z = a[..., 0, 0], a[..., 1, 0], a[..., 2, 0]
    return (np.abs(x - y) + np.abs(x - z) + np.abs(y - z)) / 3.0 - 1.0


def _kendall(a):
    return np.sign((a[..., 0, 0] - a[..., 1, 0]) * (a[..., 0, 1] - a[..., 1, 1]))


def constant_kernel(c: float = 0.5, degree: int = 2, name: str = "constant") -> Kernel:
    """Kernel that ignores its arguments and returns ``c``."""
    if not -1.0 <= c <= 1.0:
        raise KernelError(f"constant {c} outside [-1, 1]")
    def const(a, _c=c):
        return np.full(a.shape[:-2], _c)

    zeros = (0.0,) * degree
    return Kernel(
        name=name, degree=degree, func=const,
        analytic={"*": {"theta": c, "sigma_k_sq": zeros, "beta": 0.0, "gamma": 0.0}},
        description=f"constant kernel K = {c}")


def average_kernel(degree: int) -> Kernel:
    """Sum-of-singletons kernel ``(x_1 + ... + x_m) / m``."""

    def avg(a):
        return a[..., :, 0].mean(axis=-1)

    var = 1.0 / 3.0
    return Kernel(
        name=f"average{degree}", degree=degree, func=avg,
        analytic={"uniform": {
            "theta": 0.0,
            "sigma_k_sq": tuple(k * var / degree ** 2 for k in range(1, degree + 1)),
            "beta": 0.0, "gamma": 0.0}},
        description=f"(x_1 + ... + x_{degree}) / {degree}")


def _build_registry() -> dict[str, Kernel]:
    kernels = [
        Kernel("product", 2, _product, analytic={"uniform": {
            "theta": 0.0, "sigma_k_sq": (0.0, 1 / 9), "beta": 4 / 9, "gamma": 8 / 3}},
            description="K(x, y) = x y"),
        Kernel("mean", 1, _mean, analytic={"uniform": {
            "theta": 0.0, "sigma_k_sq": (1 / 3,), "beta": 0.0, "gamma": 0.0}},
            description="K(x) = x"),
        Kernel("variance", 2, _variance, offset=1.0, analytic={"uniform": {
            "theta": -2 / 3, "sigma_k_sq": (1 / 45, 7 / 45), "beta": 4 / 9, "gamma": 8 / 3}},
            description="K(x, y) = (x - y)^2 / 2 - 1; natural value K + 1"),
        Kernel("kendall", 2, _kendall, dim=2, analytic={"uniform2d": {
            "theta": 0.0, "sigma_k_sq": (1 / 9, 1.0)}},
            description="K(p, q) = sign((p_1 - q_1)(p_2 - q_2))"),
        Kernel("gini", 2, _gini, offset=1.0, analytic={"uniform": {
            "theta": -1 / 3, "sigma_k_sq": (1 / 45, 2 / 9), "beta": 32 / 45, "gamma": 8 / 3}},
            description="K(x, y) = |x - y| - 1; natural value K + 1"),
        Kernel("gini3", 3, _gini3, hi=1 / 3, offset=1.0, analytic={"uniform": {
            "theta": -1 / 3, "sigma_k_sq": (4 / 405, 16 / 405, 36 / 405),
            "beta": 32 / 405, "gamma": 8 / 27}},
            description="K(x, y, z) = mean pairwise |difference| - 1; natural value K + 1"),
        constant_kernel(0.5),
        Kernel("product3", 3, _product3, analytic={"uniform": {
            "theta": 0.0, "sigma_k_sq": (0.0, 0.0, 1 / 27), "beta": 4 / 27, "gamma": 8 / 3}},
            description="K(x, y, z) = x y z"),
        average_kernel(3),
    ]
    return {k.name: k for k in kernels}


_REGISTRY = _build_registry()


def builtin_registry() -> list[Kernel]:
    """All built-in kernels."""
    return list(_REGISTRY.values())


def get_kernel(name: str) -> Kernel:
    """Look up a built-in kernel by name.

    Names ending in ``01`` return the kernel affinely mapped to ``[0, 1]``.
    """
    if name in _REGISTRY:
        return _REGISTRY[name]
    if name.endswith("01") and name[:-2] in _REGISTRY:
        return _REGISTRY[name[:-2]].to_unit_interval()
    raise KeyError(f"unknown kernel {name!r}; available: {sorted(_REGISTRY)}")
