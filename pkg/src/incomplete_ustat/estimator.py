"""Complete and incomplete U-statistics, plus exact enumeration oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from .designs import DEFAULT_COMPLETE_CAP, Design, complete_design
from .kernels import DEFAULT_ENUM_CAP, Distribution, EnumerationCapError, Kernel, KernelError

__all__ = [
    "Estimate",
    "as_dataset",
    "load_dataset",
    "kernel_values",
    "estimate_incomplete",
    "estimate_complete",
    "exact_theta",
    "exact_distribution_of_UW",
    "exact_UW_values",
]


@dataclass(frozen=True)
class Estimate:
    value: float
    kernel_name: str
    n: int
    m: int
    M: int
    design: str
    seed: int | None
    eval_count: int
    natural_value: float

    def to_dict(self) -> dict:
        return {
            "value": self.value, "natural_value": self.natural_value,
            "kernel": self.kernel_name, "M": self.M, "n": self.n, "m": self.m,
            "design": self.design, "seed": self.seed, "eval_count": self.eval_count,
        }


def as_dataset(points, dim: int = 1) -> np.ndarray:
    """Validate data as an ``(n, d)`` float array of finite values."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise KernelError(f"dataset must have shape (n, {dim}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.nonzero(~np.isfinite(arr).all(axis=1))[0][0])
        raise KernelError(f"dataset row {bad + 1} has non-finite coordinates")
    return arr


def load_dataset(path, dim: int = 1, header: bool = False) -> np.ndarray:
    """Read a CSV with one observation per row and one column per coordinate."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return as_dataset(arr, dim)


def kernel_values(kernel: Kernel, data: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Kernel evaluated at each subset (row of ``indices``) of the data."""
    return kernel.evaluate_batch(data[indices])


def _check_inputs(kernel: Kernel, data: np.ndarray, design: Design):
    if design.m != kernel.degree:
        raise KernelError(
            f"design subsets have size {design.m}, kernel {kernel.name!r} has degree "
            f"{kernel.degree}")
    if design.n > data.shape[0]:
        raise KernelError(
            f"design refers to n={design.n} observations, dataset has {data.shape[0]}")
    if not kernel.symmetric:
        raise KernelError(
            f"kernel {kernel.name!r} is not symmetric; U-statistics here require symmetry")


def estimate_incomplete(kernel: Kernel, data, design: Design, threads: int = 1,
                        chunk: int = _parallel.CHUNK_SIZE) -> Estimate:
    """Mean of the kernel over the ``M`` subsets of ``design``.

    The sum is formed over fixed chunks of the design (pairwise summation in
    extended precision within a chunk, correctly rounded across chunks), so
    the result does not depend on ``threads``.
    """
    data = as_dataset(data, kernel.dim)
    _check_inputs(kernel, data, design)
    idx = design.indices

    def part(lo, hi):
        return _parallel.chunk_sum(kernel_values(kernel, data, idx[lo:hi]))

    parts = _parallel.map_chunks(part, design.M, threads=threads, chunk=chunk)
    value = _parallel.combine_sums(parts) / design.M
    value = min(max(value, kernel.lo), kernel.hi)
    return Estimate(value=value, kernel_name=kernel.name, n=design.n, m=design.m,
                    M=design.M, design=design.tag, seed=design.seed, eval_count=design.M,
                    natural_value=float(kernel.to_natural(value)))


def estimate_complete(kernel: Kernel, data, threads: int = 1,
                      cap: int = DEFAULT_COMPLETE_CAP) -> Estimate:
    """The complete U-statistic (mean over all ``C(n, m)`` subsets)."""
    data = as_dataset(data, kernel.dim)
    return estimate_incomplete(kernel, data, complete_design(data.shape[0], kernel.degree, cap),
                               threads=threads)


def exact_theta(kernel: Kernel, dist: Distribution, cap: int = DEFAULT_ENUM_CAP) -> float:
    """``E[K(X_1, ..., X_m)]`` by weighted enumeration over ``support^m``.

    For continuous distributions a registered analytic value is returned.
    """
    if not dist.finite:
        info = kernel.analytic_for(dist.name)
        if "theta" in info:
            return float(info["theta"])
        raise EnumerationCapError(
            f"no exact theta for kernel {kernel.name!r} under continuous {dist.name!r}")
    grid, probs = dist.enumerate(kernel.degree, cap)
    vals = kernel.evaluate_batch(dist.atoms[grid])
    return math.fsum((vals * probs).tolist())


def exact_UW_values(kernel: Kernel, dist: Distribution, design: Design,
                    cap: int = DEFAULT_ENUM_CAP):
    """``U_W`` at every data vector in ``support^n`` with its probability.

    Returns ``(values, probs, grid)``; ``grid[j]`` lists the atom index of
    each observation for the ``j``-th data vector.
    """
    if design.m != kernel.degree:
        raise KernelError("design subset size and kernel degree differ")
    grid, probs = dist.enumerate(design.n, cap)
    values = np.empty(grid.shape[0])
    step = max(1, (1 << 22) // (design.M * design.m))
    for lo in range(0, grid.shape[0], step):
        pts = dist.atoms[grid[lo:lo + step]]
        kv = kernel.evaluate_batch(pts[:, design.indices])
        values[lo:lo + step] = kv.sum(axis=1) / design.M
    return values, probs, grid


def exact_distribution_of_UW(kernel: Kernel, dist: Distribution, design: Design,
                             cap: int = DEFAULT_ENUM_CAP) -> list[tuple[float, float]]:
    """Probability mass function of ``U_W(X)`` as sorted ``(value, probability)`` atoms."""
    values, probs, _ = exact_UW_values(kernel, dist, design, cap)
    uniq, inv = np.unique(values, return_inverse=True)
    mass = np.bincount(inv, weights=probs, minlength=uniq.size)
    return [(float(v), float(p)) for v, p in zip(uniq, mass)]
