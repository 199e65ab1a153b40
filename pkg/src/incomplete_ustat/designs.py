"""Designs (sequences of m-subsets of [n]) and their sensitivity statistics.

Indices are 1-based at the public boundary (constructors taking subsets,
file I/O, ``Design.subsets``, ``DesignStats.r_pair`` keys) and 0-based in
``Design.indices``.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "Design",
    "DesignStats",
    "ExpectedStats",
    "DesignError",
    "DesignFormatError",
    "complete_design",
    "partition_design",
    "random_design",
    "sample_subsets",
    "design_stats",
    "abc",
    "expected_stats",
    "load_design",
    "save_design",
    "parse_design_spec",
    "DEFAULT_COMPLETE_CAP",
]

DEFAULT_COMPLETE_CAP = 10 ** 7


class DesignError(ValueError):
    pass


class DesignFormatError(DesignError):
    pass


class Design:
    """An ordered sequence of ``M`` subsets of ``[n]``, each of size ``m``.

    Duplicated subsets are allowed and count with multiplicity. Within a
    subset the order of the indices is kept as given (it fixes the order of
    the kernel arguments).
    """

    __slots__ = ("n", "m", "indices", "tag", "seed")

    def __init__(self, n: int, m: int, indices, tag: str = "custom",
                 seed: int | None = None):
        n, m = int(n), int(m)
        if m < 1 or n < 1:
            raise DesignError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        idx = np.array(indices, dtype=np.int64, copy=True)
        if idx.ndim != 2 or idx.shape[1] != m:
            raise DesignError(f"design array must have shape (M, {m}), got {idx.shape}")
        if idx.shape[0] < 1:
            raise DesignError("a design needs at least one subset")
        if idx.min() < 0 or idx.max() >= n:
            raise DesignError(f"design indices must lie in 1..{n}")
        if m > 1:
            srt = np.sort(idx, axis=1)
            dup = np.nonzero((np.diff(srt, axis=1) == 0).any(axis=1))[0]
            if dup.size:
                raise DesignError(
                    f"subset {dup[0] + 1} has repeated elements: {list(idx[dup[0]] + 1)}")
        idx.setflags(write=False)
        self.n, self.m, self.indices, self.tag, self.seed = n, m, idx, tag, seed

    @classmethod
    def from_subsets(cls, n: int, m: int, subsets: Iterable[Iterable[int]],
                     tag: str = "custom") -> "Design":
        """Build from 1-based subsets."""
        rows = [list(s) for s in subsets]
        for i, row in enumerate(rows):
            if len(row) != m:
                raise DesignError(f"subset {i + 1} has {len(row)} elements, expected {m}")
        return cls(n, m, np.asarray(rows, dtype=np.int64).reshape(-1, m) - 1, tag=tag)

    @property
    def M(self) -> int:
        return self.indices.shape[0]

    def subsets(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) + 1 for v in row) for row in self.indices]

    def relabel(self, perm) -> "Design":
        """Apply the index map ``k -> perm[k]`` (0-based permutation of range(n))."""
        perm = np.asarray(perm, dtype=np.int64)
        return Design(self.n, self.m, perm[self.indices], tag=self.tag, seed=self.seed)

    def summary(self) -> dict:
        return {"n": self.n, "m": self.m, "M": self.M, "design": self.tag, "seed": self.seed}

    def __eq__(self, other):
        if not isinstance(other, Design):
            return NotImplemented
        return (self.n, self.m) == (other.n, other.m) and np.array_equal(
            self.indices, other.indices)

    def __hash__(self):
        return hash((self.n, self.m, self.indices.tobytes()))

    def __repr__(self):
        return f"Design(n={self.n}, m={self.m}, M={self.M}, tag={self.tag!r})"


def _check_nm(n: int, m: int):
    if not 1 <= m < n:
        raise DesignError(f"need 1 <= m < n, got n={n}, m={m}")


def complete_design(n: int, m: int, cap: int = DEFAULT_COMPLETE_CAP) -> Design:
    """All ``C(n, m)`` subsets in lexicographic order."""
    _check_nm(n, m)
    total = math.comb(n, m)
    if total > cap:
        raise DesignError(
            f"complete design has C({n},{m}) = {total} subsets, above the cap {cap}; "
            "use an incomplete design")
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), m)),
                       dtype=np.int64, count=total * m)
    return Design(n, m, flat.reshape(total, m), tag="complete")


def partition_design(n: int, m: int) -> Design:
    """``n/m`` disjoint consecutive blocks; the estimator is then a sum of independent terms."""
    _check_nm(n, m)
    if n % m:
        raise DesignError(f"partition design needs m | n, got n={n}, m={m}")
    return Design(n, m, np.arange(n, dtype=np.int64).reshape(n // m, m), tag="partition")


def sample_subsets(rng: np.random.Generator, n: int, m: int, M: int) -> np.ndarray:
    """``M`` i.i.d. uniform ``m``-subsets of ``range(n)`` as sorted rows of an (M, m) array.

    Floyd's algorithm, vectorized over the draws: ``m`` integer draws per
    subset and no O(n) state.
    """
    out = np.empty((M, m), dtype=np.int64)
    for j, top in enumerate(range(n - m, n)):
        t = rng.integers(0, top + 1, size=M)
        if j:
            taken = (out[:, :j] == t[:, None]).any(axis=1)
            t = np.where(taken, top, t)
        out[:, j] = t
    out.sort(axis=1)
    return out


def random_design(n: int, m: int, M: int, seed=None) -> Design:
    """``M`` subsets drawn with replacement, uniformly from all ``C(n, m)``.

    ``seed`` may be an int, ``None`` or a ``numpy.random.Generator``.
    """
    _check_nm(n, m)
    if M < 1:
        raise DesignError(f"need M >= 1, got {M}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tag_seed = seed if isinstance(seed, (int, np.integer)) else None
    return Design(n, m, sample_subsets(rng, n, m, M), tag=f"random:{M}:{tag_seed}",
                  seed=tag_seed)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class DesignStats:
    """Occupation counts of a design and the scalars A, B, C.

    ``a_num`` and ``b_num`` are the exact integers ``sum R_k^2`` and
    ``sum_{k != l} R_kl^2`` (ordered pairs); ``a = a_num / M^2`` etc. are
    correctly rounded.
    """

    r: np.ndarray
    r_pair: dict
    a: float
    b: float
    c: float
    m_total: int
    a_num: int
    b_num: int
    n: int
    m: int


def _pair_codes(indices: np.ndarray, n: int) -> np.ndarray:
    m = indices.shape[1]
    cols = []
    for i, j in itertools.combinations(range(m), 2):
        lo = np.minimum(indices[:, i], indices[:, j])
        hi = np.maximum(indices[:, i], indices[:, j])
        cols.append(lo * n + hi)
    if not cols:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(cols)


def _pair_count_values(indices: np.ndarray, n: int) -> np.ndarray:
    codes = _pair_codes(indices, n)
    if codes.size == 0:
        return codes
    if n * n <= 1 << 24:
        counts = np.bincount(codes, minlength=n * n)
        return counts[counts > 0]
    return np.unique(codes, return_counts=True)[1]


def abc(indices: np.ndarray, n: int) -> tuple[float, float, float]:
    """Fast ``(A, B, C)`` for a 0-based index array; used in Monte Carlo loops."""
    M = indices.shape[0]
    r = np.bincount(indices.ravel(), minlength=n)
    pc = _pair_count_values(indices, n)
    a_num = int(np.dot(r, r))
    b_num = 2 * int(np.dot(pc, pc))
    return a_num / (M * M), b_num / (M * M), int(r.max()) / M


def design_stats(design: Design) -> DesignStats:
    """``R_k``, ``R_kl`` and ``A``, ``B``, ``C`` of a design.

    ``B`` sums over ordered pairs ``k != l``, so each unordered pair in
    ``r_pair`` contributes twice.
    """
    n, M = design.n, design.M
    r = np.bincount(design.indices.ravel(), minlength=n).astype(np.int64)
    codes = _pair_codes(design.indices, n)
    r_pair = {}
    b_half = 0
    if codes.size:
        uniq, counts = np.unique(codes, return_counts=True)
        for code, cnt in zip(uniq.tolist(), counts.tolist()):
            r_pair[(code // n + 1, code % n + 1)] = cnt
            b_half += cnt * cnt
    a_num = sum(v * v for v in r.tolist())
    b_num = 2 * b_half
    return DesignStats(r=r, r_pair=r_pair, a=a_num / (M * M), b=b_num / (M * M),
                       c=int(r.max()) / M, m_total=M, a_num=a_num, b_num=b_num,
                       n=n, m=design.m)


def complete_stats(n: int, m: int) -> tuple[float, float, float]:
    """Closed-form ``(A, B, C)`` of the complete design, without enumerating it."""
    _check_nm(n, m)
    return m * m / n, (m * (m - 1)) ** 2 / (n * (n - 1)), m / n


class ExpectedStats(NamedTuple):
    a_exact: float
    b_exact: float
    a_upper: float
    b_upper: float


def expected_stats(n: int, m: int, M: int) -> ExpectedStats:
    """Expectations of ``A`` and ``B`` under uniform sampling with replacement.

    Also returns the simpler upper bounds ``m^2/n + m/M`` and
    ``m^4/n^2 + m^2/M``.
    """
    _check_nm(n, m)
    p_pair = m * (m - 1) / (n * (n - 1))
    a_exact = m / M + (M - 1) * m * m / (M * n)
    b_exact = n * (n - 1) * (M * p_pair + M * (M - 1) * p_pair ** 2) / (M * M)
    return ExpectedStats(a_exact, b_exact, m * m / n + m / M, m ** 4 / n ** 2 + m * m / M)


# ---------------------------------------------------------------------------
# file format


def save_design(design: Design, path) -> None:
    """Write ``n=.. m=.. M=..`` then one comma-separated 1-based subset per line."""
    with open(path, "w") as fh:
        fh.write(f"n={design.n} m={design.m} M={design.M}\n")
        for row in design.indices:
            fh.write(",".join(str(int(v) + 1) for v in row))
            fh.write("\n")


def _parse_header(line: str, path) -> dict:
    fields = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep or key not in ("n", "m", "M"):
            raise DesignFormatError(f"{path}:1: bad header token {tok!r}")
        try:
            fields[key] = int(val)
        except ValueError:
            raise DesignFormatError(f"{path}:1: {key} must be an integer, got {val!r}") from None
    missing = {"n", "m", "M"} - set(fields)
    if missing:
        raise DesignFormatError(f"{path}:1: header lacks {sorted(missing)}")
    return fields


def load_design(path) -> Design:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DesignFormatError(f"{path}: empty design file")
    hdr = _parse_header(lines[0], path)
    n, m = hdr["n"], hdr["m"]
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = [int(tok) for tok in line.split(",")]
        except ValueError:
            raise DesignFormatError(f"{path}:{lineno}: non-integer entry in {line!r}") from None
        if len(row) != m:
            raise DesignFormatError(
                f"{path}:{lineno}: subset has {len(row)} elements, expected m={m}")
        if len(set(row)) != m:
            raise DesignFormatError(f"{path}:{lineno}: duplicate element in {line!r}")
        if min(row) < 1 or max(row) > n:
            raise DesignFormatError(f"{path}:{lineno}: index outside 1..{n} in {line!r}")
        rows.append(row)
    if len(rows) != hdr["M"]:
        raise DesignFormatError(f"{path}: header says M={hdr['M']}, found {len(rows)} subsets")
    design = Design.from_subsets(n, m, rows, tag=f"file:{os.fspath(path)}")
    return design


def parse_design_spec(spec: str, n: int | None = None, m: int | None = None,
                      seed: int | None = None) -> Design:
    """Build a design from ``complete``, ``partition``, ``random:<M>[:<seed>]`` or ``file:<path>``."""
    kind, _, rest = spec.partition(":")
    if kind == "file":
        d = load_design(rest)
        if n is not None and d.n > n:
            raise DesignError(f"design uses n={d.n} but only {n} observations are available")
        if m is not None and d.m != m:
            raise DesignError(f"design has m={d.m}, kernel degree is {m}")
        return d
    if n is None or m is None:
        raise DesignError(f"design spec {spec!r} needs n and m")
    if kind == "complete":
        return complete_design(n, m)
    if kind == "partition":
        return partition_design(n, m)
    if kind == "random":
        parts = rest.split(":")
        try:
            M = int(parts[0])
            s = int(parts[1]) if len(parts) > 1 and parts[1] != "" else seed
        except (ValueError, IndexError):
            raise DesignError(f"bad random design spec {spec!r}; use random:<M>:<seed>") from None
        return random_design(n, m, M, s)
    raise DesignError(
        f"unknown design spec {spec!r}; use complete, partition, random:<M>:<seed> or file:<path>")
