"""Seeded Monte Carlo and exact-enumeration checks of the bounds.

Every experiment takes an :class:`ExperimentConfig` and returns a list of
:class:`ExperimentRow`. A row compares an empirical quantity against a
theoretical value under a relation (``<=``, ``>=`` or ``==``) with an explicit
slack; Monte Carlo frequencies get three binomial standard errors.

Replicate ``r`` of an experiment draws from its own generator, seeded by
``(seed, experiment id, r)``, and replicates are processed in fixed chunks,
so the output is the same for any ``threads``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _parallel
from .bounds import (bound_incomplete_delta, bound_incomplete_tail, bound_random_design_delta,
                     bound_subgauss_lower_tail, bound_subgauss_sqrt, check_unit_range,
                     random_design_supported)
from .designs import (Design, abc, complete_design, design_stats, expected_stats,
                      partition_design, random_design, sample_subsets)
from .estimator import exact_theta, exact_UW_values
from .kernels import get_distribution, get_kernel
from .sensitivity import profile as sensitivity_profile
from .sensitivity import worst_case_profile

__all__ = [
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentError",
    "KINDS",
    "parse_config",
    "load_config",
    "run_experiment",
    "run_tail_validity",
    "run_coverage",
    "run_subgauss",
    "run_design_concentration",
    "run_efron_stein_sandwich",
    "run_budget_sweep",
    "efron_stein_quantities",
    "rows_to_csv",
    "write_outputs",
]

SE_SLACK = 3.0
ES_TOL = 1e-10
ES_EQ_TOL = 1e-12


class ExperimentError(ValueError):
    pass


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(float(v)) for v in str(text).split(",") if v.strip())


@dataclass
class ExperimentConfig:
    """Parameters of one experiment run.

    ``M = 0`` means ``n^2``. ``design`` picks the fixed design of the
    fixed-design experiments (``random``, ``complete``, ``partition``; for
    ``efron-stein`` also ``mixed``). ``profile`` is ``auto`` (analytic or
    enumerated values, estimated ones replaced by certified upper bounds) or
    ``worst``.
    """

    kind: str
    kernel: str = "product"
    dist: str = "rademacher"
    n: int = 20
    m: int = 0
    M: int = 0
    design: str = "random"
    bound: str = "incomplete"
    replicates: int = 5000
    t_grid: tuple = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.75)
    delta_grid: tuple = (0.05, 0.1, math.exp(-1))
    delta: float = 0.2
    delta1: float = 0.05
    delta2: float = 0.05
    M_grid: tuple = ()
    designs: int = 20
    profile: str = "auto"
    seed: int = 0
    threads: int = 1
    out: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}; choose from "
                                  f"{', '.join(KINDS)}")
        self.t_grid = _floats(self.t_grid)
        self.delta_grid = _floats(self.delta_grid)
        self.M_grid = _ints(self.M_grid)
        if self.kind not in ("design-concentration",):
            k = get_kernel(self.kernel)
            if self.m and self.m != k.degree:
                raise ExperimentError(f"m={self.m} but kernel {self.kernel!r} has degree "
                                      f"{k.degree}")
            self.m = k.degree
        if self.m < 1 or self.n <= self.m:
            raise ExperimentError(f"need 1 <= m < n, got n={self.n}, m={self.m}")
        if not self.M:
            self.M = self.n * self.n
        if self.replicates < 100 and self.kind not in ("efron-stein",):
            raise ExperimentError("replicates must be at least 100")
        if self.kind == "tail-validity" and not self.t_grid:
            raise ExperimentError("t_grid is empty")
        if self.kind in ("coverage", "subgauss") and not self.delta_grid:
            raise ExperimentError("delta_grid is empty")

    @property
    def label(self) -> str:
        return "|".join(str(v) for v in (self.kind, self.kernel, self.dist, self.n, self.m,
                                         self.M, self.design, self.bound))

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key=value`` lines (``#`` starts a comment)."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ExperimentError(f"line {lineno}: expected key=value, got {raw!r}")
        if key not in known:
            raise ExperimentError(f"line {lineno}: unknown key {key!r}")
        default = known[key].default
        if isinstance(default, bool):
            values[key] = val.lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            values[key] = int(float(val))
        elif isinstance(default, float):
            values[key] = float(val)
        else:
            values[key] = val
    if "kind" not in values:
        raise ExperimentError("config lacks kind=")
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        cfg = parse_config(fh.read())
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg


@dataclass
class ExperimentRow:
    """One checked comparison: ``empirical <relation> theoretical`` within ``slack``."""

    param: str
    value: float
    quantity: str
    empirical: float
    se: float
    theoretical: float
    relation: str
    slack: float
    passed: bool = field(init=False)

    def __post_init__(self):
        e, b, s = self.empirical, self.theoretical, self.slack
        if self.relation == "<=":
            self.passed = bool(e <= b + s)
        elif self.relation == ">=":
            self.passed = bool(e >= b - s)
        elif self.relation == "==":
            self.passed = bool(abs(e - b) <= s)
        else:
            raise ExperimentError(f"unknown relation {self.relation!r}")


def _freq_row(param, value, quantity, hits: np.ndarray, theoretical, relation):
    R = hits.size
    p = float(hits.mean())
    se = math.sqrt(p * (1 - p) / R)
    return ExperimentRow(param, value, quantity, p, se, theoretical, relation, SE_SLACK * se)


# ---------------------------------------------------------------------------
# shared machinery


def _profile(cfg, kernel, dist):
    if cfg.profile == "worst":
        return worst_case_profile(kernel)
    if cfg.profile != "auto":
        raise ExperimentError(f"profile must be auto or worst, got {cfg.profile!r}")
    return sensitivity_profile(kernel, dist, rng=cfg.seed).certified()


def _exp_id(cfg) -> int:
    return _parallel.experiment_id(cfg.label)


def _fixed_design(cfg) -> Design:
    if cfg.design == "complete":
        return complete_design(cfg.n, cfg.m)
    if cfg.design == "partition":
        return partition_design(cfg.n, cfg.m)
    if cfg.design == "random":
        ss = np.random.SeedSequence(cfg.seed, spawn_key=(_exp_id(cfg),))
        return random_design(cfg.n, cfg.m, cfg.M, int(ss.generate_state(1)[0]))
    raise ExperimentError(f"unsupported fixed design {cfg.design!r}")


def _chunk_for(M: int, m: int) -> int:
    return max(1, (1 << 21) // (M * m))


def _simulate(cfg, kernel, dist, design: Design | None, M: int | None = None) -> np.ndarray:
    """``U_W`` for each replicate: fresh data, and a fresh design if ``design`` is None."""
    exp_id = _exp_id(cfg)
    n, m = cfg.n, kernel.degree
    M = design.M if design is not None else M

    def run(lo, hi):
        out = np.empty(hi - lo)
        for j, r in enumerate(range(lo, hi)):
            rng = _parallel.replicate_rng(cfg.seed, exp_id, r)
            data = dist.sample(rng, n)
            idx = design.indices if design is not None else sample_subsets(rng, n, m, M)
            out[j] = kernel.evaluate_batch(data[idx]).sum() / M
        return out

    chunk = _chunk_for(M, m)
    return np.concatenate(_parallel.map_chunks(run, cfg.replicates, cfg.threads, chunk))


def _setup(cfg):
    kernel = get_kernel(cfg.kernel)
    dist = get_distribution(cfg.dist)
    if kernel.dim != dist.dim:
        raise ExperimentError(f"kernel {kernel.name!r} takes {kernel.dim}-d points but "
                              f"{dist.name!r} is {dist.dim}-d")
    return kernel, dist, exact_theta(kernel, dist)


# ---------------------------------------------------------------------------
# experiments


def run_tail_validity(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Empirical ``P(U_W - theta > t)`` against the fixed-design tail bound."""
    kernel, dist, theta = _setup(cfg)
    prof = _profile(cfg, kernel, dist)
    design = _fixed_design(cfg)
    stats = design_stats(design)
    dev = _simulate(cfg, kernel, dist, design) - theta
    return [_freq_row("t", t, "P(U-theta>t)", dev > t, bound_incomplete_tail(stats, prof, t),
                      "<=") for t in cfg.t_grid]


def run_coverage(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Fraction of replicates with ``U_W - theta`` below the deviation bound.

    ``bound=incomplete``: fixed design, ``delta_grid`` levels.
    ``bound=random-design``: fresh design per replicate, level
    ``1 - delta1 - delta2``.
    """
    kernel, dist, theta = _setup(cfg)
    prof = _profile(cfg, kernel, dist)
    if cfg.bound == "incomplete":
        design = _fixed_design(cfg)
        stats = design_stats(design)
        dev = _simulate(cfg, kernel, dist, design) - theta
        return [_freq_row("delta", d, "P(U-theta<=eps)", dev <= bound_incomplete_delta(
            stats, prof, d), 1 - d, ">=") for d in cfg.delta_grid]
    if cfg.bound == "random-design":
        if not random_design_supported(cfg.n, cfg.M):
            raise ExperimentError(f"M={cfg.M} < ln(n)^2; the random-design bound is unsupported")
        eps = bound_random_design_delta(cfg.n, cfg.m, cfg.M, prof.sigma1_sq, prof.alpha,
                                        cfg.delta1, cfg.delta2)
        dev = _simulate(cfg, kernel, dist, None, cfg.M) - theta
        return [_freq_row("delta1+delta2", cfg.delta1 + cfg.delta2, "P(U-theta<=eps)",
                          dev <= eps, 1 - cfg.delta1 - cfg.delta2, ">=")]
    raise ExperimentError(f"coverage bound must be incomplete or random-design, got "
                          f"{cfg.bound!r}")


def run_subgauss(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Lower-tail checks for a ``[0, 1]``-valued kernel on a fixed design."""
    kernel, dist, theta = _setup(cfg)
    check_unit_range(kernel)
    design = _fixed_design(cfg)
    c = design_stats(design).c
    u = _simulate(cfg, kernel, dist, design)
    rows = [_freq_row("t", t, "P(E[U]-U>t)", theta - u > t,
                      bound_subgauss_lower_tail(cfg.m, c, theta, t), "<=")
            for t in cfg.t_grid]
    root = math.sqrt(theta)
    for d in cfg.delta_grid:
        ucb = np.array([bound_subgauss_sqrt(cfg.m, c, max(v, 0.0), d) for v in u])
        rows.append(_freq_row("delta", d, "P(sqrt(E[U])<=ucb)", root <= ucb, 1 - d, ">="))
    return rows


def run_design_concentration(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Violation rates of the high-probability bounds on C, sqrt(A), sqrt(B) for random designs."""
    n, m, M, delta = cfg.n, cfg.m, cfg.M, cfg.delta
    exp_id = _exp_id(cfg)

    def run(lo, hi):
        out = np.empty((hi - lo, 3))
        for j, r in enumerate(range(lo, hi)):
            rng = _parallel.replicate_rng(cfg.seed, exp_id, r)
            out[j] = abc(sample_subsets(rng, n, m, M), n)
        return out

    chunk = _chunk_for(M, m)
    res = np.concatenate(_parallel.map_chunks(run, cfg.replicates, cfg.threads, chunk))
    a, b, c = res.T
    L = math.log(1 / delta)
    c_bound = m / n + (math.sqrt(2 * m) + 3) / math.sqrt(M) * math.log(4 / delta)
    a_bound = math.sqrt(m * m / n) + (1 + 4 * math.sqrt(L)) * math.sqrt(m / M)
    b_bound = m * m / n + (1 + 4 * math.sqrt(L)) * m / math.sqrt(M)
    ea = expected_stats(n, m, M)
    se_a = float(a.std(ddof=1) / math.sqrt(a.size))
    return [
        _freq_row("delta", delta, "P(C>bound_C)", c > c_bound, delta / 4, "<="),
        _freq_row("delta", delta, "P(sqrt(A)>bound_A)", np.sqrt(a) > a_bound, delta, "<="),
        _freq_row("delta", delta, "P(sqrt(B)>bound_B)", np.sqrt(b) > b_bound, delta, "<="),
        ExperimentRow("M", M, "mean(A)", float(a.mean()), se_a, ea.a_exact, "==", 4 * se_a),
        ExperimentRow("M", M, "mean(B)<=E[B]_upper", float(b.mean()),
                      float(b.std(ddof=1) / math.sqrt(b.size)), ea.b_upper, "<=",
                      SE_SLACK * float(b.std(ddof=1) / math.sqrt(b.size))),
    ]


def efron_stein_quantities(values: np.ndarray, probs_1d: np.ndarray, n: int) -> dict:
    """Exact variance-chain quantities of ``f`` given on the grid ``support^n``.

    ``values`` is ``f`` flattened in C order over ``(s,) * n``; the
    coordinates are i.i.d. with atom probabilities ``probs_1d``.
    """
    s = probs_1d.size
    f = values.reshape((s,) * n)
    p = probs_1d

    def expect(t, axes_left):
        # contract every axis of t with p except the first ``axes_left``
        for _ in range(t.ndim - axes_left):
            t = t @ p
        return t

    mean = float(expect(f, 0))
    var = max(float(expect(f * f, 0)) - mean * mean, 0.0)
    cond, es, h = 0.0, 0.0, 0.0
    for k in range(n):
        fk = np.moveaxis(f, k, 0)
        g = expect(fk, 1)
        cond += float(p @ (g - mean) ** 2)
        d = fk[:, None] - fk[None, :]
        es += 0.5 * float(p @ expect(d * d, 2) @ p)
        for l in range(k + 1, n):
            fkl = np.moveaxis(f, (k, l), (0, 1))
            x = (fkl[:, None, :, None] - fkl[None, :, :, None]
                 - fkl[:, None, None, :] + fkl[None, :, None, :])
            q = expect(x * x, 4)
            h += 2 * float(np.einsum("a,b,c,d,abcd->", p, p, p, p, q))
    return {"sum_cond_var": cond, "var": var, "es": es, "H": h}


def _es_designs(cfg, kernel) -> list[Design]:
    n, m = cfg.n, kernel.degree
    if cfg.design == "complete":
        return [complete_design(n, m)]
    if cfg.design == "partition":
        return [partition_design(n, m)]
    out = []
    if cfg.design == "mixed":
        out.append(complete_design(n, m))
        if n % m == 0:
            out.append(partition_design(n, m))
    elif cfg.design != "random":
        raise ExperimentError(f"unsupported design {cfg.design!r}")
    exp_id = _exp_id(cfg)
    for i in range(cfg.designs):
        M = cfg.M if cfg.design == "random" else i + 1
        rng = _parallel.replicate_rng(cfg.seed, exp_id, i)
        out.append(Design(n, m, sample_subsets(rng, n, m, M), tag=f"random#{i}:{M}"))
    return out


def run_efron_stein_sandwich(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """Check ``sum Var E[f|X_k] <= Var f <= ES(f) <= sum Var E[f|X_k] + H/4`` exactly."""
    kernel, dist, _ = _setup(cfg)
    if not dist.finite:
        raise ExperimentError("the Efron-Stein check needs a finite distribution")
    rows = []
    for i, design in enumerate(_es_designs(cfg, kernel)):
        values, _, _ = exact_UW_values(kernel, dist, design)
        q = efron_stein_quantities(values, dist.probs, design.n)
        # a sum of independent terms makes the chain an identity
        additive = design.m == 1
        rel, tol = ("==", ES_EQ_TOL) if additive else ("<=", ES_TOL)
        label = f"{i}:{design.tag}:M={design.M}"
        rows += [
            ExperimentRow("design", i, f"sum_cond_var vs var [{label}]", q["sum_cond_var"], 0.0,
                          q["var"], rel, tol),
            ExperimentRow("design", i, f"var vs ES [{label}]", q["var"], 0.0, q["es"], rel, tol),
            ExperimentRow("design", i, f"ES vs sum_cond_var+H/4 [{label}]", q["es"], 0.0,
                          q["sum_cond_var"] + q["H"] / 4, rel, tol),
        ]
        if additive:
            rows.append(ExperimentRow("design", i, f"H [{label}]", q["H"], 0.0, 0.0, "==",
                                      ES_EQ_TOL))
    return rows


def run_budget_sweep(cfg: ExperimentConfig) -> list[ExperimentRow]:
    """RMSE of ``U_W`` as the budget ``M`` grows, with the random-design deviation bound."""
    kernel, dist, theta = _setup(cfg)
    prof = _profile(cfg, kernel, dist)
    n, m = cfg.n, cfg.m
    grid = cfg.M_grid or tuple(sorted({n, int(round(n * math.log(n))),
                                       int(round(n ** 1.5)), n * n}))
    rows, prev = [], None
    L2 = math.log(3 / cfg.delta2) ** 2
    third0 = None
    for M in grid:
        sub = ExperimentConfig(**dict(cfg.echo(), M=M, threads=cfg.threads))
        err = _simulate(sub, kernel, dist, None, M) - theta
        sq = err * err
        mse = float(sq.mean())
        rmse = math.sqrt(mse)
        se = float(sq.std(ddof=1) / math.sqrt(sq.size)) / (2 * rmse) if rmse > 0 else 0.0
        bound = bound_random_design_delta(n, m, M, prof.sigma1_sq, prof.alpha,
                                          cfg.delta1, cfg.delta2)
        if prev is None:
            rows.append(ExperimentRow("M", M, "rmse", rmse, se, bound, "<=", math.inf))
        else:
            slack = SE_SLACK * math.hypot(se, prev[1])
            rows.append(ExperimentRow("M", M, "rmse<=previous", rmse, se, prev[0], "<=", slack))
        third = (5 * prof.alpha * m + 9 * math.sqrt(m) + 4) * L2 / math.sqrt(M)
        if third0 is None:
            third0 = (third, grid[0])
        rows.append(ExperimentRow("M", M, "third_term", third, 0.0,
                                  third0[0] * math.sqrt(third0[1] / M), "==",
                                  1e-12 * third0[0]))
        prev = (rmse, se)
    return rows


KINDS = {
    "tail-validity": run_tail_validity,
    "coverage": run_coverage,
    "subgauss": run_subgauss,
    "design-concentration": run_design_concentration,
    "efron-stein": run_efron_stein_sandwich,
    "budget-sweep": run_budget_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> list[ExperimentRow]:
    return KINDS[cfg.kind](cfg)


# ---------------------------------------------------------------------------
# output

CSV_COLUMNS = ("kind", "kernel", "dist", "n", "m", "M", "design", "bound", "replicates",
               "seed", "param", "value", "quantity", "empirical", "se", "theoretical",
               "relation", "slack", "passed")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(cfg: ExperimentConfig, rows: list[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    echo = cfg.echo()
    for row in rows:
        d = dict(echo, **asdict(row))
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, rows: list[ExperimentRow], path) -> tuple[str, str]:
    """Write the CSV and a ``.json`` sidecar (config echo, seed, pass summary)."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(cfg, rows))
    side = path.rsplit(".", 1)[0] + ".json" if path.endswith(".csv") else path + ".json"
    with open(side, "w") as fh:
        json.dump({"config": cfg.echo(), "seed": cfg.seed, "rows": len(rows),
                   "all_passed": all(r.passed for r in rows)}, fh, indent=2)
        fh.write("\n")
    return path, side
