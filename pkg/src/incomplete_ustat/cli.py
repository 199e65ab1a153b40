"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 a bound's validity
condition fails (override with ``--force``), 3 an invariant or checked
inequality is violated.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys

import numpy as np

from . import bounds, designs, estimator, experiments, kernels, sensitivity

log = logging.getLogger("incomplete_ustat")

EXIT_OK, EXIT_USAGE, EXIT_VALIDITY, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so the exit code stays ours."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        log.info("wrote %s", out)
    else:
        print(text)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint32)[0])
    log.info("seed=%d", seed)
    return seed


def _load_profile(spec: str, kernel_name: str | None, dist_name: str | None, m: int, seed):
    if spec == "worst":
        return sensitivity.worst_case_profile(m)
    if spec.startswith("file:"):
        with open(spec[5:]) as fh:
            return sensitivity.SensitivityProfile.from_dict(json.load(fh))
    if spec == "auto":
        if not (kernel_name and dist_name):
            raise UsageError("--profile auto needs --kernel and --dist")
        k = kernels.get_kernel(kernel_name)
        if k.degree != m:
            raise UsageError(f"--m {m} does not match the degree {k.degree} of {kernel_name!r}")
        return sensitivity.profile(k, kernels.get_distribution(dist_name), rng=seed).certified()
    raise UsageError(f"unknown --profile {spec!r}; use worst, auto or file:<json>")


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(args) -> int:
    kernel = kernels.get_kernel(args.kernel)
    data = estimator.load_dataset(args.data, kernel.dim, header=args.header)
    seed = _resolve_seed(args.seed)
    design = designs.parse_design_spec(args.design, data.shape[0], kernel.degree, seed)
    est = estimator.estimate_incomplete(kernel, data, design, threads=args.threads)
    d = est.to_dict()
    if d["seed"] is None:
        d["seed"] = seed
    _emit(d, args.out)
    return EXIT_OK


def cmd_design_stats(args) -> int:
    seed = _resolve_seed(args.seed)
    design = designs.parse_design_spec(args.design, args.n, args.m, seed)
    st = designs.design_stats(design)
    out = {"n": design.n, "m": design.m, "M": design.M, "design": design.tag,
           "seed": design.seed if design.seed is not None else seed,
           "A": st.a, "B": st.b, "C": st.c}
    if args.counts:
        out["R"] = list(st.r)
        out["R_pair"] = {f"{k},{l}": v for (k, l), v in st.r_pair.items()}
    if design.M > 0 and design.n > 1:
        ex = designs.expected_stats(design.n, design.m, design.M)
        out["expected_random"] = ex._asdict()
    if args.save:
        designs.save_design(design, args.save)
        log.info("saved design to %s", args.save)
    _emit(out, args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    kernel = kernels.get_kernel(args.kernel)
    dist = kernels.get_distribution(args.dist)
    seed = _resolve_seed(args.seed)
    if args.exact:
        method, n_mc = "exact", 200_000
    elif args.mc:
        method, n_mc = "mc", args.mc
    else:
        method, n_mc = "auto", 200_000
    prof = sensitivity.profile(kernel, dist, method=method, rng=seed, n_mc=n_mc)
    d = prof.to_dict()
    d.update(kernel=kernel.name, dist=dist.name, seed=seed)
    d["certified_for_bounds"] = prof.certified().to_dict()
    problems = prof.check()
    _emit(d, args.out)
    if problems:
        for p in problems:
            log.error("invariant violated: %s", p)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_bound(args) -> int:
    seed = _resolve_seed(args.seed)
    if (args.t is None) == (args.delta is None) and args.which != "random-design":
        raise UsageError("give exactly one of --t and --delta")
    prof = _load_profile(args.profile, args.kernel, args.dist, args.m, seed)
    stats = None
    if args.which in ("incomplete", "subgauss"):
        spec = args.design or (f"random:{args.M}" if args.M else None)
        if spec is None:
            raise UsageError(f"--which {args.which} needs --design or --M")
        design = designs.parse_design_spec(spec, args.n, args.m, seed)
        stats = designs.design_stats(design)
    M = args.M if args.M is not None else (stats.m_total if stats else None)
    rep = bounds.report(args.which, n=args.n, m=args.m, profile=prof, t=args.t,
                        delta=args.delta, M=M, stats=stats, delta1=args.delta1,
                        delta2=args.delta2, u_observed=args.u, relaxed=args.relaxed)
    d = rep.to_dict()
    d["seed"] = seed
    _emit(d, args.out)
    if not rep.valid:
        failed = [k for k, v in rep.flags.items() if not v]
        msg = f"validity condition(s) not met: {', '.join(failed)}"
        if args.force:
            log.warning("%s (continuing because of --force)", msg)
        else:
            log.error("%s; pass --force to accept the value anyway", msg)
            return EXIT_VALIDITY
    return EXIT_OK


def _parse_grid(spec: str) -> dict:
    grid = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, sep, vals = part.partition("=")
        key = key.strip()
        if not sep or key not in ("n", "m", "t", "sigma1", "sigma_m"):
            raise UsageError(f"bad grid entry {part!r}; keys are n, m, t, sigma1, sigma_m")
        try:
            grid[key] = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"non-numeric value in grid entry {part!r}") from None
    missing = {"n", "m", "t"} - grid.keys()
    if missing:
        raise UsageError(f"grid lacks {', '.join(sorted(missing))}")
    grid.setdefault("sigma1", [1.0])
    grid.setdefault("sigma_m", [1.0])
    return grid


COMPARE_COLUMNS = ("n", "m", "t", "sigma1_sq", "sigma_m_sq", "hoeffding", "arcones",
                   "variance_bernstein", "complete_exact_b", "complete_relaxed_b")


def cmd_compare(args) -> int:
    grid = _parse_grid(args.grid)
    rows = []
    for n, m, t, s1, sm in itertools.product(grid["n"], grid["m"], grid["t"], grid["sigma1"],
                                             grid["sigma_m"]):
        n, m = int(n), int(m)
        if not 1 <= m < n:
            raise UsageError(f"need 1 <= m < n, got n={n}, m={m}")
        if not 0 <= s1 <= sm <= 1:
            raise UsageError(f"need 0 <= sigma1 <= sigma_m <= 1, got {s1}, {sm}")
        # conditional variances of order 2..m are taken at sigma_m^2, their largest
        # value consistent with the grid point
        sk = (s1,) + (sm,) * (m - 1)
        worst = sensitivity.worst_case_profile(m)
        prof = sensitivity.SensitivityProfile(s1, sm, worst.beta, worst.gamma, worst.alpha,
                                              sigma_k_sq=sk, provenance=worst.provenance)
        rows.append({
            "n": n, "m": m, "t": t, "sigma1_sq": s1, "sigma_m_sq": sm,
            "hoeffding": bounds.bound_hoeffding_tail(n, m, sm, t),
            "arcones": bounds.bound_arcones_tail(n, m, s1, t),
            "variance_bernstein": bounds.bound_variance_bernstein_tail(
                n, m, bounds.variance_complete(n, m, sk), t),
            "complete_exact_b": bounds.bound_complete_tail(n, m, prof, t),
            "complete_relaxed_b": bounds.bound_complete_tail(n, m, prof, t, relaxed=True),
        })
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, COMPARE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    finally:
        if args.out:
            fh.close()
            log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "threads": args.threads}
    if args.config:
        cfg = experiments.load_config(args.config, **overrides)
    else:
        cfg = experiments.ExperimentConfig(kind=args.kind)
        cfg.threads = args.threads
        if args.seed is not None:
            cfg.seed = args.seed
    if cfg.kind != args.kind:
        raise UsageError(f"config kind {cfg.kind!r} differs from command kind {args.kind!r}")
    log.info("seed=%d", cfg.seed)
    rows = experiments.run_experiment(cfg)
    out = args.out or cfg.out
    if out:
        csv_path, side = experiments.write_outputs(cfg, rows, out)
        log.info("wrote %s and %s", csv_path, side)
    else:
        sys.stdout.write(experiments.rows_to_csv(cfg, rows))
    failed = [r for r in rows if not r.passed]
    for r in failed:
        log.error("check failed: %s=%s %s: %r %s %r (slack %r)", r.param, r.value, r.quantity,
                  r.empirical, r.relation, r.theoretical, r.slack)
    return EXIT_INVARIANT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (random if omitted)")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="incomplete-ustat",
                     description="Incomplete U-statistics, design statistics and "
                                 "concentration bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate theta from a data CSV")
    p.add_argument("--kernel", required=True, help="built-in kernel name")
    p.add_argument("--data", required=True, help="CSV, one observation per row")
    p.add_argument("--design", default="complete",
                   help="complete | partition | random:M[:seed] | file:path")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("design-stats", help="A, B, C and occupation counts of a design")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--design", required=True,
                   help="complete | partition | random:M[:seed] | file:path")
    p.add_argument("--counts", action="store_true", help="include R_k and R_kl")
    p.add_argument("--save", default=None, help="write the design to this file")
    _common(p)
    p.set_defaults(func=cmd_design_stats)

    p = sub.add_parser("sensitivity", help="sigma_k^2, beta, gamma, alpha with provenance")
    p.add_argument("--kernel", required=True)
    p.add_argument("--dist", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="require exact enumeration")
    g.add_argument("--mc", type=int, default=None, metavar="N",
                   help="force Monte Carlo with N samples")
    _common(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("bound", help="evaluate one bound")
    p.add_argument("--which", required=True, choices=bounds.BOUND_NAMES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--M", type=int, default=None, help="design size")
    p.add_argument("--t", type=float, default=None, help="deviation (tail form)")
    p.add_argument("--delta", type=float, default=None, help="failure probability")
    p.add_argument("--delta1", type=float, default=None)
    p.add_argument("--delta2", type=float, default=None)
    p.add_argument("--profile", default="worst", help="worst | auto | file:<json>")
    p.add_argument("--kernel", default=None, help="kernel for --profile auto")
    p.add_argument("--dist", default=None, help="distribution for --profile auto")
    p.add_argument("--design", default=None, help="design spec for incomplete/subgauss")
    p.add_argument("--u", type=float, default=None, help="observed or expected U_W (subgauss)")
    p.add_argument("--relaxed", action="store_true", help="complete bound with B = m^4/n^2")
    p.add_argument("--force", action="store_true", help="accept unmet validity conditions")
    _common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compare", help="baseline and new tail bounds on a grid, as CSV")
    p.add_argument("--grid", required=True, help='e.g. "n=100,1000;m=2,3;t=0.1,0.5;sigma1=0.25"; '
                   'optional sigma_m (default 1)')
    _common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="run a Monte Carlo or enumeration check")
    p.add_argument("kind", choices=sorted(experiments.KINDS))
    p.add_argument("--config", default=None, help="key=value config file")
    _common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(str(e))
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    if args.threads < 1:
        sys.stderr.write("--threads must be at least 1\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except bounds.BoundError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_VALIDITY if "unsupported" in str(e) else EXIT_USAGE
    except (ValueError, KeyError, OSError, IndexError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
