"""Command-line entry point: ``escape run | check | single``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness.config import EXPERIMENTS, ConfigError, load_spec
from .harness.runner import Job, run_one

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_CONFIG = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="escape", description="Saddle-escape experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one experiment and write CSV artifacts")
    r.add_argument("--exp", required=True, choices=EXPERIMENTS)
    r.add_argument("--config", help="flat key = value config file")
    r.add_argument("--out", default="results", help="output directory")
    r.add_argument("--seed-base", type=int, default=0)
    r.add_argument("--jobs", type=int, default=None, help="worker processes")

    c = sub.add_parser("check", help="run the numerical property checks")
    c.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    c.add_argument("--out", help="also write the check table here")

    s = sub.add_parser("single", help="one run, trace CSV to stdout or --out")
    s.add_argument("--family", default="quartic")
    s.add_argument("--dim", type=int, default=100)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--method", default="psd", choices=("psd", "gd", "pgd", "psd_probe", "psgd"))
    s.add_argument("--sigma2-ratio", type=float, default=0.0, help="psgd noise as sigma^2/eps^2")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--iter-cap", type=int, default=None)
    s.add_argument("--stride", type=int, default=100)
    s.add_argument("--out", help="directory for trace_<seed>.csv and episodes.csv")
    return ap


def cmd_run(args) -> int:
    from .harness.experiments import run_experiment
    from .harness.output import write_table

    try:
        spec = load_spec(args.exp, args.config, seed_base=args.seed_base)
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            spec.jobs = args.jobs
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    table = run_experiment(spec)
    out = write_table(table, args.out)
    print((out / "summary.txt").read_text(), end="")
    if args.exp == "lemma_checks" and not table.meta.get("all_passed", False):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_check(args) -> int:
    from .harness.checks import checks_table, format_checks, run_lemma_checks
    from .harness.config import make_spec
    from .harness.output import write_table

    results = run_lemma_checks(make_spec("lemma_checks", {"quick": args.quick}))
    print(format_checks(results))
    if args.out:
        write_table(checks_table(results), args.out)
    failed = [c.name for c in results if not c.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_single(args) -> int:
    from .oracle import ALIASES, FAMILIES

    family = ALIASES.get(args.family, args.family)
    if family not in FAMILIES or args.dim < 1 or args.eps <= 0 or not 0 < args.delta <= 1:
        print("invalid arguments for single run", file=sys.stderr)
        return EXIT_BAD_CONFIG
    job = Job(f"{family}:{args.dim}/{args.method}", args.seed, family, args.dim, args.method,
              args.eps, args.delta, iter_cap=args.iter_cap, stride=args.stride,
              sigma2=args.sigma2_ratio * args.eps**2)
    res = run_one(job)
    if res.error:
        print(f"run failed: {res.error}", file=sys.stderr)
        return 1
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"trace_{args.seed}.csv").write_text(res.trace_csv)
        lines = ["episode_id,f_enter,f_exit,decrease,steps,success,probe_id"]
        lines += [",".join([str(i), repr(e[0]), repr(e[1]), repr(e[2]), str(e[3]), str(int(e[4])),
                            str(e[5])]) for i, e in enumerate(res.episodes)]
        (out / "episodes.csv").write_text("\n".join(lines) + "\n")
    else:
        sys.stdout.write(res.trace_csv)
    print(f"# status={res.status} sosp={res.success} iterations={res.iterations} "
          f"episodes={len(res.episodes)} T={res.T}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "check": cmd_check, "single": cmd_single}[args.cmd]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
