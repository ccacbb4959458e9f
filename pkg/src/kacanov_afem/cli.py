"""Command-line front end.

    kacanov-afem run --problem ex1 --mark max:0.7 --out results/ex1
    kacanov-afem rates results/ex1/records.csv
    kacanov-afem audit [--only lemma-key-property --samples 500]
    kacanov-afem dump-mesh --domain lshape --uniform 2

Exit codes: 0 success, 1 failed audit, 2 solver failure, 64 usage error,
65 malformed or unusable CSV.
"""
import argparse
import logging
import sys
from pathlib import Path

from .audit import CHECKS, FAIL, run_checks
from .driver import MalformedCsv, RunAborted, RunConfig, fit_rate, read_csv, run_adaptive
from .marking import MarkingRule
from .mesh import dumps_mesh, make_lshape_mesh, make_square_mesh, uniform_refine
from .problems import PROBLEM_NAMES, catalog

EX_OK, EX_AUDIT, EX_SOLVER, EX_USAGE, EX_DATAERR = 0, 1, 2, 64, 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _marking(spec):
    try:
        return MarkingRule.parse(spec)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _iterations(spec):
    try:
        return tuple(int(s) for s in spec.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {spec!r}")


def build_parser():
    p = _Parser(prog="kacanov-afem", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the adaptive loop and write records.csv")
    r.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    r.add_argument("--mark", type=_marking, default=MarkingRule("maximum", 0.7),
                   help="global | max:THETA | doerfler:THETA (default max:0.7)")
    r.add_argument("--n-bisect", type=int, default=2,
                   help="bisections per marked element (default 2)")
    r.add_argument("--eta-tol", type=float, default=1e-6)
    r.add_argument("--max-dofs", type=int, default=500_000)
    r.add_argument("--max-iters", type=int, default=200)
    r.add_argument("--quad-order", type=int, default=5)
    r.add_argument("--cg-tol", type=float, default=1e-10)
    r.add_argument("--homogeneous", action="store_true",
                   help="replace the Dirichlet data by zero (same right-hand side)")
    r.add_argument("--dump-at", type=_iterations, default=(),
                   help="comma separated iterations at which to dump mesh and solution")
    r.add_argument("--out", type=Path, default=Path("results"))

    q = sub.add_parser("rates", help="fit the convergence rate of a records.csv")
    q.add_argument("csv", type=Path)
    q.add_argument("--column", default="h1_error", choices=("h1_error", "eta"))
    q.add_argument("--window", type=int, default=None, help="fit only the last N records")

    a = sub.add_parser("audit", help="run the invariant suite")
    a.add_argument("--only", action="append", choices=sorted(CHECKS), default=None)
    a.add_argument("--samples", type=int, default=500)
    a.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("dump-mesh", help="write an initial or uniformly refined mesh")
    d.add_argument("--domain", choices=("lshape", "square"), default=None)
    d.add_argument("--problem", choices=PROBLEM_NAMES, default=None)
    d.add_argument("--uniform", type=int, default=0, help="number of uniform bisection rounds")
    d.add_argument("--out", type=Path, default=None)
    return p


def cmd_run(args):
    try:
        config = RunConfig(args.problem, args.mark, args.n_bisect, args.eta_tol, args.max_dofs,
                           args.max_iters, args.quad_order, args.cg_tol, args.homogeneous,
                           args.out, args.dump_at)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    try:
        records = run_adaptive(config)
    except RunAborted as exc:
        print(f"solver failure: {exc} ({len(exc.records)} iterations written)", file=sys.stderr)
        return EX_SOLVER
    last = records[-1]
    err = "" if last.h1_error is None else f" h1_error={last.h1_error:.4e}"
    print(f"{config.problem} {config.mark}: {len(records)} iterations, dofs={last.dofs} "
          f"eta={last.eta:.4e}{err} -> {Path(args.out) / 'records.csv'}")
    return EX_OK


def cmd_rates(args):
    try:
        records = read_csv(args.csv)
    except (OSError, MalformedCsv) as exc:
        print(f"malformed CSV {args.csv}: {exc}", file=sys.stderr)
        return EX_DATAERR
    print(" ".join(f"{c:>12s}" for c in ("k", "dofs", "eta", "h1_error", "max_u")))
    for r in records:
        err = "-" if r.h1_error is None else f"{r.h1_error:.4e}"
        mx = "-" if r.max_u is None else f"{r.max_u:.4e}"
        print(f"{r.k:12d} {r.dofs:12d} {r.eta:12.4e} {err:>12s} {mx:>12s}")
    try:
        if args.window is not None:
            slope = fit_rate(records, window=args.window, column=args.column)
            print(f"slope of {args.column} vs dofs over last {args.window} records: {slope:.6f}")
        else:
            slope = fit_rate(records, column=args.column)
            print(f"slope of {args.column} vs dofs over all records: {slope:.6f}")
    except ValueError as exc:
        print(f"cannot fit a rate: {exc}", file=sys.stderr)
        return EX_DATAERR
    if args.window is None:
        try:
            decade = fit_rate(records, last_decade=True, column=args.column)
            print(f"slope of {args.column} vs dofs over final decade: {decade:.6f}")
        except ValueError:
            print("final decade holds fewer than 3 usable records; no slope")
    return EX_OK


def cmd_audit(args):
    failed = None
    for res in run_checks(args.only, args.samples, args.seed):
        print(res.line(), flush=True)
        if res.status == FAIL and failed is None:
            failed = res
    if failed is not None:
        print(f"first failure: {failed.check}[{failed.subject}]: {failed.detail}")
        return EX_AUDIT
    return EX_OK


def cmd_dump_mesh(args):
    if args.problem is not None:
        mesh = catalog(args.problem).make_mesh()
    else:
        mesh = make_square_mesh() if args.domain == "square" else make_lshape_mesh()
    if args.uniform:
        mesh, _ = uniform_refine(mesh, args.uniform)
    text = dumps_mesh(mesh)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EX_OK


COMMANDS = {"run": cmd_run, "rates": cmd_rates, "audit": cmd_audit, "dump-mesh": cmd_dump_mesh}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.command == "dump-mesh" and args.uniform < 0:
        parser.error("--uniform must be non-negative")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
