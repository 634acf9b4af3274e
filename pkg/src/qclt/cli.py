"""Command line entry point: ``qclt <command> [options]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 self-test
failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import InvalidInput, NumericalFailure, QcltError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_rates(args) -> int:
    from .experiments import ScanConfig, parse_n_grid, rate_scan, records_csv, write_csv

    cfg = ScanConfig(args.state, parse_n_grid(args.n_grid), tuple(args.metrics.split(",")),
                     args.route, args.cutoff, args.radius, args.step, args.seed, args.out,
                     not args.no_timing)
    records = rate_scan(cfg)
    if args.out:
        write_csv(records, args.out, cfg)
    else:
        sys.stdout.write(records_csv(records, cfg))
    return EXIT_OK


def cmd_counterexample(args) -> int:
    from .experiments import ScanConfig, counterexample_scan, parse_n_grid, records_csv, write_csv

    grid = parse_n_grid(args.n_grid)
    records, verdict = counterexample_scan(args.kind, args.theta, grid, args.cutoff, timing=not args.no_timing)
    cfg = ScanConfig(f"mixture:kind={args.kind},theta={args.theta}", grid, ("trace", "relent", "hs"),
                     "char", args.cutoff, timing=not args.no_timing)
    if args.out:
        write_csv(records, args.out, cfg)
    else:
        sys.stdout.write(records_csv(records, cfg))
    scaled = "sqrt_n_scaled" if args.kind == "trace" else "n_scaled"
    print(f"# {scaled} increasing: {'yes' if verdict else 'no'}", file=sys.stderr)
    return EXIT_OK


def cmd_bound_audit(args) -> int:
    from .experiments import audit_json, bound_audit

    report = bound_audit(args.seed, args.count, args.cutoff)
    _emit(audit_json(report), args.out)
    if report["failures"]:
        print(f"bound failures at {report['failures']}", file=sys.stderr)
    return EXIT_OK


def cmd_edgeworth(args) -> int:
    from .edgeworth import edgeworth_polynomials, weyl_cumulants
    from .states import parse_state

    rho = parse_state(args.state).state
    q = weyl_cumulants(rho, args.order)
    out = {"state": args.state, "order": args.order, "cumulants": q.as_json()}
    r_max = min(args.order - 2, 2)
    if r_max >= 1:
        polys = edgeworth_polynomials(q, r_max)
        out["polynomials"] = {
            str(p.r): {f"{a},{b}": [float(c.real), float(c.imag)] for (a, b), c in sorted(p.terms.items())}
            for p in polys
        }
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .experiments import selftest

    results = selftest()
    for r in results:
        print(f"{'PASS' if r['ok'] else 'FAIL'} {r['name']}: {r['detail']} ({r['seconds']:.1f} s)")
    return EXIT_OK if all(r["ok"] for r in results) else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qclt", description="Quantum central limit experiments on truncated Fock spaces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("rates", help="distance of the n-fold convolution from the Gaussification")
    r.add_argument("--state", required=True)
    r.add_argument("--n-grid", default="16:4096:x2")
    r.add_argument("--metrics", default="trace,relent")
    r.add_argument("--route", default="diagonal")
    r.add_argument("--cutoff", type=int, default=64)
    r.add_argument("--radius", type=float, default=None)
    r.add_argument("--step", type=float, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.add_argument("--no-timing", action="store_true", help="write wall_ms = 0 for byte-identical reruns")
    r.set_defaults(func=cmd_rates)

    c = sub.add_parser("counterexample", help="scaled distances for the heavy-tailed mixtures")
    c.add_argument("--kind", choices=("trace", "relent"), required=True)
    c.add_argument("--theta", type=float, default=0.5)
    c.add_argument("--n-grid", default="64:4096:x2")
    c.add_argument("--cutoff", type=int, default=1024)
    c.add_argument("--out")
    c.add_argument("--no-timing", action="store_true")
    c.set_defaults(func=cmd_counterexample)

    b = sub.add_parser("bound-audit", help="check the relative-entropy bound on random states")
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--count", type=int, default=50)
    b.add_argument("--cutoff", type=int, default=16)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound_audit)

    e = sub.add_parser("edgeworth", help="Weyl cumulants and correction polynomials of a state")
    e.add_argument("--state", required=True)
    e.add_argument("--order", type=int, default=4)
    e.add_argument("--out")
    e.set_defaults(func=cmd_edgeworth)

    s = sub.add_parser("selftest", help="run the invariant suite")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QcltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
