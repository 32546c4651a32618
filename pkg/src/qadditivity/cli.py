"""Command-line front end.

    qadd nu --channel ch.json --p 2
    qadd capacity --channel ch.json --units bits
    qadd verify conjecture1 --p 2 --K 3 --trials 1000 --seed 42

Exit codes: 0 success, 1 violation found (a reproduction file is written),
2 invalid input, 3 non-convergence or inconclusive result.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from . import channels as ch
from .capacity import chi_star
from .errors import InvalidInput, InvalidParameter
from .purity import nu_p
from .sweep import CHECKS, SweepParams, run_sweep, summarize, write_candidate

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID, EXIT_INCONCLUSIVE = 0, 1, 2, 3
COLUMNS = ("check_name", "instance_seed", "lhs", "rhs", "gap", "pass", "tolerance")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def fmt_num(x: float) -> str:
    return f"{x:.15g}"


def fmt_gap(x: float) -> str:
    return f"{x:.14e}" if math.isfinite(x) else fmt_num(x)


def _json_num(x):
    x = float(x)
    return float(fmt_num(x)) if math.isfinite(x) else str(x)


def _load(path) -> ch.Channel:
    try:
        phi = ch.load_channel(path)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    rep = ch.is_cptp(phi)
    if not rep:
        raise InvalidInput(
            f"{path}: not a channel (min Choi eigenvalue {rep.min_choi_eigenvalue:.3e}, "
            f"trace residual {rep.tp_residual:.3e})"
        )
    return phi


def _emit(record: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(record, indent=1) + "\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(record.keys())
        w.writerow(record.values())


def cmd_nu(args, out=None) -> int:
    out = out or sys.stdout
    phi = _load(args.channel)
    res = nu_p(phi, args.p, restarts=args.restarts, seed=args.opt_seed)
    record = {
        "value": _json_num(res.value),
        "p": args.p,
        "converged": res.converged,
        "restarts_used": res.restarts_used,
        "grad_norm": _json_num(res.grad_norm),
    }
    if args.format == "json":
        record["argmax_state"] = ch.encode_matrix(res.argmax_state)
    _emit(record, args.format, out)
    return EXIT_OK if res.converged else EXIT_INCONCLUSIVE


def cmd_capacity(args, out=None) -> int:
    out = out or sys.stdout
    phi = _load(args.channel)
    res = chi_star(phi, restarts=args.restarts, tol=args.tol, seed=args.opt_seed)
    scale = 1.0 / math.log(2) if args.units == "bits" else 1.0
    record = {
        "chi_star": _json_num(res.chi_star * scale),
        "units": args.units,
        "duality_gap": _json_num(res.duality_gap * scale),
        "converged": bool(res.duality_gap <= args.tol),
        "rounds": res.rounds,
    }
    if args.format == "json":
        record["ensemble"] = {
            "probs": [_json_num(p) for p in res.ensemble.probs],
            "states": [ch.encode_matrix(s) for s in res.ensemble.states],
        }
        record["avg_output"] = ch.encode_matrix(res.avg_output)
    _emit(record, args.format, out)
    return EXIT_OK if res.duality_gap <= args.tol else EXIT_INCONCLUSIVE


def report_rows(reports) -> list:
    return [r for rep in reports for r in rep.flatten()]


def render_reports(reports, fmt: str) -> str:
    rows = report_rows(reports)
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([r.check_name, r.instance_seed, fmt_num(r.lhs), fmt_num(r.rhs), fmt_gap(r.gap),
                        "true" if r.passed else "false", fmt_num(r.tolerance)])
    else:
        docs = []
        for r in rows:
            d = r.row()
            for key in ("lhs", "rhs", "gap", "tolerance"):
                d[key] = _json_num(d[key])
            d["inconclusive"] = r.inconclusive
            docs.append(d)
        buf.write(json.dumps(docs, indent=1) + "\n")
    return buf.getvalue()


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    if args.check not in CHECKS:
        raise InvalidParameter(f"unknown check {args.check!r}; choose from {', '.join(CHECKS)}")
    params = SweepParams(p=args.p, K=args.K, family=args.family, regime=args.regime, restarts=args.restarts)
    reports = run_sweep(args.check, args.trials, args.seed, params, args.parallelism)
    out.write(render_reports(reports, args.format))
    s = summarize(reports)
    print(
        f"{args.check}: {s.trials} instances, {s.passed} passed, {s.violations} violations, "
        f"{s.inconclusive} inconclusive, min gap {fmt_gap(s.min_gap)}",
        file=sys.stderr,
    )
    failing = [r for r in reports if not r.all_passed and not r.any_inconclusive]
    for r in failing:
        print(f"violation candidate written to {write_candidate(r, args.out_dir)}", file=sys.stderr)
    if failing:
        return EXIT_VIOLATION
    return EXIT_INCONCLUSIVE if s.inconclusive else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qadd", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, restarts, fmt):
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--restarts", type=int, default=restarts)

    p_nu = sub.add_parser("nu", help="maximal output p-norm of a channel")
    p_nu.add_argument("--channel", required=True)
    p_nu.add_argument("--p", type=float, required=True)
    p_nu.add_argument("--opt-seed", type=int, default=0, help="seed for random restarts (default 0)")
    common(p_nu, 64, "json")
    p_nu.set_defaults(func=cmd_nu)

    p_cap = sub.add_parser("capacity", help="Holevo capacity chi* with a duality-gap certificate")
    p_cap.add_argument("--channel", required=True)
    p_cap.add_argument("--tol", type=float, default=1e-6)
    p_cap.add_argument("--units", choices=("nats", "bits"), default="nats")
    p_cap.add_argument("--opt-seed", type=int, default=0)
    common(p_cap, 16, "json")
    p_cap.set_defaults(func=cmd_capacity)

    p_ver = sub.add_parser("verify", help="seeded sweep of one check")
    p_ver.add_argument("check", help=", ".join(CHECKS))
    p_ver.add_argument("--trials", type=int, default=100)
    p_ver.add_argument("--seed", type=int, required=True, help="master seed (required)")
    p_ver.add_argument("--p", type=float)
    p_ver.add_argument("--K", type=int)
    p_ver.add_argument("--family", help="channel family, e.g. arbitrary, condition, unital, cq, qc, depolarizing")
    p_ver.add_argument("--regime", choices=("mixed", "interior", "boundary"), default="mixed")
    p_ver.add_argument("--parallelism", type=int, help="worker processes (default: $QADD_WORKERS or 1)")
    p_ver.add_argument("--out-dir", default="candidates", help="where violation candidates are written")
    common(p_ver, None, "csv")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (InvalidInput, InvalidParameter) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
