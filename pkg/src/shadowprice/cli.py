"""Command-line front end.

Exit status: 0 on success, 1 on solver failure (a JSON diagnostic is
written instead of the report), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from .audit import UNITS, cost_estimate_x, surface_grid, table1, true_marginal_cost
from .exceptions import ConvergenceError, ShadowPriceError
from .nlp import CONSTRAINT_NAMES
from .orchard import Formulation, as_offsets
from .sensitivity import compensation_delta, compensation_sweep, fd_shadow_price
from .solver import SolveOptions, foc_report, solve

COMMANDS = ("solve", "table1", "foc", "sensitivity", "compensate", "surface")


# ---------------------------------------------------------------------------
# formatting


def fmt(v) -> str:
    """17 significant digits; NaN and infinities become ``nan``/``inf`` tokens."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _json_value(v, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in v):
            return "[" + ", ".join(_json_value(x, indent, level + 1) for x in v) + "]"
        items = [pad + _json_value(x, indent, level + 1) for x in v]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if v is None or isinstance(v, bool) or isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text with fixed float formatting."""
    return _json_value(obj, indent, 0) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (int, str)):
        return v
    return fmt(v)


# ---------------------------------------------------------------------------
# argument parsing


def _finite_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def _positive_float(text):
    v = _finite_float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError(f"must be >= 2: {text!r}")
    return v


def _offset(text):
    name, sep, value = text.partition("=")
    name = name.strip().upper()
    if not sep or name not in CONSTRAINT_NAMES:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {', '.join(CONSTRAINT_NAMES)}: {text!r}")
    return name, _finite_float(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--variant", choices=[f.value for f in Formulation], default="a",
                        help="formulation: a=base, b=stock-based flies, c=stock-based consumption, d=both")
    common.add_argument("--tol", type=_positive_float, default=1e-12, help="Newton gradient tolerance")
    common.add_argument("--grid", type=_count, default=256, help="seed grid resolution")
    common.add_argument("--eps", type=_positive_float, default=1e-3, help="finite-difference step")
    common.add_argument("--delta", type=_finite_float, default=1e-3, help="compensation perturbation")
    common.add_argument("--x", type=_finite_float, default=None,
                        help="compensation price (default: recovered -xi1/lambda1)")
    common.add_argument("--n", type=_count, default=200, help="surface resolution")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="output path (default: standard output)")
    common.add_argument("--offset", type=_offset, action="append", default=[], metavar="NAME=VALUE",
                        help="add VALUE to the right-hand side of constraint NAME (repeatable)")

    parser = argparse.ArgumentParser(prog="shadowprice", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve one formulation and report the optimum and multipliers",
        "table1": "cost estimate -xi1/lambda1 for all four formulations",
        "foc": "first-order condition and constraint residuals at the optimum",
        "sensitivity": "recovered multipliers versus perturbed re-solves",
        "compensate": "utility change when flies and compensating consumption are added together",
        "surface": "reduced objective on a lattice over the unit square",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


# ---------------------------------------------------------------------------
# commands


def solution_report(sol) -> dict:
    st = sol.state
    return {
        "variant": sol.variant.value,
        "mu": sol.decision.mu,
        "s": sol.decision.s,
        "c1": st.c1,
        "c2": st.c2,
        "e1": st.e1,
        "e2": st.e2,
        "objective": sol.objective,
        "multipliers": sol.multipliers.as_dict(),
        "foc_residual_inf": sol.stationarity_residual_inf,
        "constraint_residual_inf": sol.constraint_residual_inf,
        "cost_estimate_x": cost_estimate_x(sol),
        "true_marginal_cost": true_marginal_cost(sol.decision.mu),
        "iterations": sol.iterations,
    }


def _flatten(report):
    out = {}
    for k, v in report.items():
        if isinstance(v, dict):
            out.update(v)
        else:
            out[k] = v
    return out


def cmd_solve(args, variant, offsets, opts):
    report = solution_report(solve(variant, offsets, opts))
    if args.format == "json":
        return dumps(report)
    flat = _flatten(report)
    return _csv(list(flat), [[_cell(v) for v in flat.values()]])


def cmd_table1(args, variant, offsets, opts):
    report = table1(opts, fd_eps=args.eps)
    rows = []
    for row in report.rows:
        m = row.solution.multipliers
        rows.append({
            "variant": row.variant.value,
            "formulation": row.variant.label,
            "cost_estimate_x": row.cost_estimate_x,
            "fd_cost_estimate": row.fd_cost_estimate,
            "deviation": row.deviation,
            "lambda1": m.lambda1,
            "xi1": m.xi1,
        })
    if args.format == "json":
        return dumps({
            "units": UNITS,
            "mu": report.mu,
            "true_marginal_cost": report.true_marginal_cost,
            "fd_eps": report.fd_eps,
            "tol_grad": report.tol_grad,
            "rows": rows,
        })
    header = ["variant", "formulation", "cost_estimate_x", "fd_cost_estimate", "true_marginal_cost", "deviation"]
    body = [
        [r["variant"], r["formulation"], f"{r['cost_estimate_x']:.3f}", _cell(r["fd_cost_estimate"]),
         fmt(report.true_marginal_cost), fmt(r["deviation"])]
        for r in rows
    ]
    return _csv(header, body)


def cmd_foc(args, variant, offsets, opts):
    sol = solve(variant, offsets, opts)
    res = foc_report(sol)
    if args.format == "json":
        return dumps({
            "variant": variant.value,
            "residuals": res,
            "max_abs": max(abs(v) for v in res.values()),
        })
    return _csv(["name", "residual"], [[k, fmt(v)] for k, v in res.items()])


def cmd_sensitivity(args, variant, offsets, opts):
    sol = solve(variant, offsets, opts)
    rows = []
    for name in CONSTRAINT_NAMES:
        fd = fd_shadow_price(variant, name, args.eps, offsets, opts)
        mult = sol.multipliers[name]
        rows.append({"constraint": name, "multiplier": mult, "fd": fd.value,
                     "abs_error": abs(fd.value - mult), "v_plus": fd.v_plus, "v_minus": fd.v_minus})
    if args.format == "json":
        return dumps({"variant": variant.value, "eps": args.eps, "rows": rows})
    return _csv(list(rows[0]), [[_cell(v) for v in r.values()] for r in rows])


def cmd_compensate(args, variant, offsets, opts):
    if any(offsets):
        raise ValueError("compensate runs around the unperturbed problem; --offset is not supported")
    sol = solve(variant, None, opts)
    x = cost_estimate_x(sol) if args.x is None else args.x
    dv = compensation_delta(variant, x, args.delta, opts)
    sweep = compensation_sweep(variant, x, opts=opts)
    if args.format == "json":
        return dumps({
            "variant": variant.value,
            "x": x,
            "delta": args.delta,
            "delta_v": dv,
            "first_order_xi1_delta": sol.multipliers.xi1 * args.delta,
            "sweep": {
                "deltas": list(sweep.deltas),
                "delta_v": list(sweep.delta_v),
                "delta_v_over_delta_sq": list(sweep.curvature),
                "ratios": list(sweep.ratios),
                "exact": sweep.exact,
                "quadratic": sweep.quadratic,
            },
        })
    rows = [[fmt(args.delta), fmt(dv), fmt(abs(dv) / args.delta**2) if args.delta else "nan"]]
    rows += [[fmt(d), fmt(v), fmt(c)] for d, v, c in zip(sweep.deltas, sweep.delta_v, sweep.curvature)]
    return _csv(["delta", "delta_v", "abs_delta_v_over_delta_sq"], rows)


def cmd_surface(args, variant, offsets, opts):
    grid = surface_grid(args.n, variant, offsets)
    if args.format == "json":
        return dumps({"n": args.n, "variant": variant.value, "columns": ["mu", "s", "f"],
                      "rows": [list(r) for r in grid]})
    return _csv(["mu", "s", "f"], [[fmt(v) for v in r] for r in grid])


HANDLERS = {
    "solve": cmd_solve,
    "table1": cmd_table1,
    "foc": cmd_foc,
    "sensitivity": cmd_sensitivity,
    "compensate": cmd_compensate,
    "surface": cmd_surface,
}


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "sensitivity" and not 1e-6 <= args.eps <= 1e-2:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: --eps must lie in [1e-6, 1e-2]", file=sys.stderr)
        return 2
    variant = Formulation.from_code(args.variant)
    offsets = as_offsets(dict(args.offset)) if args.offset else as_offsets(None)
    opts = SolveOptions(grid_n=args.grid, tol_grad=args.tol)
    try:
        text = HANDLERS[args.command](args, variant, offsets, opts)
    except ConvergenceError as exc:
        _write(dumps(exc.to_dict()), args.out)
        return 1
    except (ShadowPriceError, ValueError) as exc:
        _write(dumps({"error": type(exc).__name__, "message": str(exc)}), args.out)
        return 1
    _write(text, args.out)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
