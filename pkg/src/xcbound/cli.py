"""Command-line front end.

Exit status: 0 on success, 1 when a numerical check or certificate fails,
2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .config import DEFAULTS

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad input detected after argument parsing."""


# -- output ----------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return str(v)
        return f"{v:.10g}"
    return str(v)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def render(rows, fmt, schema, meta=None, title=None):
    """Rows of dicts as JSON, CSV or an aligned text table."""
    if fmt == "json":
        doc = {"schema": schema, **(meta or {}), "rows": rows}
        return json.dumps(_json_safe(doc), indent=2) + "\n"
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells)
    if meta:
        lines.append("")
        lines.extend(f"{k}: {_fmt(v)}" for k, v in meta.items())
    return "\n".join(lines) + "\n"


def emit(text, output):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot_dir(args):
    if not args.plot_dir:
        return None
    os.makedirs(args.plot_dir, exist_ok=True)
    return args.plot_dir


def _float_list(text):
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


# -- subcommands -----------------------------------------------------------------------


def cmd_constants(args):
    from .constants import build_table, check_table

    table = build_table(include_supporting=args.all)
    checks = {r.name: r for r in check_table(table, args.tolerance_scale)}
    rows = []
    for row in table.rows():
        if args.check:
            c = checks[row["name"]]
            row = {**row, "expected": c.expected, "tolerance": c.tolerance, "match": c.passed}
        rows.append(row)
    ok = all(c.passed for c in checks.values())
    if args.format == "json" and not args.check:
        text = table.to_json() + "\n"
    elif args.format == "csv" and not args.check:
        text = table.to_csv()
    else:
        text = render(rows, args.format, "xcbound.constants/1", {"all_match": ok})
    emit(text, args.output)
    if (plots := _plot_dir(args)) is not None:
        from . import plotting

        plotting.kernel_profiles(plots)
        plotting.k_curve_figure(plots)
    return EXIT_OK if ok else EXIT_FAIL


def _load_density(args):
    from . import density as dn

    if args.analytic:
        params = {}
        for item in args.param or []:
            key, sep, val = item.partition("=")
            if not sep:
                raise UsageError(f"--param expects key=value, got {item!r}")
            params[key] = val
        return dn.from_spec({"type": args.analytic, "parameters": params, "N": args.N}), {}
    if not args.input:
        raise UsageError("give a density file or --analytic TYPE")
    if args.input.endswith(".cube") or args.input.endswith(".cub"):
        ingest = dn.parse_cube(args.input, clamp_negative=args.clamp_negative)
        return ingest.field, {"clamped_voxels": ingest.clamped}
    return dn.load_spec(args.input), {}


def cmd_bound(args):
    from . import functionals as fn

    field_, info = _load_density(args)
    values = fn.FunctionalValues.of(field_)
    if not field_.is_radial:
        ratio = fn.grad13_refinement_ratio(field_) if min(field_.values.shape) >= 8 else math.nan
        info["grad13_refinement_ratio"] = ratio
        info["grad13_divergent"] = bool(ratio > DEFAULTS.grad13_divergence_ratio)
    else:
        info["grad13_divergent"] = not math.isfinite(values.f_grad13_l2)
    variants = [args.variant] if args.variant else list(fn.VARIANTS)
    reports = [fn.evaluate_bound(values, v, alpha=args.alpha if v not in ("classic_168", "classic_164")
                                 else None, label=field_.label)
               for v in variants
               if args.alpha is None or v in ("grad_l1", "grad13_l2") or args.variant]
    if args.format == "json":
        doc = {"schema": "xcbound.bound/1", "density": field_.label, "particle_number": field_.particle_number,
               **info, "reports": [r.to_dict() for r in reports]}
        text = json.dumps(_json_safe(doc), indent=2) + "\n"
    else:
        rows = [{"variant": r.variant, "alpha": r.alpha, "constant_used": r.constant_used,
                 "bound_value": r.bound_value, "clamped": r.clamped, "unclamped_value": r.unclamped_value}
                for r in reports]
        meta = {"density": field_.label, "particle_number": field_.particle_number,
                "f_rho43": values.f_rho43, "f_grad_l1": values.f_grad_l1, "f_grad13_l2": values.f_grad13_l2}
        if field_.is_radial:
            meta["direct_coulomb"] = fn.direct_coulomb(field_)
        meta.update(info)
        text = render(rows, args.format, "xcbound.bound/1", meta if args.format == "table" else None)
    emit(text, args.output)
    return EXIT_OK


def cmd_certify(args):
    from . import density as dn
    from . import functionals as fn
    from . import maximal
    import numpy as np

    corpus = fn.default_chain_corpus()
    chain_rows = []
    for f in corpus:
        chain_rows.extend(fn.verify_chain(f, args.alphas).rows)
    chain = fn.ChainReport(tuple(chain_rows))

    lemma = maximal.verify_lemma()
    gaps = {T: maximal.heat_domination_gap(T) for T in DEFAULTS.heat_T}
    scaling = [fn.tf_scaling_check(f, DEFAULTS.scaling_Z) for f in (dn.gaussian(), dn.exponential())]
    periodic = fn.corr_periodic(dn.grid_field(np.ones((12, 12, 12)), 0.25, periodic=True))

    checks = [
        {"check": "chain", "value": chain.min_margin, "passed": chain.passed},
        {"check": "lemma_max_ratio", "value": lemma.max_ratio, "passed": lemma.passed},
        *({"check": f"heat_domination_T{T:g}", "value": g, "passed": g >= 0} for T, g in gaps.items()),
        *({"check": f"scaling_{i}", "value": s.max_deviation(), "passed": s.max_deviation() <= 1e-3}
          for i, s in enumerate(scaling)),
        {"check": "periodic_constant_corr", "value": periodic, "passed": abs(periodic) <= 1e-12},
    ]
    ok = all(c["passed"] for c in checks)
    skipped = sum(r.status == "skipped" for r in chain_rows)
    if args.witness:
        with open(args.witness, "w") as fh:
            fh.write(chain.to_csv())
    if args.format == "csv":
        text = chain.to_csv()
    else:
        text = render(checks, args.format, "xcbound.certify/1",
                      {"chain_rows": len(chain_rows), "chain_skipped": skipped, "passed": ok})
        if args.format == "json":
            doc = json.loads(text)
            doc["chain"] = [_json_safe(r.__dict__) for r in chain_rows]
            text = json.dumps(doc, indent=2) + "\n"
    emit(text, args.output)
    if (plots := _plot_dir(args)) is not None:
        from . import plotting

        plotting.chain_margin_figure(plots, chain_rows)
        plotting.lemma_ratio_figure(plots, lemma)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_maxfn(args):
    from . import maximal

    lemma = maximal.verify_lemma()
    t_star, k_min = maximal.minimize_k()
    meta = {"constant": lemma.constant, "max_ratio": lemma.max_ratio, "witness": lemma.witness,
            "ball_plateau": maximal.ball_plateau_constant(), "t_star": t_star, "k_min": k_min,
            "passed": lemma.passed}
    rows = [r.__dict__ for r in lemma.rows]
    if args.format == "csv":
        text = lemma.to_csv()
    else:
        text = render(rows, args.format, "xcbound.maxfn/1", meta)
    emit(text, args.output)
    if (plots := _plot_dir(args)) is not None:
        from . import plotting

        plotting.k_curve_figure(plots)
        plotting.lemma_ratio_figure(plots, lemma)
    return EXIT_OK if lemma.passed else EXIT_FAIL


def cmd_jellium(args):
    from . import jellium
    from .lattice import BravaisLattice

    if args.yukawa is not None:
        if not args.yukawa > 0:
            raise UsageError("--yukawa needs a positive screening parameter")
        lat = BravaisLattice.named(args.lattice)
        rows = [{"lattice": lat.kind, "nu": args.yukawa, "yukawa_shift": jellium.yukawa_shift(lat, args.yukawa),
                 "coulomb_shift": jellium.cell_second_moment(jellium.ws_cell(lat))}]
        emit(render(rows, args.format, "xcbound.jellium.yukawa/1"), args.output)
        return EXIT_OK
    names = ["sc", "fcc", "bcc"] if args.table else [args.lattice]
    rows = []
    for name in names:
        rep = jellium.lattice_report(BravaisLattice.named(name), args.shell_cutoff)
        if args.fourier:
            rep["fourier_shift"] = jellium.shift_fourier_check(BravaisLattice.named(name))
        rows.append(rep)
    ok = all(r["converged"] for r in rows)
    meta = None
    if args.table:
        lowest = min(rows, key=lambda r: r["indirect"])["lattice"]
        meta = {"lowest_indirect": lowest, "ball_moment_lower_bound": jellium.ball_moment_lower_bound()}
    if args.format == "json" and not args.table:
        text = json.dumps(_json_safe({"schema": "xcbound.jellium/1", **rows[0]}), indent=2) + "\n"
    else:
        text = render(rows, args.format, "xcbound.jellium/1", meta)
    emit(text, args.output)
    if (plots := _plot_dir(args)) is not None:
        from . import plotting

        for name in names:
            plotting.w_decay_figure(plots, BravaisLattice.named(name))
    return EXIT_OK if ok else EXIT_FAIL


# -- parser ----------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "table"), default=DEFAULTS.output_format)
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--plot-dir", help="also write curve CSVs and PNG figures into this directory")

    parser = argparse.ArgumentParser(prog="xcbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--show-defaults", action="store_true", help="print every numeric default and exit")
    parser.add_argument("--threads", type=int, help=f"worker threads (overrides ${DEFAULTS.threads_env})")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("constants", parents=[common], help="re-derive the constant table")
    p.add_argument("--all", action="store_true", help="include supporting constants")
    p.add_argument("--check", action="store_true", help="show expected values and tolerances")
    p.add_argument("--tolerance-scale", type=float, default=DEFAULTS.tolerance_scale,
                   help="multiply every tolerance (0 demands exact agreement)")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("bound", parents=[common], help="evaluate lower bounds for a density")
    p.add_argument("input", nargs="?", help="cube file, or JSON/YAML analytic density")
    p.add_argument("--analytic", choices=("gaussian", "exponential", "uniform_ball", "smoothed_ball"))
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="analytic density parameter")
    p.add_argument("--N", type=float, default=1.0, help="particle number for --analytic")
    p.add_argument("--variant", choices=("classic_168", "classic_164", "grad_l1", "grad13_l2", "chain_l18",
                                         "chain_l14"))
    p.add_argument("--alpha", type=float, help="fixed alpha for the gradient variants")
    p.add_argument("--clamp-negative", action="store_true", help="set negative cube values to zero")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("certify", parents=[common], help="numerical certificate of the inequality chain")
    p.add_argument("--alphas", type=_float_list, default=DEFAULTS.alphas)
    p.add_argument("--witness", help="write per-row chain margins as CSV")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("maxfn", parents=[common], help="maximal-function norm ratios")
    p.set_defaults(func=cmd_maxfn)

    p = sub.add_parser("jellium", parents=[common], help="lattice Jellium and indirect energies")
    p.add_argument("--lattice", choices=("sc", "fcc", "bcc"), default="bcc", type=str.lower)
    p.add_argument("--table", action="store_true", help="all three lattices")
    p.add_argument("--shell-cutoff", type=int, default=DEFAULTS.shell_cutoff,
                   help="lattice sum radius in nearest-neighbour distances")
    p.add_argument("--yukawa", type=float, metavar="NU", help="report the Yukawa shift instead")
    p.add_argument("--fourier", action="store_true", help="add the small-k Fourier shift")
    p.set_defaults(func=cmd_jellium)
    return parser


def main(argv=None):
    from .density import DensityError
    from .lattice import LatticeError
    from .quadrature import QuadratureError

    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_defaults:
        sys.stdout.write(json.dumps(DEFAULTS.as_dict(), indent=2) + "\n")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        os.environ[DEFAULTS.threads_env] = str(args.threads)
    if getattr(args, "shell_cutoff", 5) < 5:
        parser.error("--shell-cutoff must be at least 5")
    try:
        return args.func(args)
    except (UsageError, DensityError, LatticeError, OSError) as exc:
        print(f"xcbound {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, ArithmeticError) as exc:
        print(f"xcbound {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
