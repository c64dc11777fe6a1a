"""Command-line front end: reproducible runs with file-based inputs and
CSV/JSON outputs.

Subcommands: gen, count, dim, limit, tree (build/verify/power/prune),
renewal, transform, axioms.  Every run can write a manifest echoing the
resolved configuration; identical configurations produce identical bytes.
Exit codes: 0 ok, 2 bad input, 3 violated precondition, 4 exhausted budget.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import asymptotics as asy
from . import counting as cnt
from . import geometry as geo
from . import symbolic as sym
from . import trees as tr
from .errors import BudgetError, DomainError, PreconditionError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DomainError(f"input file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise DomainError(f"malformed JSON in {path}: {err}") from None


def _dump_json(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _write_manifest(args, extra=None):
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func",) and v is not None
    }
    if extra:
        config.update(extra)
    manifest = {"command": args.command, "config": config}
    path = args.manifest
    if path is None and getattr(args, "out", None):
        path = str(args.out) + ".manifest.json"
    if path:
        _dump_json(manifest, path)


def _parse_point(text):
    return np.asarray([float(t) for t in text.split(",")], dtype=float)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    doc = _load_json(args.ifs)
    ifs = geo.ifs_from_json(doc["ifs"] if "ifs" in doc else doc)
    if args.require_osc:
        report = geo.check_osc(ifs)
        if not report.certified:
            raise PreconditionError(
                f"open-set condition not certified: {report.status}"
            )
    if args.seed is not None:
        seed = _parse_point(args.seed)
    elif args.seed_word is not None:
        seed = geo.attractor_point(ifs, sym.word_from_string(args.seed_word))
    else:
        seed = geo.attractor_point(ifs, (0,))
    cloud = geo.sample_attractor(ifs, args.delta, seed=seed, budget=args.budget_nodes)
    geo.write_cloud(cloud, args.out)
    _write_manifest(args, {"n_points": len(cloud)})
    print(f"wrote {len(cloud)} points to {args.out}")


def cmd_count(args):
    cloud = geo.read_cloud(args.cloud)
    curve = asy.counting_curve(
        cloud, args.fn, args.emax, args.emin, args.ppd, mode=args.mode
    )
    if args.s is not None:
        curve.s = args.s
    cnt.write_curve(curve, args.out)
    _write_manifest(args, {"rows": int(curve.eps.size)})
    print(f"wrote {curve.eps.size} rows to {args.out}")


def cmd_dim(args):
    curve = cnt.read_curve(args.curve)
    fit = asy.dimension_fit(curve)
    _dump_json({"s_hat": fit.s_hat, "stderr": fit.stderr}, args.out)
    _write_manifest(args)


def cmd_limit(args):
    curve = cnt.read_curve(args.curve)
    cfg = asy.DiagnosticConfig(
        converge_amplitude=args.converge_amp,
        oscillate_amplitude=args.oscillate_amp,
        peak_factor=args.peak_factor,
        smoothing_bandwidth=args.bandwidth,
    )
    diag = asy.limit_diagnostic(curve, args.s, cfg)
    _dump_json(diag.to_json(), args.out)
    _write_manifest(args)


def cmd_tree_build(args):
    if args.mode == "ifs":
        doc = _load_json(args.ifs)
        ifs = geo.ifs_from_json(doc["ifs"] if "ifs" in doc else doc)
        if args.x0 is not None:
            x0 = _parse_point(args.x0)
        else:
            x0 = geo.attractor_point(
                ifs, sym.word_from_string(args.x0_word or "01")
            )
        tree = tr.tree_from_ifs(ifs, x0, args.depth)
    else:
        cloud = geo.read_cloud(args.cloud)
        tree = tr.tree_from_packing(cloud, args.delta, args.s, args.depth)
    report = tr.verify_axioms(tree)
    _dump_json(tree.to_json(), args.out)
    _dump_json(_report_json(report), args.report)
    _write_manifest(args, {"nodes": len(tree)})


def _report_json(report: tr.AxiomReport) -> dict:
    return {
        "ok": report.ok,
        "checks": [
            {
                "name": c.name,
                "ok": bool(c.ok),
                "measured": c.measured,
                "witness": [list(w) for w in c.witness] if c.witness else None,
            }
            for c in report.checks
        ],
        "measured_constants": report.measured.to_json(),
    }


def cmd_tree_verify(args):
    tree = tr.RegularTree.from_json(_load_json(args.tree))
    report = tr.verify_axioms(tree)
    _dump_json(_report_json(report), args.out)
    _write_manifest(args)


def cmd_tree_power(args):
    tree = tr.RegularTree.from_json(_load_json(args.tree))
    _dump_json(tr.power_tree(tree, args.m).to_json(), args.out)
    _write_manifest(args)


def cmd_tree_prune(args):
    tree = tr.RegularTree.from_json(_load_json(args.tree))
    word = sym.word_from_string(args.word) if args.word else ()
    mass = tr.pruned_mass(tree, lambda w: args.choice, word, args.m)
    c = tree.constants
    bound = (
        c.E**2
        * tree.node(word)[1] ** c.s
        * (1 - c.rho**c.s) ** args.m
    )
    _dump_json(
        {"word": args.word or "", "m": args.m, "mass": mass, "bound": bound},
        args.out,
    )
    _write_manifest(args)


def cmd_renewal(args):
    doc = _load_json(args.system)
    shift = sym.SubshiftFT.from_json(doc)
    f = sym.LocallyConstantPotential.from_json(doc["potential"], shift)
    if "weight" in doc:
        g = sym.LocallyConstantPotential.from_json(doc["weight"], shift)
    else:
        g = sym.LocallyConstantPotential.constant(1.0, shift)
    anchor = sym.word_from_string(args.anchor)
    spec = sym.RenewalSpec(shift, f, g, anchor=anchor)
    delta = args.delta if args.delta is not None else sym.bowen_root(shift, f)
    grid = np.linspace(args.amin, args.amax, args.points)
    series = sym.renewal_convergence_series(
        spec, grid, delta, budget=args.budget_nodes
    )
    _dump_json(
        {
            "delta": delta,
            "rel_variation": series.rel_variation,
            "raw_rel_variation": series.raw_rel_variation,
            "window": list(series.window),
            "method": series.method,
            "a": series.a.tolist(),
            "rescaled": series.rescaled.tolist(),
        },
        args.out,
    )
    _write_manifest(args, {"delta": delta})


def cmd_transform(args):
    doc = _load_json(args.map)
    cmap = geo.ConformalMap.from_json(doc["map"] if "map" in doc else doc)
    cloud = geo.read_cloud(args.cloud)
    image = geo.apply_map(cmap, cloud)
    geo.write_cloud(image, args.out)
    _write_manifest(args, {"n_points": len(image)})
    print(f"wrote {len(image)} points to {args.out}")


def cmd_axioms(args):
    cloud = geo.read_cloud(args.cloud)
    spec = cnt.CountingFunctionSpec.of(args.fn)
    eps_grid = [float(t) for t in args.eps.split(",")]
    report = cnt.axiom_suite(spec, cloud, eps_grid)
    _dump_json(
        {
            "function": report.kind,
            "ok": report.ok,
            "measured_B": report.measured_B,
            "checks": [
                {"name": c.name, "ok": bool(c.ok), "detail": c.detail}
                for c in report.checks
            ],
        },
        args.out,
    )
    _write_manifest(args)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sregular",
        description="Counting-function asymptotics for Ahlfors-regular sets",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap (runs are serial; accepted for "
                             "pipeline compatibility)")
    parser.add_argument("--budget-nodes", type=int,
                        default=sym.DEFAULT_NODE_BUDGET,
                        help="node / point budget for enumerations")
    parser.add_argument("--manifest", help="path for the run manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample an attractor to a cloud file")
    p.add_argument("--ifs", required=True, help="system JSON with an 'ifs' key")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", help="seed point, comma-separated coordinates")
    p.add_argument("--seed-word", help="word whose fixed point seeds the run")
    p.add_argument("--require-osc", action="store_true")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("count", help="evaluate a counting curve to CSV")
    p.add_argument("--fn", required=True,
                   choices=["separated", "packing", "covering", "minkowski"])
    p.add_argument("--cloud", required=True)
    p.add_argument("--emax", type=float, required=True)
    p.add_argument("--emin", type=float, required=True)
    p.add_argument("--ppd", type=int, default=40)
    p.add_argument("--mode", default="greedy",
                   choices=["greedy", "exact", "greedy-bracket"])
    p.add_argument("--s", type=float, help="exponent for the rescaled column")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("dim", help="fit the dimension of a curve")
    p.add_argument("--curve", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("limit", help="limit diagnostic of a curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--converge-amp", type=float, default=0.02)
    p.add_argument("--oscillate-amp", type=float, default=0.05)
    p.add_argument("--peak-factor", type=float, default=5.0)
    p.add_argument("--bandwidth", type=float, default=0.3)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_limit)

    ptree = sub.add_parser("tree", help="build and inspect regular trees")
    tsub = ptree.add_subparsers(dest="tree_command", required=True)

    p = tsub.add_parser("build")
    p.add_argument("--mode", required=True, choices=["ifs", "packing"])
    p.add_argument("--ifs")
    p.add_argument("--x0", help="center point, comma-separated")
    p.add_argument("--x0-word", help="word whose fixed point is the center")
    p.add_argument("--cloud")
    p.add_argument("--delta", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("-o", "--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_tree_build)

    p = tsub.add_parser("verify")
    p.add_argument("--tree", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_tree_verify)

    p = tsub.add_parser("power")
    p.add_argument("--tree", required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_tree_power)

    p = tsub.add_parser("prune")
    p.add_argument("--tree", required=True)
    p.add_argument("--word", default="")
    p.add_argument("--choice", type=int, default=0)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_tree_prune)

    p = sub.add_parser("renewal", help="rescaled renewal series")
    p.add_argument("--system", required=True,
                   help="JSON with alphabet/transition/potential")
    p.add_argument("--anchor", required=True)
    p.add_argument("--amin", type=float, required=True)
    p.add_argument("--amax", type=float, required=True)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--delta", type=float,
                   help="rescaling exponent; defaults to the Bowen root")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_renewal)

    p = sub.add_parser("transform", help="apply a conformal map to a cloud")
    p.add_argument("--map", required=True, help="system JSON with a 'map' key")
    p.add_argument("--cloud", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("axioms", help="counting-function axiom suite")
    p.add_argument("--fn", required=True,
                   choices=["separated", "packing", "covering"])
    p.add_argument("--cloud", required=True)
    p.add_argument("--eps", required=True,
                   help="comma-separated epsilon values")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_axioms)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DomainError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except PreconditionError as err:
        print(f"precondition violated: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except BudgetError as err:
        print(f"budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
