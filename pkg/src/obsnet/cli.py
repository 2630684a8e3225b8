"""Command-line front end.

    obsnet analyze GRAPH.json
    obsnet nullspace GRAPH.json
    obsnet detectability SYSTEM.json
    obsnet simulate SYSTEM.json GAINS.json CONFIG.json --out trace.csv

Reports are JSON on stdout, or in the file given by ``--out``. Exit status 0
means the analysis ran (the verdict is in the report), 1 means bad input,
2 means an internal numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import digraph as dg
from .jsonio import (
    InputError,
    config_from_json,
    dumps,
    gains_from_json,
    graph_from_json,
    load_json,
    system_from_json,
)
from .netdetect import analyze
from .simulator import SimulationDiverged, closed_loop_matrix, is_hurwitz, simulate
from .subspaces import Tolerances

log = logging.getLogger("obsnet")


def analyze_report(g: dg.Digraph, tol: Tolerances) -> dict:
    """Cluster decomposition, spanning trees, multiplicity and null-space basis.

    Each cluster's spanning tree is rooted at the smallest label of its inner
    subgraph; the root is recorded next to the tree.
    """
    dec = dg.clusters(g)
    trees = []
    for k, (members, inner) in enumerate(zip(dec.clusters, dec.inner_subgraphs)):
        tree = dg.spanning_tree(g, members, inner[0])
        trees.append({"cluster": k, **tree.to_json()})
    return {
        "graph": g.to_json(),
        "num_clusters": dec.num_clusters,
        **dec.to_json(),
        "spanning_trees": trees,
        "scc_count": dg.scc_count(g),
        "zero_multiplicity": {
            "exact": dg.zero_multiplicity(g, exact=True),
            "numerical": dg.zero_multiplicity(g, rank_tol=tol.rank_tol),
        },
        "nullspace_basis": [list(b) for b in dg.nullspace_basis(g, dec)],
        "tolerances": tol.to_json(),
    }


def nullspace_report(g: dg.Digraph, tol: Tolerances) -> dict:
    basis = dg.nullspace_basis(g)
    lap = dg.laplacian(g)
    return {
        "num_nodes": g.num_nodes,
        "multiplicity": len(basis),
        "basis": [list(b) for b in basis],
        "residual_inf_norms": [float(np.max(np.abs(lap @ b))) for b in basis],
        "tolerances": tol.to_json(),
    }


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_analyze(args, tol):
    g = graph_from_json(load_json(args.graph), args.graph)
    _emit(dumps(analyze_report(g, tol)), args.out)


def _cmd_nullspace(args, tol):
    g = graph_from_json(load_json(args.graph), args.graph)
    _emit(dumps(nullspace_report(g, tol)), args.out)


def _cmd_detectability(args, tol):
    system = system_from_json(load_json(args.system), args.system)
    report = analyze(system, tol)
    problems = report.consistency_violations()
    for p in problems:
        log.warning("consistency check: %s", p)
    _emit(dumps({"system": {"n": system.n, "N": system.N}, **report.to_json()}), args.out)


def _cmd_simulate(args, tol):
    system = system_from_json(load_json(args.system), args.system)
    gains = gains_from_json(load_json(args.gains), system, args.gains)
    config = config_from_json(load_json(args.config), seed=args.seed, decimate=args.decimate,
                              what=args.config)
    if config.x0.shape != (system.n,):
        raise InputError(f"{args.config}: field x0 has {config.x0.size} entries, expected {system.n}")
    acl = closed_loop_matrix(system, gains)
    hurwitz, abscissa = is_hurwitz(acl)
    trace = simulate(system, gains, config)
    out = args.out or "trace.csv"
    with open(out, "w", newline="") as fh:
        trace.to_csv(fh)
    eigs = sorted(np.linalg.eigvals(acl), key=lambda z: (z.real, z.imag))
    summary = {
        "hurwitz": hurwitz,
        "spectral_abscissa": abscissa,
        "closed_loop_eigenvalues": [{"re": z.real, "im": z.imag} for z in eigs],
        "initial_error_norm": float(np.linalg.norm(trace.errors[0])),
        "final_error_norms": list(trace.error_norms[-1]),
        "samples": len(trace.times),
        "trace": str(out),
    }
    sys.stdout.write(dumps(summary))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=None,
                        help="relative singular-value threshold (default max(rows, cols) * eps)")
    common.add_argument("--tol-re", type=float, default=Tolerances.re_tol,
                        help="closed right half-plane guard band (default %(default)s)")
    common.add_argument("--out", default=None, help="output file (report JSON or trace CSV)")

    parser = argparse.ArgumentParser(prog="obsnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[common], help="cluster decomposition of a graph")
    p.add_argument("graph")
    p.set_defaults(func=_cmd_analyze)
    p = sub.add_parser("nullspace", parents=[common], help="basis of the Laplacian null space")
    p.add_argument("graph")
    p.set_defaults(func=_cmd_nullspace)
    p = sub.add_parser("detectability", parents=[common], help="collective detectability report")
    p.add_argument("system")
    p.set_defaults(func=_cmd_detectability)
    p = sub.add_parser("simulate", parents=[common], help="simulate plant and observers")
    p.add_argument("system")
    p.add_argument("gains")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the noise seed")
    p.add_argument("--decimate", type=int, default=None, help="record every k-th step")
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    tol = Tolerances(rank_tol=args.tol_rank, re_tol=args.tol_re)
    try:
        args.func(args, tol)
    except InputError as exc:
        print(f"obsnet: error: {exc}", file=sys.stderr)
        return 1
    except (dg.DecompositionError, SimulationDiverged, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"obsnet: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
