"""Command line entry point.

Every subcommand prints a JSON report on stdout.  Exit status is 0 on
success, 1 when a check fails and 2 on bad input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import balanced as bal
from .dynamics import (
    FieldError,
    check_group_invariance,
    check_related,
    load_field,
    read_field_file,
    realize,
)
from .exprlang import ExprError
from .graphs import (
    GraphError,
    MorphismError,
    dump_graph,
    dump_morphism,
    input_tree,
    is_etale,
    load_graph,
    load_morphism,
)
from .groupoid import NotEtale, TooLarge, graph_automorphisms, skeleton
from .linear import (
    LinearError,
    assemble_matrix,
    eigenvalues,
    is_linear_description,
    linear_field_from_dict,
)
from .phase import PhaseError, layout
from .sim import NonFiniteState, flow_sync_check, integrate_rk4, read_state, write_trajectory


class CheckFailed(Exception):
    """Raised by a subcommand after printing its report to signal exit status 1."""


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    g = load_graph(args.graph)
    _emit({"valid": True, "nodes": len(g.nodes), "edges": len(g.edges),
           "node_colors": list(g.colors.node_colors), "edge_colors": [c.id for c in g.colors.edge_colors]})


def cmd_input_trees(args):
    g = load_graph(args.graph)
    out = []
    for a in g.nodes:
        t = input_tree(g, a)
        out.append({"root": a, "color": t.root_color, "signature": str(t.signature),
                    "leaves": [{"edge": l.edge, "edge_color": l.edge_color, "source": l.source,
                                "source_color": l.source_color} for l in t.leaves]})
    _emit({"input_trees": out})


def cmd_skeleton(args):
    _emit(skeleton(load_graph(args.graph)).to_dict())


def cmd_autos(args):
    g = load_graph(args.graph)
    group = graph_automorphisms(g, args.max_nodes)
    elems = [h.to_dict() for h in group]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rel = os.path.relpath(Path(args.graph).resolve(), out.resolve())
        for k, h in enumerate(group):
            dump_morphism(h, out / f"auto_{k}.json", rel, rel)
    _emit({"order": group.order, "automorphisms": elems})


def cmd_check_etale(args):
    f = load_morphism(args.map)
    res = is_etale(f)
    _emit({"etale": res.ok, "node": res.node, "reason": res.reason})
    if not res:
        raise CheckFailed


def cmd_balanced(args):
    g = load_graph(args.graph)
    if args.partition:
        p = bal.load_partition(args.partition)
        res = bal.is_balanced(g, p)
        _emit({"balanced": res.ok, "offending": list(res.offending) if res.offending else None})
        if not res:
            raise CheckFailed
        return
    if args.enumerate:
        parts = bal.enumerate_balanced(g, args.max_nodes)
        _emit({"count": len(parts), "partitions": [p.to_dict()["blocks"] for p in parts]})
        return
    _emit(bal.coarsest_balanced(g).to_dict())


def cmd_quotient(args):
    g = load_graph(args.graph)
    p = bal.load_partition(args.partition)
    try:
        res = bal.quotient(g, p)
    except bal.NotBalanced as exc:
        _emit({"balanced": False, "error": str(exc)})
        raise CheckFailed from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_graph(res.quotient, out / "quotient.json")
    rel = os.path.relpath(Path(args.graph).resolve(), out.resolve())
    dump_morphism(res.projection, out / "projection.json", rel, "quotient.json")
    _emit({"balanced": True, "etale": bool(is_etale(res.projection)),
           "quotient": str(out / "quotient.json"), "projection": str(out / "projection.json"),
           "nodes": list(res.quotient.nodes)})


def cmd_verify_sync(args):
    phi = load_morphism(args.map)
    w = load_field(args.field, phi.codomain)
    rep = check_related(phi, w, args.samples, args.tol, args.seed)
    _emit({"map": str(args.map), **rep.to_dict()})
    if not rep:
        raise CheckFailed


def cmd_verify_group(args):
    g = load_graph(args.graph)
    w = load_field(args.field, g)
    rep = check_group_invariance(g, w, args.samples, args.tol, args.seed)
    _emit(rep.to_dict())
    if not rep:
        raise CheckFailed


def _linear(args, g):
    raw = read_field_file(args.field)
    if not is_linear_description(raw):
        raise FieldError("this command needs a linear field (one block per slot type)")
    return linear_field_from_dict(g, raw)


def cmd_assemble(args):
    g = load_graph(args.graph)
    if args.linear:
        lf = _linear(args, g)
        A = assemble_matrix(lf)
        labels = layout(g, lf.phase).labels()
        lines = [",".join(["row", *labels])]
        lines += [",".join([lab, *(_fmt(v) for v in row)]) for lab, row in zip(labels, A)]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
            _emit({"matrix": str(args.out), "shape": list(A.shape)})
        else:
            sys.stdout.write(text)
        return
    w = load_field(args.field, g)
    X = realize(w)
    plans = {a: {"class": cid, "sources": list(src), "module": w.assignment[cid].sources()}
             for a, (cid, src) in X.component_plans.items()}
    _emit({"dim": X.dim, "layout": X.layout.labels(), "components": plans})


def cmd_spectrum(args):
    g = load_graph(args.graph)
    ev = eigenvalues(assemble_matrix(_linear(args, g)))
    _emit({"eigenvalues": [{"re": float(z.real), "im": float(z.imag)} for z in ev]})


def cmd_simulate(args):
    g = load_graph(args.graph)
    w = load_field(args.field, g)
    X = realize(w)
    labels = X.layout.labels()
    x0 = read_state(args.x0, labels)
    if x0.shape[0] != X.dim:
        raise PhaseError(f"initial state has {x0.shape[0]} entries, the phase space has {X.dim}")
    traj = integrate_rk4(X, x0, args.dt, args.steps, labels)
    write_trajectory(traj, args.out)
    _emit({"trajectory": str(args.out), "steps": args.steps, "dt": args.dt,
           "final": [float(v) for v in traj.final]})


def cmd_flow_sync(args):
    phi = load_morphism(args.map)
    w = load_field(args.field, phi.codomain)
    labels = layout(phi.codomain, w.phase).labels()
    x0 = read_state(args.x0, labels)
    rep = flow_sync_check(phi, w, x0, args.dt, args.steps, args.tol, args.seed, args.samples,
                          name=str(args.map))
    _emit(rep.to_dict())
    if not rep:
        raise CheckFailed


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def seeded(p, tol):
        p.add_argument("--samples", type=int, default=64)
        p.add_argument("--tol", type=float, default=tol)
        p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("validate", help="check a graph file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("input-trees", help="input tree and signature of every node")
    p.add_argument("graph")
    p.set_defaults(func=cmd_input_trees)

    p = sub.add_parser("skeleton", help="classes of isomorphic input trees")
    p.add_argument("graph")
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("autos", help="automorphism group of a small graph")
    p.add_argument("graph")
    p.add_argument("--max-nodes", type=int, default=12)
    p.add_argument("-o", "--out", help="directory for one morphism file per automorphism")
    p.set_defaults(func=cmd_autos)

    p = sub.add_parser("check-etale", help="is a graph map étale")
    p.add_argument("--map", required=True)
    p.set_defaults(func=cmd_check_etale)

    p = sub.add_parser("balanced", help="coarsest or all balanced partitions")
    p.add_argument("graph")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--coarsest", action="store_true")
    mode.add_argument("--enumerate", action="store_true")
    mode.add_argument("--partition", help="check this partition file instead")
    p.add_argument("--max-nodes", type=int, default=10)
    p.set_defaults(func=cmd_balanced)

    p = sub.add_parser("quotient", help="quotient graph and étale projection")
    p.add_argument("graph")
    p.add_argument("--partition", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("verify-sync", help="pointwise relatedness of fields along an étale map")
    p.add_argument("--map", required=True)
    p.add_argument("--field", required=True, help="field on the codomain")
    seeded(p, 1e-10)
    p.set_defaults(func=cmd_verify_sync)

    p = sub.add_parser("verify-group", help="equivariance under all graph automorphisms")
    p.add_argument("--graph", required=True)
    p.add_argument("--field", required=True)
    seeded(p, 1e-10)
    p.set_defaults(func=cmd_verify_group)

    p = sub.add_parser("assemble", help="realized field plan, or matrix with --linear")
    p.add_argument("--graph", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--linear", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("spectrum", help="eigenvalues of a linear field")
    p.add_argument("--graph", required=True)
    p.add_argument("--field", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="RK4 trajectory to CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flow-sync", help="trajectory-level synchrony along an étale map")
    p.add_argument("--map", required=True)
    p.add_argument("--field", required=True, help="field on the codomain")
    p.add_argument("--x0", required=True, help="initial state on the codomain")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=10000)
    seeded(p, 1e-6)
    p.set_defaults(func=cmd_flow_sync)
    return ap


INPUT_ERRORS = (GraphError, MorphismError, PhaseError, ExprError, FieldError, LinearError,
                bal.InvalidPartition, TooLarge, bal.TooLarge, NotEtale, OSError, ValueError, KeyError)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except CheckFailed:
        return 1
    except NonFiniteState as exc:
        print(f"cellnet: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"cellnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
