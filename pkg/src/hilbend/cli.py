"""``hb`` command line."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from hilbend.errors import HilbendError


def _point(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _region(text):
    kind, _, value = text.partition(":")
    if kind != "ball" or not value:
        raise argparse.ArgumentTypeError("region must look like ball:R")
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius '{value}'") from None


def _parser():
    p = argparse.ArgumentParser(prog="hb", description="Hilbert geometry and projective bending.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="Hilbert distance between two chart points")
    d.add_argument("scene")
    d.add_argument("x", type=_point)
    d.add_argument("y", type=_point)

    v = sub.add_parser("volume", help="Monte-Carlo Busemann volume of a Hilbert ball")
    v.add_argument("scene")
    v.add_argument("--region", type=_region, default=1.0, metavar="ball:R")
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)

    b = sub.add_parser("bend", help="build the bent domain and summarize it")
    b.add_argument("scene")
    b.add_argument("--t", type=float)
    b.add_argument("--depth", type=int)

    t = sub.add_parser("tile", help="write an SVG rendering")
    t.add_argument("scene")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--what", choices=("tiling", "fundamental-domain", "bent-domain"), default="tiling")

    c = sub.add_parser("check", help="run invariant suites, JSON-lines report on stdout")
    c.add_argument("scene")
    c.add_argument("--suite", default="all", choices=("all", "metric", "bending", "groups", "volume", "hyperbolicity"))
    c.add_argument("--seed", type=int)
    c.add_argument("-o", "--output")
    return p


def _load(args):
    from hilbend.scene import load_scene

    scene = load_scene(args.scene)
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get("HB_SEED"):
        try:
            seed = int(os.environ["HB_SEED"])
        except ValueError:
            raise HilbendError("HB_SEED must be an integer") from None
    return scene.with_seed(seed) if seed is not None else scene


def _cmd_dist(args, out):
    from hilbend.hilbert import MetricContext, distance
    from hilbend.scene import build_domain

    scene = _load(args)
    domain, _ = build_domain(scene)
    ctx = MetricContext(domain)
    for name, u in (("x", args.x), ("y", args.y)):
        if len(u) != domain.dim:
            raise HilbendError(f"{name} needs {domain.dim} coordinates")
    x, y = (ctx.chart.embed_many(np.array([u]))[0] for u in (args.x, args.y))
    out.write(f"{distance(ctx, x, y):.12g}\n")
    return 0


def _cmd_volume(args, out):
    from hilbend.hilbert import HilbertBall, MetricContext, busemann_volume
    from hilbend.scene import build_domain

    scene = _load(args)
    domain, _ = build_domain(scene)
    ctx = MetricContext(domain)
    ball = HilbertBall(ctx, domain.interior_point(), args.region)
    n = args.samples or scene.probe.samples
    mu, err = busemann_volume(ctx, ball, n, scene.probe.seed)
    out.write(json.dumps({"region": f"ball:{args.region:g}", "samples": n, "stderr": err, "volume": mu}, sort_keys=True) + "\n")
    return 0


def _cmd_bend(args, out):
    from hilbend.bend import punctured_torus_bend, relation_residuals

    scene = _load(args)
    d = scene.domain
    if d["kind"] != "bend" and scene.group != "punctured-torus":
        raise HilbendError("bend needs a bend recipe or a punctured-torus scene")
    t = args.t if args.t is not None else d.get("t", 0.0)
    depth = args.depth if args.depth is not None else d.get("depth", 6)
    dom, rep_t = punctured_torus_bend(t, depth)
    res = relation_residuals(dom.rep0, rep_t, dom.rep0.decomposition)
    summary = {
        "t": t,
        "depth": depth,
        "walls": len(dom.K),
        "relation_residual": max(res),
        "generators": {g: np.round(rep_t.evaluate(g), 12).tolist() for g in rep_t.generators},
    }
    out.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def _cmd_tile(args, out):
    from hilbend.render import render_svg

    scene = _load(args)
    docs = render_svg(scene, args.what)
    path = Path(args.output)
    if isinstance(docs, str):
        path.write_text(docs, encoding="utf-8")
        return 0
    # one file per t-step: out-0.svg, out-1.svg, ...
    for i, doc in enumerate(docs):
        path.with_name(f"{path.stem}-{i}{path.suffix}").write_text(doc, encoding="utf-8")
    return 0


def _cmd_check(args, out):
    from hilbend.checks import exit_code, format_report, run_checks

    scene = _load(args)
    entries = run_checks(scene, args.suite)
    report = format_report(entries)
    if args.output:
        Path(args.output).write_text(report, encoding="utf-8")
    else:
        out.write(report)
    return exit_code(entries)


COMMANDS = {"dist": _cmd_dist, "volume": _cmd_volume, "bend": _cmd_bend, "tile": _cmd_tile, "check": _cmd_check}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except (HilbendError, OSError) as exc:
        print(f"hb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
