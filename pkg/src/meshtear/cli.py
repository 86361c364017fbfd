"""Command-line entry points: tear, cut, particles, bench, serve."""
from __future__ import annotations

import argparse
import json
import sys

from .errors import (Collinear, CoplanarSegment, DegenerateSegment,
                     InvalidWeights, MeshTearError, NonManifold,
                     NonManifoldResult, ParseError, StraddlingFace)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_GEOMETRY = 2
EXIT_INTERNAL = 3

_GEOMETRY_ERRORS = (Collinear, CoplanarSegment, DegenerateSegment,
                    NonManifold, NonManifoldResult, StraddlingFace)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meshtear",
        description="Real-time mesh tearing, plane cutting, and the "
                    "spring-anchored particle layer that deforms the result.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tear", help="play a tear trajectory over a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--width", type=float, default=None,
                   help="tear width (defaults to the trajectory's)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help="output mesh path (default <mesh>.torn.obj)")
    p.add_argument("--report", default=None)
    p.add_argument("--sections", type=int, default=256)
    p.add_argument("--parallel", action="store_true",
                   help="accepted for interface compatibility; the candidate "
                        "fan-out currently runs single-threaded either way")

    p = sub.add_parser("cut", help="split a mesh by a plane")
    p.add_argument("--mesh", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--plane", help="a,b,c,d for the plane (a,b,c).x = d")
    group.add_argument("--trajectory")
    p.add_argument("--out-prefix", default=None)
    p.add_argument("--report", default=None)

    p = sub.add_parser("particles", help="generate a particle map")
    p.add_argument("--mesh", required=True)
    p.add_argument("--radius", type=float, required=True,
                   help="influence radius d")
    p.add_argument("--delta", type=float, required=True,
                   help="neighbor distance threshold")
    p.add_argument("--poisson", type=float, required=True,
                   help="minimum anchor spacing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run a benchmark manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--params", default=None,
                   help="JSON file of session parameter overrides")
    p.add_argument("--host", default="127.0.0.1")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except _GEOMETRY_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GEOMETRY
    except MeshTearError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def _dispatch(args):
    from . import harness

    if args.command == "tear":
        report, out_path = harness.run_tear(
            args.mesh, args.trajectory, width=args.width, seed=args.seed,
            out_path=args.out, report_path=args.report,
            sections_target=args.sections)
        totals = report.totals()
        print(f"tore {len(report.segments)} segment(s) in "
              f"{totals['total_ms']:.2f} ms -> {out_path}")
        return EXIT_OK

    if args.command == "cut":
        report, _, (pos_path, neg_path) = harness.run_cut(
            args.mesh, plane=args.plane, trajectory_path=args.trajectory,
            out_prefix=args.out_prefix, report_path=args.report)
        print(f"cut in {report['cut_ms']:.2f} ms "
              f"({report['intersection_points']} intersection points) "
              f"-> {pos_path}, {neg_path}")
        return EXIT_OK

    if args.command == "particles":
        system, _ = harness.run_particles(args.mesh, args.radius, args.delta,
                                          args.poisson, args.seed, args.out)
        print(f"generated {system.count} particles -> {args.out}")
        return EXIT_OK

    if args.command == "bench":
        table = harness.run_bench(args.manifest, repeats=args.repeats,
                                  out_path=args.out)
        print(harness.format_bench_table(table))
        if any(not row.get("pass", True) for row in table["rows"]):
            print("warning: at least one case exceeded its budget",
                  file=sys.stderr)
        return EXIT_OK

    if args.command == "serve":
        from . import service

        params = None
        if args.params:
            with open(args.params) as fh:
                params = json.load(fh)
        print(f"serving on {args.host}:{args.port}", flush=True)
        service.serve(args.port, params=params, host=args.host)
        return EXIT_OK

    raise ParseError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
