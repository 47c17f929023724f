"""Command-line driver: ``pdn-impact run | bench | check``."""

import argparse
import json
import sys
import time
from pathlib import Path

from . import bench, checks, errors, kernels
from .config import load_scenario
from .runner import run_scenario

EXIT_OTHER, EXIT_CONFIG, EXIT_MESH, EXIT_NUMERICS = 1, 2, 3, 4

_CATEGORIES = (
    ((errors.ConfigError,), "config", EXIT_CONFIG),
    ((errors.ParseError, errors.ValidationError, errors.KindError, errors.UnknownSetError,
      errors.UnsupportedKindError), "mesh", EXIT_MESH),
    ((errors.MaterialError, errors.SnapbackError, errors.NonFiniteError,
      errors.AmbiguousProjectionError, errors.LivelockError, errors.DesyncError,
      errors.ChannelClosedError, FloatingPointError), "numerics", EXIT_NUMERICS),
)


def classify(exc):
    """(category, exit code) for an exception."""
    for types, name, code in _CATEGORIES:
        if isinstance(exc, types):
            return name, code
    return "other", EXIT_OTHER


def _threads(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("thread counts must be >= 1")
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="pdn-impact",
                                description="Explicit contact-impact solver for laminates.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--ndivi", type=int, default=None, help="levels of mesh multiplication")
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--scheme", choices=("tw", "cd"), default=None)
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--steps", type=int, default=None, help="step cap")
    r.add_argument("--repeat", type=int, default=1,
                   help="run N times and require bitwise-identical CSV output")
    r.add_argument("--vtk-every", type=int, default=None)

    b = sub.add_parser("bench", help="thread scaling and kernel backend timings")
    b.add_argument("config", nargs="?", default=None)
    b.add_argument("--threads", type=_threads, default=[1, 2, 4, 8])
    b.add_argument("--steps", type=int, default=20)
    b.add_argument("--elements", type=int, default=100_000,
                   help="cube size when no config is given")
    b.add_argument("--kernels", action="store_true", help="compare kernel backends")

    c = sub.add_parser("check", help="randomized mesh-multiplication checks")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--cases", type=int, default=50)
    return p


def _run(args):
    scn, spec = load_scenario(args.config)
    if args.ndivi:
        scn = scn.refined(args.ndivi).validate()
    out = Path(args.out or spec.dir)
    vtk_every = spec.vtk_every if args.vtk_every is None else args.vtk_every
    reports = []
    for k in range(max(1, args.repeat)):
        where = out if k == 0 else out / f"repeat_{k}"
        rep = run_scenario(scn, where, threads=args.threads, steps=args.steps,
                           scheme=args.scheme, vtk_every=vtk_every if k == 0 else 0)
        reports.append((where, rep))
    where, rep = reports[0]
    s = rep.summary
    print(f"scenario {s['scenario']}: {s['mesh']['elements']} elements, "
          f"{s['mesh']['nodes']} nodes, {s['steps']} steps of {s['dt']:.4g} s "
          f"({s['scheme']}, {s['threads']} threads, {s['backend']})")
    for lv in s["refinement"]:
        print(f"  refinement level {lv['level']}: predicted {lv['predicted']} "
              f"realized {lv['realized']}")
    e = s["energy"]
    print(f"  energy residual {e['balance_residual']:.4g} ({e['relative_residual']:.2e} rel)")
    c = s["contact"]
    print(f"  contact: min gap {c['min_gap']:.3g}, resets {c['resets']}, "
          f"violations {len(c['violations'])}")
    print(f"  wall {s['timings']['total']:.2f} s, output in {where}")
    if len(reports) > 1:
        ref = [(where / n).read_bytes() for n in ("timeseries.csv", "contact_log.csv")]
        for other, _ in reports[1:]:
            got = [(other / n).read_bytes() for n in ("timeseries.csv", "contact_log.csv")]
            if got != ref:
                print(f"repeat output in {other} differs from {where}", file=sys.stderr)
                return EXIT_OTHER
        print(f"  {len(reports)} repeats bitwise identical")
    return 0


def _bench(args):
    if args.config is not None:
        scn, _ = load_scenario(args.config)

        def run(threads):
            t0 = time.perf_counter()
            run_scenario(scn, None, threads=threads, steps=args.steps)
            return time.perf_counter() - t0

        points = bench.scale_bench(args.threads, steps=args.steps, run=run)
    else:
        points = bench.scale_bench(args.threads, n_elements=args.elements, steps=args.steps)
    print(f"backend {kernels.BACKEND}, {bench.cpu_count()} CPU(s) available")
    print(bench.format_scaling(points))
    if args.kernels:
        res = bench.kernel_bench()
        print(json.dumps(res, indent=1))
    return 0


def _check(args):
    results = checks.refinement_suite(args.seed, args.cases)
    print(checks.format_suite(results))
    return 0 if all(r.ok for r in results) else EXIT_OTHER


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "bench": _bench, "check": _check}[args.command]
    try:
        return handler(args)
    except Exception as exc:  # every failure leaves as one structured line
        cat, code = classify(exc)
        print(json.dumps({"error": cat, "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
