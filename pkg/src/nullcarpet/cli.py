"""``nullcarpet`` command line.

Exit codes: 0 pass, 2 hypothesis or validation failure, 3 oracle failure,
4 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import reports
from .config import ExperimentConfig, load_config
from .errors import (
    CarpetError,
    ConfigError,
    HypothesisViolated,
    MalformedCertificate,
    NotComparable,
    PreconditionViolated,
)
from .exact import frac
from .poset import Schedule, power
from .render import certificate_overlays, render_svg

EXIT_OK, EXIT_HYPOTHESIS, EXIT_ORACLE, EXIT_MALFORMED = 0, 2, 3, 4


def _rat(text: str) -> Fraction:
    try:
        return frac(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _vec(size: int):
    def parse(text: str) -> tuple[Fraction, ...]:
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != size:
            raise argparse.ArgumentTypeError(f"expected {size} comma-separated rationals, got {text!r}")
        return tuple(_rat(p) for p in parts)

    return parse


def _schedule(args) -> Schedule:
    return Schedule(offset=args.schedule_offset)


def _emit(args, obj: dict, human: str) -> None:
    text = reports.dumps(obj)
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    if args.json:
        sys.stdout.write(text)
    else:
        print(human)


def cmd_render(args) -> int:
    sched = _schedule(args)
    overlays = []
    for path in args.overlay or ():
        overlays += certificate_overlays(json.loads(Path(path).read_text(encoding="utf-8")))
    w = args.window
    svg = render_svg(((w[0], w[1]), (w[2], w[3])), power(args.theta, sched), args.depth, overlays)
    if args.output:
        Path(args.output).write_text(svg, encoding="utf-8")
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def cmd_member(args) -> int:
    rep = reports.membership_report(args.point, power(args.theta, _schedule(args)), args.depth)
    human = "member" if rep["ok"] else f"not a member: level-{rep['square']['level']} square"
    _emit(args, rep, human)
    return EXIT_OK if rep["ok"] else EXIT_ORACLE


def cmd_segment(args) -> int:
    sched = _schedule(args)
    i, j = power(args.i, sched), power(args.j, sched)
    cert = reports.segment_report(args.point, i, j, args.eps, tuple(args.direction), args.delta, args.depth)
    _emit(args, cert, f"segment {cert['base']} -> {cert['end']} certified to depth {cert['depth']}")
    return EXIT_OK


def cmd_wedge(args) -> int:
    sched = _schedule(args)
    i, j = power(args.i, sched), power(args.j, sched)
    v = [args.v1, args.v2, args.v3]
    cert = reports.wedge_report(args.point, i, j, args.eps, v, args.delta, net=args.net)
    _emit(args, cert, f"wedge through {cert['points']} certified to depth {cert['depth']}")
    return EXIT_OK


def cmd_measure(args) -> int:
    sched = _schedule(args)
    idx = power(args.theta, sched) if args.theta is not None else None
    rep = reports.measure_report(sched, args.M, idx, args.samples, args.seed)
    human = f"measure_bound({args.M}) = {rep['measure_bound']} ~ {rep['measure_bound_float']:.6g}"
    if "monte_carlo" in rep:
        human += f"; sampled area {rep['monte_carlo']['estimate']:.6g}"
    _emit(args, rep, human)
    return EXIT_OK


def _config(args) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def cmd_search(args) -> int:
    cfg = _config(args)
    sr = reports.search_report(cfg)
    sr.pop("_report")
    if args.trace:
        Path(args.trace).write_text("\n".join(json.dumps(row, sort_keys=True) for row in sr["trace"]) + "\n", encoding="utf-8")
    s = sr["summary"]
    _emit(args, sr, f"{s['iterations']} iterations, final derivative {s['final_derivative']:.6g}, shift {s['shift_norm']:.3g}")
    return EXIT_OK


def cmd_demo5(args) -> int:
    cfg = _config(args)
    rep = reports.run_demo(cfg)
    ok = rep["distance_ok"] and rep["x_in_M_l"] and rep["trace_nondecreasing"] and rep["shift_ok"]
    human = (
        f"[{rep['label']}] |x - y| = {rep['distance_to_y']:.3g}, "
        f"final derivative {rep['derivative_trace'][-1]:.6g}, Frechet slope {rep['frechet']['slope']}"
    )
    _emit(args, rep, human)
    return EXIT_OK if ok else EXIT_ORACLE


def cmd_verify(args) -> int:
    try:
        text = Path(args.certificate).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedCertificate(f"cannot read {args.certificate}: {exc}") from exc
    rep = reports.verify_text(text)
    human = "pass" if rep["ok"] else "fail: " + "; ".join(rep["problems"])
    _emit(args, rep, human)
    return EXIT_OK if rep["ok"] else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nullcarpet", description="Carpet certificates and derivative search.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the machine-readable report")
    common.add_argument("--schedule-offset", type=int, default=0, metavar="N", help="use N_r = 2 ceil(sqrt(r + N)) + 1")
    common.add_argument("-o", "--output", help="write the artifact here")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", parents=[common], help="SVG of a carpet window")
    r.add_argument("--window", type=_vec(4), metavar="X0,Y0,X1,Y1", default=(Fraction(0), Fraction(0), Fraction(1), Fraction(1)))
    r.add_argument("--theta", type=_rat, default=Fraction(1, 2))
    r.add_argument("--depth", type=int, default=2)
    r.add_argument("--overlay", action="append", help="certificate JSON to draw on top")
    r.set_defaults(func=cmd_render)

    m = sub.add_parser("member", parents=[common], help="membership certificate for a point")
    m.add_argument("--point", type=_vec(2), required=True, metavar="X,Y")
    m.add_argument("--theta", type=_rat, required=True)
    m.add_argument("--depth", type=int, required=True)
    m.set_defaults(func=cmd_member)

    s = sub.add_parser("segment", parents=[common], help="certified segment near a carpet point")
    s.add_argument("--point", type=_vec(2), required=True, metavar="X,Y")
    s.add_argument("--i", type=_rat, required=True, help="theta of the starting index")
    s.add_argument("--j", type=_rat, required=True, help="theta of the target index")
    s.add_argument("--eps", type=_rat, required=True)
    s.add_argument("--direction", type=int, nargs=2, required=True, metavar=("A", "B"))
    s.add_argument("--delta", type=_rat, help="segment length (default 0.9 delta0)")
    s.add_argument("--depth", type=int)
    s.set_defaults(func=cmd_segment)

    w = sub.add_parser("wedge", parents=[common], help="certified two-segment wedge")
    w.add_argument("--point", type=_vec(2), required=True, metavar="X,Y")
    w.add_argument("--i", type=_rat, required=True)
    w.add_argument("--j", type=_rat, required=True)
    w.add_argument("--eps", type=_rat, required=True)
    for name in ("--v1", "--v2", "--v3"):
        w.add_argument(name, type=_vec(2), required=True, metavar="X,Y")
    w.add_argument("--delta", type=_rat)
    w.add_argument("--net", action="store_true", help="snap to the disk net first")
    w.set_defaults(func=cmd_wedge)

    me = sub.add_parser("measure", parents=[common], help="area bound and sampled area")
    me.add_argument("--M", type=int, required=True)
    me.add_argument("--theta", type=_rat)
    me.add_argument("--samples", type=int, default=0)
    me.add_argument("--seed", type=int, default=0)
    me.set_defaults(func=cmd_measure)

    se = sub.add_parser("search", parents=[common], help="iterated pair search")
    se.add_argument("--config")
    se.add_argument("--trace", help="write one JSON line per step here")
    se.set_defaults(func=cmd_search)

    d = sub.add_parser("demo5", parents=[common], help="end-to-end demonstration run")
    d.add_argument("--config")
    d.set_defaults(func=cmd_demo5)

    v = sub.add_parser("verify", parents=[common], help="replay a certificate's oracle")
    v.add_argument("certificate")
    v.set_defaults(func=cmd_verify)
    return p


def _exit_code(exc: CarpetError) -> int:
    if isinstance(exc, MalformedCertificate):
        return EXIT_MALFORMED
    if isinstance(exc, (HypothesisViolated, PreconditionViolated, ConfigError, NotComparable)):
        return EXIT_HYPOTHESIS
    return EXIT_ORACLE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CarpetError as exc:
        stage = getattr(exc, "stage", None)
        payload = {"error": exc.code, "message": str(exc)}
        if stage:
            payload["stage"] = stage
        if getattr(args, "json", False):
            sys.stdout.write(reports.dumps(payload))
        print(f"{exc.code}: {exc}" + (f" (stage {stage})" if stage else ""), file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
