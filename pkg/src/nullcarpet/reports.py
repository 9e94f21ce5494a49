"""JSON-ready reports behind each CLI subcommand.

Every function here is a pure function of its arguments (seeds included), so
re-running a command reproduces its output byte for byte.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np

from . import carpet, segments, wedges
from .config import ExperimentConfig
from .derivatives import dir_derivative, frechet_check, lookup
from .errors import CarpetError, ConfigError, MalformedCertificate
from .exact import fmt, fmt_point, frac, point, sq_norm, sub
from .poset import Index, Schedule
from .search import CarpetSampler, run_search

DEMO_LABEL = "desk-scale evidence, not a proof"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def membership_report(x, index: Index, depth: int) -> dict:
    got = carpet.member_depth(x, index, depth)
    out = got.to_json()
    out["ok"] = bool(got)
    if not got:
        out["index"] = index.to_json()
        out["schedule"] = index.schedule.to_json()
        out["depth"] = depth
    return out


def measure_report(sched: Schedule, M: int, index: Index | None = None, samples: int = 0, seed: int = 0) -> dict:
    bound = carpet.measure_bound(sched, M)
    out = {"M": M, "schedule": sched.to_json(), "measure_bound": fmt(bound), "measure_bound_float": float(bound)}
    if index is not None and samples > 0:
        est = carpet.monte_carlo_area(index, M, samples, seed)
        out["monte_carlo"] = est.to_json()
        out["within_3_sigma"] = est.estimate <= float(bound) + 3 * est.sigma
    return out


def segment_report(x, i: Index, j: Index, eps, direction, delta=None, depth=None) -> dict:
    d = direction if isinstance(direction, segments.RationalDirection) else segments.RationalDirection(*direction)
    if delta is None:
        delta = Fraction(9, 10) * segments.delta0(i, j, eps, d)
    cert = segments.find_segment(x, i, j, eps, d, delta, depth=depth)
    return cert.to_json()


def wedge_report(x, i: Index, j: Index, eps, v, delta=None, net: bool = False) -> dict:
    if delta is None:
        bound = wedges.delta4(i, j, eps) if net else wedges.delta3(i, j, eps, *v)
        delta = Fraction(9, 10) * bound
    build = wedges.find_wedge_net if net else wedges.find_wedge
    return build(x, i, j, eps, *v, delta).to_json()


def search_report(config: ExperimentConfig, x0=None, e0=None) -> dict:
    """Run the pair search from the configured chain; returns the summary and trace."""
    k, i0, l = config.index_chain()
    g = lookup(config.function)
    x0 = config.y if x0 is None else x0
    e0 = (1.0, 0.0) if e0 is None else e0
    x0f = [float(c) for c in x0]
    rep = run_search(
        g,
        x0f,
        e0,
        i0,
        l,
        float(config.d) / 2,
        g.lip,
        25 * math.sqrt(2 * g.lip),
        config.iterations,
        sampler=CarpetSampler(depth=config.sampler_depth, seed=config.search_seed),
        tol=config.tolerances,
    )
    return {"summary": rep.to_json(), "trace": [s.to_json() for s in rep.states], "_report": rep}


def run_demo(config: ExperimentConfig) -> dict:
    """End-to-end run of the pipeline on one configured test function."""
    k, i0, l = config.index_chain()
    stage = "start"
    try:
        stage = "membership"
        y = point(config.y)
        if any(c.denominator != 1 for c in y):
            raise CarpetError("y must be an integer point")
        ycert = carpet.member_depth(y, k, config.sampler_depth)
        stage = "search"
        sr = search_report(config)
        rep = sr.pop("_report")
        final = rep.final
        stage = "frechet"
        radii = [2.0**-p for p in range(4, 17)]
        # the candidate derivative is the gradient, read off along the axes
        basis = np.eye(len(final.x))
        grad = np.array([dir_derivative(final.f, final.x, u, tol=config.tolerances).value for u in basis])
        gnorm = float(np.linalg.norm(grad))
        direction = grad / gnorm if gnorm > 0 else np.asarray(final.e)
        fr = frechet_check(final.f, final.x, direction, gnorm, radii)
        stage = "report"
        xq = point(final.x)
        xcert = carpet.member_depth(xq, l, config.sampler_depth)
        dist = float(np.linalg.norm(np.subtract(final.x, [float(c) for c in y])))
    except CarpetError as exc:
        exc.stage = stage
        raise
    trace = [s.history[-1] / rep.scale for s in rep.states]
    return {
        "label": DEMO_LABEL,
        "config": {"function": config.function, "k": fmt(config.k), "i0": fmt(config.i0), "l": fmt(config.l), "d": fmt(config.d)},
        "y": fmt_point(y),
        "y_in_M_k": bool(ycert),
        "x": list(final.x),
        "distance_to_y": dist,
        "distance_ok": dist <= float(config.d),
        "x_in_M_l_depth": config.sampler_depth if xcert else None,
        "x_in_M_l": bool(xcert),
        "derivative_trace": trace,
        "trace_nondecreasing": all(b >= a - 1e-6 for a, b in zip(trace, trace[1:])),
        "shift_norm": rep.shift_norm(),
        "shift_ok": rep.shift_norm() <= rep.mu,
        "gradient": (grad / rep.scale).tolist(),
        "frechet": fr.to_json(),
        "search": sr["summary"],
    }


# ------------------------------------------------------------------ verify


def _verify_segment(obj) -> dict:
    cert = segments.SegmentCertificate.from_json(obj)
    problems = segments.check_certificate(cert)
    rep = segments.verify_segment_avoidance(cert.endpoints, cert.j, cert.depth)
    return {"kind": "segment", "ok": not problems, "problems": problems, "avoidance": rep.to_json()}


def _verify_wedge(obj) -> dict:
    sched = Schedule.from_json(obj["schedule"])
    j = Index.from_json(obj["j"], sched)
    eps, delta, depth = frac(obj["eps"]), frac(obj["delta"]), int(obj["depth"])
    x = point(obj["x"])
    v = [point(w) for w in obj["v"]]
    vp = [point(w) for w in obj["v_prime"]]
    pts = [point(p) for p in obj["points"]]
    problems = []
    for m, (a, b) in enumerate(zip(vp, v), 1):
        if sq_norm(sub(a, b)) > eps * eps:
            problems.append(f"|v'_{m} - v_{m}| exceeds eps")
    for m, (p, w) in enumerate(zip(pts, vp), 1):
        if p != tuple(c + delta * wc for c, wc in zip(x, w)):
            problems.append(f"point {m} is not x + delta v'_{m}")
    reports = []
    for name, seg in (("leg-1", (pts[0], pts[2])), ("leg-2", (pts[2], pts[1]))):
        rep = segments.verify_segment_avoidance(seg, j, depth)
        reports.append(rep.to_json())
        if not rep.ok:
            problems.append(f"{name} meets a level-{rep.level} square")
    # the apex must be the crossing of the two certified leg lines
    legs = [segments.SegmentCertificate.from_json(leg["segment"]) for leg in obj["legs"]]
    dirs = [(sg.direction.a, sg.direction.b) for sg in legs]
    par = wedges.line_intersection(legs[0].base, dirs[0], legs[1].base, dirs[1])
    if par is None:
        problems.append("leg lines are parallel")
    else:
        apex = tuple(b + par[0] * d for b, d in zip(legs[0].base, dirs[0]))
        if apex != pts[2]:
            problems.append("apex differs from the crossing of the leg lines")
        for m, sg in enumerate(legs, 1):
            if (sg.base != pts[m - 1]) or not (0 <= par[m - 1] <= sg.t_len):
                problems.append(f"leg {m} does not run from its end point through the apex")
    return {"kind": "wedge", "ok": not problems, "problems": problems, "avoidance": reports}


def _verify_product(obj) -> dict:
    planar = _verify_wedge(obj["planar"])
    problems = list(planar["problems"])
    u = [point(w) for w in obj["u"]]
    up = [point(w) for w in obj["u_prime"]]
    eps = frac(obj["planar"]["eps"])
    for m, (a, b) in enumerate(zip(up, u), 1):
        if a[2:] != b[2:]:
            problems.append(f"tail of u'_{m} differs from the input")
        if sq_norm(sub(a, b)) > eps * eps:
            problems.append(f"|u'_{m} - u_{m}| exceeds eps")
    return {"kind": "product-wedge", "ok": not problems, "problems": problems, "planar": planar}


def _verify_membership(obj) -> dict:
    got = carpet.check_certificate(obj)
    out = {"kind": "membership", "ok": bool(got), "problems": []}
    if not got:
        out["problems"].append(f"point lies in a level-{got.level} square")
        out["square"] = got.square.to_json()
    else:
        out["slacks"] = [s.to_json() for s in got.slacks]
    return out


_VERIFIERS = {
    "segment": _verify_segment,
    "wedge": _verify_wedge,
    "product-wedge": _verify_product,
    "membership": _verify_membership,
}


def verify_certificate(obj) -> dict:
    """Replay the independent oracle for a serialized certificate."""
    if not isinstance(obj, dict) or obj.get("kind") not in _VERIFIERS:
        raise MalformedCertificate(f"unknown certificate kind {obj.get('kind') if isinstance(obj, dict) else None!r}")
    try:
        return _VERIFIERS[obj["kind"]](obj)
    except (KeyError, IndexError, TypeError, ValueError, ZeroDivisionError, ConfigError) as exc:
        raise MalformedCertificate(f"malformed {obj['kind']} certificate: {exc!r}") from exc


def verify_text(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCertificate(f"not valid JSON: {exc}") from exc
    return verify_certificate(obj)
