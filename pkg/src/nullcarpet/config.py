"""Experiment configuration: an INI file with every rational written as ``p/q``.

Example::

    [schedule]
    rule = 2ceilsqrt+1
    offset = 0

    [indices]
    k = 3/4
    i0 = 1/2
    l = 0

    [demo]
    function = abs-x2
    y = 0/1, 0/1
    d = 1/2
    iterations = 20

    [seeds]
    search = 1
    monte_carlo = 0

    [tolerances]
    deriv_abs = 1e-9

    [output]
    dir = out
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from fractions import Fraction
from io import StringIO
from pathlib import Path

from .derivatives import TEST_FUNCTIONS, Tolerances
from .errors import ConfigError
from .exact import fmt, frac
from .poset import DEFAULT_RULE, Index, Schedule, power, precedes


def _rational(text: str, key: str) -> Fraction:
    try:
        return frac(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key}: not a rational {text!r}") from exc


def _point(text: str, key: str) -> tuple[Fraction, ...]:
    return tuple(_rational(p, key) for p in text.split(","))


@dataclass(frozen=True)
class ExperimentConfig:
    schedule: Schedule = field(default_factory=Schedule)
    k: Fraction = Fraction(3, 4)
    i0: Fraction = Fraction(1, 2)
    l: Fraction = Fraction(0)
    function: str = "abs-x2"
    y: tuple[Fraction, ...] = (Fraction(0), Fraction(0))
    d: Fraction = Fraction(1, 2)
    iterations: int = 20
    sampler_depth: int = 6
    render_depth: int = 2
    search_seed: int = 1
    monte_carlo_seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: Path = Path(".")

    def __post_init__(self):
        for name in ("iterations", "sampler_depth", "render_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d <= 0:
            raise ConfigError("d must be positive")
        if self.function not in TEST_FUNCTIONS:
            raise ConfigError(f"unknown function {self.function!r}; known: {sorted(TEST_FUNCTIONS)}")
        idx = self.index_chain()
        for lo, hi, names in ((idx[0], idx[1], "k < i0"), (idx[1], idx[2], "i0 < l")):
            if not precedes(lo, hi):
                raise ConfigError(f"indices do not form a chain: {names} fails")

    def index_chain(self) -> tuple[Index, Index, Index]:
        return tuple(power(t, self.schedule) for t in (self.k, self.i0, self.l))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["schedule"] = {"rule": self.schedule.rule, "offset": str(self.schedule.offset)}
        if self.schedule.rule == "explicit":
            cp["schedule"]["values"] = ", ".join(map(str, self.schedule.values))
        cp["indices"] = {"k": fmt(self.k), "i0": fmt(self.i0), "l": fmt(self.l)}
        cp["demo"] = {
            "function": self.function,
            "y": ", ".join(fmt(c) for c in self.y),
            "d": fmt(self.d),
            "iterations": str(self.iterations),
            "sampler_depth": str(self.sampler_depth),
            "render_depth": str(self.render_depth),
        }
        cp["seeds"] = {"search": str(self.search_seed), "monte_carlo": str(self.monte_carlo_seed)}
        cp["tolerances"] = {f.name: repr(getattr(self.tolerances, f.name)) for f in fields(self.tolerances)}
        cp["output"] = {"dir": str(self.output_dir)}
        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    kw = {}
    if cp.has_section("schedule"):
        s = cp["schedule"]
        rule = s.get("rule", DEFAULT_RULE)
        if rule == "explicit":
            vals = tuple(int(v) for v in s.get("values", "").split(",") if v.strip())
            kw["schedule"] = Schedule(rule="explicit", values=vals)
        else:
            kw["schedule"] = Schedule(rule=rule, offset=int(s.get("offset", "0")))
    if cp.has_section("indices"):
        for key in ("k", "i0", "l"):
            if key in cp["indices"]:
                kw[key] = _rational(cp["indices"][key], f"indices.{key}")
    if cp.has_section("demo"):
        s = cp["demo"]
        if "function" in s:
            kw["function"] = s["function"].strip()
        if "y" in s:
            kw["y"] = _point(s["y"], "demo.y")
        if "d" in s:
            kw["d"] = _rational(s["d"], "demo.d")
        for key in ("iterations", "sampler_depth", "render_depth"):
            if key in s:
                kw[key] = s.getint(key)
    if cp.has_section("seeds"):
        s = cp["seeds"]
        kw["search_seed"] = s.getint("search", 1)
        kw["monte_carlo_seed"] = s.getint("monte_carlo", 0)
    if cp.has_section("tolerances"):
        known = {f.name for f in fields(Tolerances)}
        extra = set(cp["tolerances"]) - known
        if extra:
            raise ConfigError(f"unknown tolerance keys {sorted(extra)}")
        kw["tolerances"] = Tolerances(**{k: float(v) for k, v in cp["tolerances"].items()})
    if cp.has_section("output"):
        kw["output_dir"] = Path(cp["output"].get("dir", "."))
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
