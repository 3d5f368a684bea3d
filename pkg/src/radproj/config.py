"""Declarative experiment configuration (INI ``key = value`` sections).

Sections
--------
``[run]``         seed
``[E]``, ``[F]``  measure specs: ``kind`` plus kind-specific keys, then the
                  optional transforms ``scale``, ``rotate`` (radians, d = 2)
                  and ``offset`` applied in that order
``[viewpoints]``  lattice ``lo``, ``hi``, ``spacing`` (scalar or per axis)
``[params]``      window, tau, slack, beta, s_E, s_F, p, epsilon, rho0,
                  mass_fraction, box_window
``[output]``      dir, prefix, pgm

Measure kinds and their keys::

    cantor   base, digits ("0 0; 0 3; ..."), depth
    segment  a, b, n
    circle   center, radius, n, phase
    grid     lo, hi, n            (n^d equal atoms at cell centres)
    random   lo, hi, n            (uniform, drawn from the run seed)
    file     path

Vectors are whitespace-separated numbers.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .io import read_measure
from .measures import (
    CantorSpec,
    PointMeasure,
    build_cantor_measure,
    circle_measure,
    segment_measure,
)
from .projections import DEFAULT_EXCLUSION

KINDS = ("cantor", "segment", "circle", "grid", "random", "file")


def _vec(section: str, key: str, text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split()], dtype=float)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected numbers, got {text!r}") from None


def _num(section, key, text, cast=float):
    try:
        return cast(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected {cast.__name__}, got {text!r}") from None


@dataclass
class MeasureSpec:
    section: str
    kind: str
    options: dict[str, str]

    def _get(self, key, default=None):
        if key in self.options:
            return self.options[key]
        if default is None:
            raise ConfigError(f"[{self.section}] missing key '{key}' for kind '{self.kind}'")
        return default

    def build(self, seed: int = 0, base_dir: Path | None = None) -> PointMeasure:
        s, get = self.section, self._get
        if self.kind == "cantor":
            digits = [tuple(int(c) for c in grp.split()) for grp in get("digits").split(";") if grp.strip()]
            if not digits:
                raise ConfigError(f"[{s}] digits: empty digit set")
            spec = CantorSpec(len(digits[0]), _num(s, "base", get("base"), int), tuple(digits),
                              _num(s, "depth", get("depth"), int))
            mu = build_cantor_measure(spec)
        elif self.kind == "segment":
            mu = segment_measure(_vec(s, "a", get("a")), _vec(s, "b", get("b")), _num(s, "n", get("n"), int))
        elif self.kind == "circle":
            mu = circle_measure(_vec(s, "center", get("center")), _num(s, "radius", get("radius")),
                                _num(s, "n", get("n"), int), _num(s, "phase", get("phase", "0")))
        elif self.kind in ("grid", "random"):
            lo, hi = _vec(s, "lo", get("lo")), _vec(s, "hi", get("hi"))
            n = _num(s, "n", get("n"), int)
            if lo.shape != hi.shape or np.any(hi <= lo) or n < 1:
                raise ConfigError(f"[{s}] need lo < hi componentwise and n >= 1")
            if self.kind == "grid":
                axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(n) + 0.5) / n for i in range(len(lo))]
                pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
            else:
                pts = np.random.default_rng(seed).uniform(lo, hi, size=(n, len(lo)))
            mu = PointMeasure(pts, np.full(len(pts), 1.0 / len(pts)))
        elif self.kind == "file":
            path = Path(get("path"))
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            mu = read_measure(path)
        else:
            raise ConfigError(f"[{s}] kind must be one of {KINDS}, got {self.kind!r}")
        if "scale" in self.options:
            mu = mu.scale(_num(s, "scale", self.options["scale"]))
        if "rotate" in self.options:
            mu = mu.rotate(_num(s, "rotate", self.options["rotate"]))
        if "offset" in self.options:
            off = _vec(s, "offset", self.options["offset"])
            if off.shape != (mu.dim,):
                raise ConfigError(f"[{s}] offset needs {mu.dim} coordinates")
            mu = mu.translate(off)
        return mu


@dataclass
class Lattice:
    """Axis-aligned viewpoint lattice; ``spacing`` is one number or one per axis."""

    lo: np.ndarray
    hi: np.ndarray
    spacing: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        sp = np.asarray(self.spacing, dtype=float).reshape(-1)
        if sp.size == 1:
            sp = np.full(self.lo.shape, sp[0])
        self.spacing = sp
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise ConfigError("[viewpoints] need lo <= hi componentwise")
        if sp.shape != self.lo.shape or not np.all(sp > 0):
            raise ConfigError("[viewpoints] spacing must be positive (one value or one per axis)")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(np.floor((h - l) / s + 1e-9)) + 1
                     for l, h, s in zip(self.lo, self.hi, self.spacing))

    def points(self) -> np.ndarray:
        """Lattice points in C order (last axis fastest)."""
        axes = [l + s * np.arange(n) for l, s, n in zip(self.lo, self.spacing, self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(self.lo))


@dataclass
class Params:
    window: tuple[int, int] = (3, 7)
    tau: float | None = None
    slack: float = 0.1
    beta: float | None = None
    s_E: float | None = None
    s_F: float | None = None
    p: float = 2.0
    epsilon: float = 0.05
    rho0: float = DEFAULT_EXCLUSION
    mass_fraction: float = 0.99
    box_window: tuple[int, int] = (2, 6)

    def __post_init__(self):
        k0, k1 = self.window
        if not 1 <= k0 <= k1:
            raise ConfigError("[params] window must satisfy 1 <= k0 <= k1")
        if self.slack < 0:
            raise ConfigError("[params] slack must be nonnegative")
        if self.beta is not None and not self.beta > 0:
            raise ConfigError("[params] beta must be positive")
        if not self.p > 1:
            raise ConfigError("[params] p must exceed 1")
        if not self.rho0 > 0:
            raise ConfigError("[params] rho0 must be positive")
        if not 0 < self.mass_fraction <= 1:
            raise ConfigError("[params] mass_fraction must lie in (0, 1]")


@dataclass
class Output:
    dir: Path = Path("out")
    prefix: str = "run"
    pgm: bool = True

    def path(self, suffix: str) -> Path:
        return self.dir / f"{self.prefix}_{suffix}"


@dataclass
class ExperimentConfig:
    E: MeasureSpec
    F: MeasureSpec | None = None
    viewpoints: Lattice | None = None
    params: Params = field(default_factory=Params)
    output: Output = field(default_factory=Output)
    seed: int = 0
    base_dir: Path | None = None

    def build_E(self) -> PointMeasure:
        return self.E.build(self.seed, self.base_dir)

    def build_F(self) -> PointMeasure:
        if self.F is None:
            raise ConfigError("config has no [F] section")
        # F gets its own stream so E and F never share random draws
        return self.F.build(self.seed + 1, self.base_dir)


_PARAM_FLOATS = ("tau", "slack", "beta", "s_E", "s_F", "p", "epsilon", "rho0", "mass_fraction")


def _window(section, key, text):
    v = _vec(section, key, text)
    if v.shape != (2,) or np.any(v != np.round(v)):
        raise ConfigError(f"[{section}] {key}: expected two integers")
    return int(v[0]), int(v[1])


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep s_E / s_F case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    known = {"run", "E", "F", "viewpoints", "params", "output"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")
    if not cp.has_section("E"):
        raise ConfigError("config needs an [E] section")

    def measure(name):
        if not cp.has_section(name):
            return None
        opts = dict(cp[name])
        kind = opts.pop("kind", None)
        if kind not in KINDS:
            raise ConfigError(f"[{name}] kind must be one of {KINDS}, got {kind!r}")
        return MeasureSpec(name, kind, opts)

    lattice = None
    if cp.has_section("viewpoints"):
        v = cp["viewpoints"]
        for key in ("lo", "hi", "spacing"):
            if key not in v:
                raise ConfigError(f"[viewpoints] missing key '{key}'")
        lattice = Lattice(_vec("viewpoints", "lo", v["lo"]), _vec("viewpoints", "hi", v["hi"]),
                          _vec("viewpoints", "spacing", v["spacing"]))

    kw = {}
    if cp.has_section("params"):
        for key, val in cp["params"].items():
            if key in ("window", "box_window"):
                kw[key] = _window("params", key, val)
            elif key in _PARAM_FLOATS:
                kw[key] = _num("params", key, val)
            else:
                raise ConfigError(f"[params] unknown key '{key}'")
    params = Params(**kw)

    out = Output()
    if cp.has_section("output"):
        o = cp["output"]
        d = Path(o.get("dir", "out"))
        if base_dir is not None and not d.is_absolute():
            d = base_dir / d
        try:
            pgm = o.getboolean("pgm", True)
        except ValueError:
            raise ConfigError("[output] pgm must be a boolean") from None
        out = Output(d, o.get("prefix", "run"), pgm)

    seed = 0
    if cp.has_section("run"):
        seed = _num("run", "seed", cp["run"].get("seed", "0"), int)

    cfg = ExperimentConfig(measure("E"), measure("F"), lattice, params, out, seed, base_dir)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), base_dir=path.parent)
