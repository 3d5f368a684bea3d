"""Box-counting and cap-counting dimension estimates, cap-criterion certificates.

Every dimension reported here is a finite-scale counting estimate, never a
Hausdorff dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .measures import PointMeasure
from .projections import (
    DEFAULT_EXCLUSION,
    SphereCapGrid,
    capset_size,
    directions_from,
    histogram_from_directions,
    top_mass,
)

UNRELIABLE_RESIDUAL = 0.25


@dataclass
class DimensionFit:
    slope: float
    intercept: float
    residual: float
    window: tuple[int, int]
    counts: list[tuple[int, int]]

    @property
    def reliable(self) -> bool:
        return self.residual <= UNRELIABLE_RESIDUAL


def _window(window) -> list[int]:
    k0, k1 = int(window[0]), int(window[1])
    if k1 - k0 < 2:
        raise ConfigError(f"window {window} must span at least 3 scales")
    return list(range(k0, k1 + 1))


def fit_counts(ks, counts) -> DimensionFit:
    """Least-squares slope of log(count) against log(1/delta_k) = k log 2."""
    ks = np.asarray(ks, dtype=float)
    counts = np.asarray(counts, dtype=float)
    x = ks * math.log(2)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return DimensionFit(
        slope=float(slope),
        intercept=float(intercept),
        residual=resid,
        window=(int(ks[0]), int(ks[-1])),
        counts=[(int(k), int(c)) for k, c in zip(ks, counts)],
    )


def box_counts(points, ks, origin=None, side: float = 1.0) -> list[int]:
    """Occupied dyadic boxes of side ``side`` * 2^-k, anchored at ``origin``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    origin = np.zeros(pts.shape[1]) if origin is None else np.asarray(origin, dtype=float)
    rel = (pts - origin) / side
    out = []
    for k in ks:
        n = 2**k
        idx = np.clip(np.floor(rel * n).astype(np.int64), 0, n - 1)
        out.append(len(np.unique(idx, axis=0)))
    return out


def box_dimension(points, window, origin=None, side: float | None = None) -> DimensionFit:
    """Box-counting estimate over dyadic scales k = window[0] .. window[1].

    Boxes tile the cube ``origin + side * [0, 1]^d``; by default the unit
    cube, which is where the Cantor constructions live.
    """
    if isinstance(points, PointMeasure):
        points = points.locations
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ConfigError("box_dimension needs at least one point")
    ks = _window(window)
    side = 1.0 if side is None else float(side)
    return fit_counts(ks, box_counts(pts, ks, origin, side))


def cube_for(points) -> tuple[np.ndarray, float]:
    """Smallest axis-aligned cube containing ``points`` (slightly inflated)."""
    pts = np.atleast_2d(points)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = float((hi - lo).max()) * (1 + 1e-9) or 1.0
    return lo, side


def min_caps_for_fraction(masses: np.ndarray, fraction: float) -> int:
    total = masses.sum()
    if total <= 0:
        return 0
    desc = np.sort(masses)[::-1]
    csum = np.cumsum(desc)
    return int(np.searchsorted(csum, fraction * total * (1 - 1e-12)) + 1)


def radial_histograms(mu: PointMeasure, x, ks, exclusion_radius=DEFAULT_EXCLUSION):
    """Radial histograms of ``mu`` from ``x`` on the cap grid of each k."""
    dirs = directions_from(mu, x, exclusion_radius)
    return {k: histogram_from_directions(dirs, mu.weights, _grid(mu.dim, k)) for k in ks}


_GRIDS: dict[tuple[int, int], SphereCapGrid] = {}


def _grid(d: int, k: int) -> SphereCapGrid:
    # grids are immutable after construction; share them across calls
    key = (d, int(k))
    if key not in _GRIDS:
        _GRIDS[key] = SphereCapGrid(d, int(k))
    return _GRIDS[key]


def cap_counting_dimension(
    mu: PointMeasure,
    x,
    window,
    mass_fraction: float = 0.99,
    exclusion_radius: float = DEFAULT_EXCLUSION,
    histograms=None,
) -> DimensionFit:
    """Estimate dim pi^x(E) from the fewest caps holding ``mass_fraction``."""
    if not 0 < mass_fraction <= 1:
        raise ConfigError("mass_fraction must lie in (0, 1]")
    ks = _window(window)
    hists = histograms or radial_histograms(mu, x, ks, exclusion_radius)
    counts = [min_caps_for_fraction(hists[k], mass_fraction) for k in ks]
    return fit_counts(ks, counts)


@dataclass
class ScaleRecord:
    k: int
    mass: float
    threshold: float
    passed: bool


@dataclass
class CriteriaCertificate:
    viewpoint: tuple[float, ...]
    tau: float
    beta: float
    records: list[ScaleRecord] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {
            "viewpoint": list(self.viewpoint),
            "tau": self.tau,
            "beta": self.beta,
            "verdict": "PASS" if self.verdict else "FAIL",
            "scales": [
                {"k": r.k, "mass": r.mass, "threshold": r.threshold, "passed": r.passed}
                for r in self.records
            ],
        }


def criteria_certificate(
    mu_E: PointMeasure,
    x,
    tau: float,
    beta: float,
    window,
    exclusion_radius: float = DEFAULT_EXCLUSION,
    histograms=None,
) -> CriteriaCertificate:
    """Check mass(pi^x in D) < delta_k^beta for the worst D at every k in window.

    A pass is the finite-window version of the cap criterion's hypothesis.
    """
    d = mu_E.dim
    if not 0 < tau <= d - 1:
        raise ConfigError(f"tau={tau} outside (0, {d - 1}]")
    if not beta > 0:
        raise ConfigError("beta must be positive")
    ks = list(range(int(window[0]), int(window[1]) + 1))
    if not ks:
        raise ConfigError("empty window")
    hists = histograms or radial_histograms(mu_E, x, ks, exclusion_radius)
    cert = CriteriaCertificate(tuple(float(c) for c in np.asarray(x, dtype=float)), tau, beta)
    for k in ks:
        mass = top_mass(hists[k], capset_size(k, tau))
        threshold = 2.0 ** (-k * beta)
        cert.records.append(ScaleRecord(k, mass, threshold, mass < threshold))
    return cert
