"""Finitely supported measures and their Frostman exponents."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetError, ConfigError

MAX_ATOMS = 10**6


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """A nonnegative measure carried by finitely many weighted atoms in R^d.

    ``locations`` has shape (n, d) and ``weights`` shape (n,). Both arrays are
    made read-only on construction. A measure with zero atoms is allowed only
    through :meth:`empty` (it is what ``restrict`` returns when nothing is
    kept).
    """

    locations: np.ndarray
    weights: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        loc = np.array(self.locations, dtype=float, copy=True)
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if loc.ndim != 2 or loc.shape[1] not in (2, 3):
            raise ConfigError(f"locations must have shape (n, 2) or (n, 3), got {loc.shape}")
        if loc.shape[0] != w.shape[0]:
            raise ConfigError("locations and weights disagree in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(loc)):
            raise ConfigError("locations must be finite")
        loc.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total_mass", math.fsum(w.tolist()))

    @classmethod
    def empty(cls, d: int) -> "PointMeasure":
        return cls(np.zeros((0, d)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.locations.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.n_atoms == 0

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_empty:
            z = np.zeros(self.dim)
            return z, z.copy()
        return self.locations.min(axis=0), self.locations.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def translate(self, offset) -> "PointMeasure":
        return PointMeasure(self.locations + np.asarray(offset, dtype=float), self.weights)

    def scale(self, factor: float, center=None) -> "PointMeasure":
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        return PointMeasure(c + factor * (self.locations - c), self.weights)

    def rotate(self, angle: float, center=None) -> "PointMeasure":
        """Rotate a planar measure counterclockwise by ``angle`` radians."""
        if self.dim != 2:
            raise ConfigError("rotate is only defined for d = 2")
        c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        ca, sa = math.cos(angle), math.sin(angle)
        rot = np.array([[ca, -sa], [sa, ca]])
        return PointMeasure(c + (self.locations - c) @ rot.T, self.weights)

    def scale_weights(self, lam: float) -> "PointMeasure":
        if lam <= 0:
            raise ConfigError("weight scale must be positive")
        return PointMeasure(self.locations, self.weights * lam)

    def normalized(self) -> "PointMeasure":
        return self.scale_weights(1.0 / self.total_mass)


@dataclass(frozen=True)
class CantorSpec:
    """Self-similar digit-restricted Cantor set in [0, 1]^d."""

    dim: int
    base: int
    digits: tuple[tuple[int, ...], ...]
    depth: int

    def __post_init__(self):
        digits = tuple(sorted(set(tuple(int(c) for c in dg) for dg in self.digits)))
        object.__setattr__(self, "digits", digits)
        if self.dim not in (2, 3):
            raise ConfigError("ambient dimension must be 2 or 3")
        if self.base < 2:
            raise ConfigError("base must be at least 2")
        if self.depth < 1:
            raise ConfigError("depth must be at least 1")
        if not digits:
            raise ConfigError("digit set must be nonempty")
        for dg in digits:
            if len(dg) != self.dim or any(c < 0 or c >= self.base for c in dg):
                raise ConfigError(f"digit {dg} not in {{0..{self.base - 1}}}^{self.dim}")

    @property
    def nominal_dimension(self) -> float:
        return math.log(len(self.digits)) / math.log(self.base)

    @property
    def atom_count(self) -> int:
        return len(self.digits) ** self.depth

    @property
    def generation_scale(self) -> float:
        return float(self.base) ** -self.depth


def four_corner_spec(depth: int) -> CantorSpec:
    return CantorSpec(2, 4, ((0, 0), (0, 3), (3, 0), (3, 3)), depth)


def full_grid_spec(dim: int, base: int, depth: int) -> CantorSpec:
    return CantorSpec(dim, base, tuple(itertools.product(range(base), repeat=dim)), depth)


def build_cantor_measure(spec: CantorSpec, max_atoms: int = MAX_ATOMS) -> PointMeasure:
    """Uniform measure on the cell centres of the level-``depth`` Cantor cells."""
    count = spec.atom_count
    if count > max_atoms:
        raise BudgetError(
            f"Cantor measure would have {count} atoms (cap {max_atoms})", estimate=count
        )
    digits = np.array(spec.digits, dtype=float)
    corners = np.zeros((1, spec.dim))
    side = 1.0
    for _ in range(spec.depth):
        side /= spec.base
        corners = (corners[:, None, :] + side * digits[None, :, :]).reshape(-1, spec.dim)
    weights = np.full(count, float(len(spec.digits)) ** -spec.depth)
    return PointMeasure(corners + side / 2, weights)


def segment_measure(a, b, n: int) -> PointMeasure:
    """``n`` equal atoms at the midpoints of ``n`` equal pieces of [a, b]."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    t = (np.arange(n) + 0.5) / n
    return PointMeasure(a + t[:, None] * (b - a), np.full(n, 1.0 / n))


def circle_measure(center, radius: float, n: int, phase: float = 0.0) -> PointMeasure:
    """``n`` equal atoms equally spaced on a circle in the plane."""
    c = np.asarray(center, dtype=float)
    th = phase + 2 * np.pi * (np.arange(n) + 0.5) / n
    pts = c + radius * np.column_stack([np.cos(th), np.sin(th)])
    return PointMeasure(pts, np.full(n, 1.0 / n))


def restrict(mu: PointMeasure, keep) -> PointMeasure:
    """Sub-measure of the kept atoms.

    ``keep`` is a boolean mask, an index array, or a callable mapping the
    array of atom indices to a boolean mask.
    """
    if callable(keep):
        keep = keep(np.arange(mu.n_atoms))
    keep = np.asarray(keep)
    if keep.dtype != bool:
        mask = np.zeros(mu.n_atoms, dtype=bool)
        mask[keep.astype(int)] = True
        keep = mask
    if keep.shape != (mu.n_atoms,):
        raise ConfigError("mask length does not match atom count")
    if not keep.any():
        return PointMeasure.empty(mu.dim)
    return PointMeasure(mu.locations[keep], mu.weights[keep])


def ball_masses(mu: PointMeasure, centers, r: float, tree: cKDTree | None = None) -> np.ndarray:
    """Mass of the closed ball B(c, r) for every row c of ``centers``."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if mu.is_empty:
        return np.zeros(len(centers))
    tree = cKDTree(mu.locations) if tree is None else tree
    # closed balls: inflate by a few ulps so exact-distance atoms are kept
    rr = r * (1 + 1e-12)
    w = mu.weights
    if np.all(w == w[0]):
        return w[0] * tree.query_ball_point(centers, rr, return_length=True).astype(float)
    out = np.empty(len(centers))
    for i, idx in enumerate(tree.query_ball_point(centers, rr)):
        out[i] = w[idx].sum()
    return out


def nearest_neighbor_spacing(mu: PointMeasure) -> float:
    """Median nearest-neighbour distance (0 for a single atom)."""
    if mu.n_atoms < 2:
        return 0.0
    tree = cKDTree(mu.locations)
    dist, _ = tree.query(mu.locations, k=2)
    return float(np.median(dist[:, 1]))


@dataclass
class FrostmanFit:
    exponent: float
    log_constant: float
    scale_window: tuple[float, float]
    per_radius_sup: list[tuple[float, float]]
    below_resolution: list[float]

    def constant(self) -> float:
        return math.exp(self.log_constant)


def frostman_fit(
    mu: PointMeasure,
    radii: Sequence[float],
    window: tuple[float, float] | None = None,
) -> FrostmanFit:
    """Fit the growth exponent s in sup_x mu(B(x, r)) <= C r^s.

    Ball centres are restricted to atom locations. Radii below the median
    nearest-neighbour spacing are reported in ``below_resolution`` and left
    out of the least-squares fit; ``window=(r_max, r_min)`` narrows it further.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise ConfigError("frostman_fit needs at least 3 radii")
    if np.any(np.diff(radii) >= 0) or np.any(radii <= 0):
        raise ConfigError("radii must be positive and strictly decreasing")
    if mu.is_empty:
        raise ConfigError("cannot fit an empty measure")

    tree = cKDTree(mu.locations)
    sups = [float(ball_masses(mu, mu.locations, r, tree).max()) for r in radii]

    spacing = nearest_neighbor_spacing(mu)
    use = radii >= spacing
    if window is not None:
        r_hi, r_lo = max(window), min(window)
        use &= (radii <= r_hi * (1 + 1e-12)) & (radii >= r_lo * (1 - 1e-12))
    if use.sum() < 2:
        raise ConfigError("fewer than 2 radii left in the fit window")
    slope, intercept = np.polyfit(np.log(radii[use]), np.log(np.asarray(sups)[use]), 1)
    used = radii[use]
    return FrostmanFit(
        exponent=float(slope),
        log_constant=float(intercept),
        scale_window=(float(used.max()), float(used.min())),
        per_radius_sup=[(float(r), m) for r, m in zip(radii, sups)],
        below_resolution=[float(r) for r in radii[radii < spacing]],
    )


def geometric_radii(r_max: float, ratio: float, count: int) -> np.ndarray:
    return r_max * ratio ** np.arange(count, dtype=float)


def from_predicate(mu: PointMeasure, pred: Callable[[np.ndarray], np.ndarray]) -> PointMeasure:
    """Restrict by a predicate on atom locations."""
    return restrict(mu, np.asarray(pred(mu.locations), dtype=bool))
