"""Sphere cap grids, radial/orthogonal pushforwards and mollification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy import ndimage

from .errors import BudgetError, ConfigError, ProjectionError
from .measures import PointMeasure

MAX_SCALE = 16
DEFAULT_EXCLUSION = 0.5


@dataclass(frozen=True)
class ScaleIndex:
    k: int
    max_k: int = MAX_SCALE

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= self.max_k:
            raise ConfigError(f"scale index k={self.k} outside [1, {self.max_k}]")

    @property
    def delta(self) -> float:
        return math.ldexp(1.0, -int(self.k))


def as_scale(k) -> ScaleIndex:
    return k if isinstance(k, ScaleIndex) else ScaleIndex(int(k))


# ---------------------------------------------------------------- cap grids


class SphereCapGrid:
    """Partition of S^{d-1} into cells of diameter comparable to delta_k.

    d = 2: ceil(2 pi / delta) equal arcs, arc i = [i w, (i + 1) w).
    d = 3: equal-area partition into two polar caps and latitude collars,
    each collar split into equal longitude sectors (all cells have area
    4 pi / N with N = ceil(4 pi / delta^2)).
    """

    def __init__(self, d: int, scale):
        if d not in (2, 3):
            raise ConfigError("cap grids exist for d = 2 or 3 only")
        self.d = d
        self.scale = as_scale(scale)
        delta = self.scale.delta
        if d == 2:
            self.n_caps = math.ceil(2 * math.pi / delta)
            self.width = 2 * math.pi / self.n_caps
        else:
            self._build_sphere(delta)

    def _build_sphere(self, delta: float):
        n = math.ceil(4 * math.pi / delta**2)
        area = 4 * math.pi / n
        polar = 2 * math.asin(math.sqrt(area / (4 * math.pi)))
        n_collars = max(1, round((math.pi - 2 * polar) / math.sqrt(area)))
        fit = (math.pi - 2 * polar) / n_collars

        def cap_area(theta):
            return 4 * math.pi * math.sin(theta / 2) ** 2

        counts = [1]
        carry = 0.0
        for i in range(n_collars):
            ideal = (cap_area(polar + (i + 1) * fit) - cap_area(polar + i * fit)) / area
            m = max(1, round(ideal + carry))
            carry += ideal - m
            counts.append(m)
        counts.append(1)
        n = sum(counts)
        area = 4 * math.pi / n
        cum = np.cumsum(counts)
        edges = [0.0]
        for c in cum[:-1]:
            edges.append(2 * math.asin(min(1.0, math.sqrt(c * area / (4 * math.pi)))))
        edges.append(math.pi)
        self.n_caps = n
        self.zone_edges = np.array(edges)
        self.zone_counts = np.array(counts)
        self.zone_start = np.concatenate([[0], cum[:-1]])

    # -- geometry -----------------------------------------------------------

    @property
    def delta(self) -> float:
        return self.scale.delta

    def cap_index(self, directions: np.ndarray) -> np.ndarray:
        """Index of the cap containing each unit vector (ties -> lowest index)."""
        u = np.atleast_2d(directions)
        if self.d == 2:
            ang = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2 * np.pi)
            idx = np.ceil(ang / self.width).astype(np.int64) - 1
            return np.clip(idx, 0, self.n_caps - 1)
        theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
        zone = np.searchsorted(self.zone_edges, theta, side="left") - 1
        zone = np.clip(zone, 0, len(self.zone_counts) - 1)
        m = self.zone_counts[zone]
        phi = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2 * np.pi)
        j = np.clip(np.ceil(phi * m / (2 * np.pi)).astype(np.int64) - 1, 0, m - 1)
        return self.zone_start[zone] + j

    @cached_property
    def _cap_zone(self):
        return np.repeat(np.arange(len(self.zone_counts)), self.zone_counts)

    @cached_property
    def centers(self) -> np.ndarray:
        if self.d == 2:
            a = (np.arange(self.n_caps) + 0.5) * self.width
            return np.column_stack([np.cos(a), np.sin(a)])
        zone = self._cap_zone
        j = np.arange(self.n_caps) - self.zone_start[zone]
        m = self.zone_counts[zone]
        th = 0.5 * (self.zone_edges[zone] + self.zone_edges[zone + 1])
        th = np.where(m == 1, np.where(zone == 0, 0.0, np.pi), th)
        ph = (j + 0.5) * 2 * np.pi / m
        return np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    @cached_property
    def areas(self) -> np.ndarray:
        """Arc lengths (d = 2) or spherical areas (d = 3)."""
        if self.d == 2:
            return np.full(self.n_caps, self.width)
        zone = self._cap_zone
        band = 2 * np.pi * (np.cos(self.zone_edges[zone]) - np.cos(self.zone_edges[zone + 1]))
        return band / self.zone_counts[zone]

    def boundary_samples(self, i: int, per_edge: int = 8) -> np.ndarray:
        """Points on the boundary of cap ``i`` (used for diameters and radii)."""
        if self.d == 2:
            a = np.array([i, i + 1]) * self.width
            return np.column_stack([np.cos(a), np.sin(a)])
        zone = self._cap_zone[i]
        m = self.zone_counts[zone]
        j = i - self.zone_start[zone]
        t0, t1 = self.zone_edges[zone], self.zone_edges[zone + 1]
        p0, p1 = 2 * np.pi * j / m, 2 * np.pi * (j + 1) / m
        s = np.linspace(0, 1, per_edge)
        th = np.concatenate([t0 + 0 * s, t1 + 0 * s, t0 + (t1 - t0) * s, t0 + (t1 - t0) * s])
        ph = np.concatenate([p0 + (p1 - p0) * s, p0 + (p1 - p0) * s, p0 + 0 * s, p1 + 0 * s])
        return np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    @cached_property
    def angular_radii(self) -> np.ndarray:
        """Largest angle from each cap centre to its boundary."""
        if self.d == 2:
            return np.full(self.n_caps, self.width / 2)
        out = np.empty(self.n_caps)
        for i in range(self.n_caps):
            b = self.boundary_samples(i)
            out[i] = np.arccos(np.clip(b @ self.centers[i], -1, 1)).max()
        return out

    def diameters(self) -> np.ndarray:
        """Geodesic diameters of the caps."""
        if self.d == 2:
            return np.full(self.n_caps, self.width)
        out = np.empty(self.n_caps)
        for i in range(self.n_caps):
            b = self.boundary_samples(i)
            out[i] = np.arccos(np.clip(b @ b.T, -1, 1)).max()
        return out

    def neighborhood(self, caps, radius: float | None = None) -> np.ndarray:
        """Caps within angular distance ``radius`` (default delta) of ``caps``.

        Cap-to-cap distance is bounded below by centre distance minus both
        angular radii, which is what this uses.
        """
        caps = np.asarray(caps, dtype=np.int64)
        radius = self.delta if radius is None else radius
        if caps.size == 0:
            return caps
        if self.d == 2:
            reach = math.ceil(radius / self.width)
            off = np.arange(-reach, reach + 1)
            return np.unique(np.mod(caps[:, None] + off[None, :], self.n_caps))
        c = self.centers
        r = self.angular_radii
        keep = np.zeros(self.n_caps, dtype=bool)
        for i in caps:
            ang = np.arccos(np.clip(c @ c[i], -1, 1))
            keep |= ang - r - r[i] <= radius
        return np.flatnonzero(keep)


def cap_grid(d: int, k) -> SphereCapGrid:
    return SphereCapGrid(d, k)


def refine_map(coarse: SphereCapGrid, fine: SphereCapGrid) -> np.ndarray:
    """For each fine cap, the coarse cap containing its centre."""
    return coarse.cap_index(fine.centers)


# ---------------------------------------------------------------- histograms


@dataclass(eq=False)
class ProjectionHistogram:
    """Pushforward masses on sphere caps (radial) or on bins of w-perp."""

    masses: np.ndarray
    grid: SphereCapGrid | None = None
    viewpoint: np.ndarray | None = None
    direction: np.ndarray | None = None
    bins: np.ndarray | None = None
    bin_width: float | None = None

    @property
    def total(self) -> float:
        return math.fsum(self.masses.tolist())

    @property
    def is_radial(self) -> bool:
        return self.grid is not None


@dataclass(eq=False)
class CapSet:
    caps: np.ndarray
    grid: SphereCapGrid

    def __len__(self):
        return len(self.caps)

    def enlarged(self) -> "CapSet":
        return CapSet(self.grid.neighborhood(self.caps), self.grid)


def directions_from(mu: PointMeasure, x, exclusion_radius: float = DEFAULT_EXCLUSION):
    """Unit vectors (y - x)/|y - x| for every atom y, with the exclusion check."""
    x = np.asarray(x, dtype=float)
    if x.shape != (mu.dim,):
        raise ConfigError(f"viewpoint must have {mu.dim} coordinates")
    v = mu.locations - x
    dist = np.linalg.norm(v, axis=1)
    if dist.size:
        i = int(np.argmin(dist))
        if dist[i] < exclusion_radius:
            raise ProjectionError(
                f"atom {i} at distance {dist[i]:.6g} from viewpoint (exclusion radius "
                f"{exclusion_radius})",
                atom_index=i,
                distance=float(dist[i]),
            )
    return v / dist[:, None]


def radial_pushforward(
    mu: PointMeasure, x, grid: SphereCapGrid, exclusion_radius: float = DEFAULT_EXCLUSION
) -> ProjectionHistogram:
    if grid.d != mu.dim:
        raise ConfigError("grid and measure dimensions differ")
    dirs = directions_from(mu, x, exclusion_radius)
    masses = histogram_from_directions(dirs, mu.weights, grid)
    return ProjectionHistogram(masses, grid=grid, viewpoint=np.asarray(x, dtype=float))


def histogram_from_directions(dirs, weights, grid: SphereCapGrid) -> np.ndarray:
    if len(weights) == 0:
        return np.zeros(grid.n_caps)
    return np.bincount(grid.cap_index(dirs), weights=weights, minlength=grid.n_caps)


def perp_basis(omega) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``omega``."""
    w = np.asarray(omega, dtype=float)
    n = np.linalg.norm(w)
    if not np.isfinite(n) or n == 0:
        raise ConfigError("direction must be a nonzero vector")
    w = w / n
    if w.size == 2:
        return np.array([[-w[1], w[0]]])
    helper = np.eye(3)[np.argmin(np.abs(w))]
    e1 = np.cross(w, helper)
    e1 /= np.linalg.norm(e1)
    return np.array([e1, np.cross(w, e1)])


def orthogonal_coordinates(points, omega) -> np.ndarray:
    """Coordinates of P_omega(points) in the basis of :func:`perp_basis`."""
    return np.atleast_2d(points) @ perp_basis(omega).T


def orthogonal_pushforward(mu: PointMeasure, omega, bin_width: float) -> ProjectionHistogram:
    if not bin_width > 0:
        raise ConfigError("bin_width must be positive")
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (mu.dim,):
        raise ConfigError(f"direction must have {mu.dim} coordinates")
    norm = np.linalg.norm(omega)
    if not np.isfinite(norm) or norm == 0:
        raise ConfigError("direction must be a nonzero vector")
    omega = omega / norm
    if mu.is_empty:
        return ProjectionHistogram(
            np.zeros(0), direction=omega, bins=np.zeros((0, mu.dim - 1), dtype=np.int64),
            bin_width=bin_width,
        )
    u = orthogonal_coordinates(mu.locations, omega)
    idx = np.floor(u / bin_width).astype(np.int64)
    bins, inverse = np.unique(idx, axis=0, return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), weights=mu.weights, minlength=len(bins))
    return ProjectionHistogram(masses, direction=omega, bins=bins, bin_width=bin_width)


def worst_capset(hist: ProjectionHistogram, tau: float, k=None) -> tuple[CapSet, float]:
    """Heaviest union of at most floor(delta_k^-tau) caps and its mass.

    Cap masses add, so the top-M caps are an exact maximiser over the family.
    """
    grid = hist.grid
    if grid is None:
        raise ConfigError("worst_capset needs a radial histogram")
    scale = grid.scale if k is None else as_scale(k)
    if not 0 <= tau <= grid.d - 1:
        raise ConfigError(f"tau={tau} outside [0, {grid.d - 1}]")
    m = capset_size(scale, tau)
    masses = hist.masses
    if m >= masses.size:
        top = np.arange(masses.size)
    else:
        # stable order so ties resolve to the lowest cap index
        top = np.sort(np.argsort(-masses, kind="stable")[:m])
    return CapSet(top, grid), float(masses[top].sum())


def capset_size(scale, tau: float) -> int:
    scale = as_scale(scale)
    # floor with a guard against 2^(k tau) landing a hair under an integer
    return max(1, int(math.floor(2.0 ** (scale.k * tau) * (1 + 1e-12))))


def top_mass(masses: np.ndarray, m: int) -> float:
    if m >= masses.size:
        return float(masses.sum())
    return float(np.partition(masses, masses.size - m)[masses.size - m:].sum())


# ---------------------------------------------------------------- mollifier


class Bump:
    """Radial plateau bump: c on |u| <= 1/2, smoothstep down to 0 at 1/2 + w.

    c is fixed by exact polynomial integration so that the integral is 1;
    construction fails unless c >= 1 (so phi >= 1 on B(0, 1/2)).
    """

    _smooth = Polynomial([0, 0, 0, 10, -15, 6])

    def __init__(self, d: int, width: float = 0.12):
        self.d = d
        self.width = width
        self.support = 0.5 + width
        lin = Polynomial([0.5, width])
        ramp = ((Polynomial([1]) - self._smooth) * lin ** (d - 1) * width).integ()
        radial = 0.5**d / d + ramp(1.0) - ramp(0.0)
        sphere_area = 2 * math.pi if d == 2 else 4 * math.pi
        self.c = 1.0 / (sphere_area * radial)
        if self.c < 1.0:
            raise ConfigError(f"bump normalisation {self.c:.4f} < 1: phi >= 1 on B(0,1/2) fails")

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        t = np.clip((r - 0.5) / self.width, 0.0, 1.0)
        return np.where(r <= self.support, self.c * (1.0 - self._smooth(t)), 0.0)

    def __call__(self, u):
        return self.profile(np.linalg.norm(np.atleast_2d(u), axis=-1))

    def scaled(self, u, delta: float):
        """phi_delta(u) = delta^-d phi(u / delta)."""
        r = np.linalg.norm(np.atleast_2d(u), axis=-1) / delta
        return self.profile(r) / delta**self.d


BUMPS = {2: Bump(2), 3: Bump(3)}


@dataclass(eq=False)
class GridDensity:
    """Cell-averaged density on a regular grid.

    ``values[i0, i1, ...]`` is the average over the cell
    origin + h*[i, i+1) of the density; cell centres are origin + (i + 1/2) h.
    """

    values: np.ndarray
    origin: np.ndarray
    h: float
    delta: float | None = None

    @property
    def dim(self) -> int:
        return self.values.ndim

    def integral(self) -> float:
        return float(self.values.sum()) * self.h**self.dim

    def cell_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.values.shape[axis]) + 0.5) * self.h

    def upper(self) -> np.ndarray:
        return self.origin + self.h * np.array(self.values.shape)

    def sample(self, points) -> np.ndarray:
        """Multilinear interpolation between cell centres, zero outside."""
        pts = np.atleast_2d(points)
        coords = ((pts - self.origin) / self.h - 0.5).T
        return ndimage.map_coordinates(self.values, coords, order=1, mode="constant", cval=0.0)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


def mollify(
    mu: PointMeasure,
    delta: float,
    h: float | None = None,
    supersample: int = 4,
    max_cells: int = 60_000_000,
    bump: Bump | None = None,
) -> GridDensity:
    """Grid samples of mu * phi_delta.

    Each grid value is the mean of phi_delta-smoothed mass over a
    ``supersample``^d sub-lattice of its cell, so the Riemann sum tracks the
    total mass closely even though phi has a steep edge.
    """
    h = delta / 4 if h is None else h
    if h > delta / 4 * (1 + 1e-12):
        raise ConfigError("grid spacing h must be <= delta / 4")
    d = mu.dim
    bump = BUMPS[d] if bump is None else bump
    lo, hi = mu.bounding_box()
    pad = bump.support * delta + h
    n_cells = np.ceil((hi - lo + 2 * pad) / h).astype(int) + 1
    origin = lo - pad
    fine = n_cells * supersample
    if float(np.prod(fine.astype(float))) > max_cells:
        raise BudgetError(
            f"mollified grid needs {int(np.prod(fine.astype(float)))} fine cells "
            f"(budget {max_cells})",
            estimate=int(np.prod(fine.astype(float))),
        )
    hf = h / supersample
    acc = np.zeros(tuple(fine))
    if not mu.is_empty:
        # fine sample j sits at origin + (j + 1/2) hf
        rel = (mu.locations - origin) / hf - 0.5
        base = np.floor(rel).astype(np.int64)
        reach = int(math.ceil(bump.support * delta / hf)) + 1
        offs = np.arange(-reach, reach + 1)
        grids = np.meshgrid(*([offs] * d), indexing="ij")
        stencil = np.stack([g.reshape(-1) for g in grids], axis=1)
        for off in stencil:
            idx = base + off
            disp = (idx + 0.5) * hf + origin - mu.locations
            val = mu.weights * bump.scaled(disp, delta)
            nz = val > 0
            if np.any(nz):
                np.add.at(acc, tuple(idx[nz].T), val[nz])
    shape = []
    for n in n_cells:
        shape += [n, supersample]
    values = acc.reshape(shape).mean(axis=tuple(range(1, 2 * d, 2)))
    return GridDensity(values, origin, h, delta)


# ---------------------------------------------------------------- ray integrals


def _ray_range(density: GridDensity, x: np.ndarray):
    lo, hi = density.origin, density.upper()
    nearest = np.clip(x, lo, hi)
    t0 = float(np.linalg.norm(nearest - x))
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(len(x), -1).T
    t1 = float(np.linalg.norm(corners - x, axis=1).max())
    return t0, t1


def ray_integrals(
    density: GridDensity, x, directions: np.ndarray, weight_power: int | None = None,
    both_ways: bool = False, step: float | None = None, chunk: int = 2_000_000,
) -> np.ndarray:
    """Integrals of f along rays from ``x``.

    Returns int_0^inf f(x + t w) t^p dt for every direction w, with
    p = d - 1 by default (this is the density of the radial pushforward of
    f dx). With ``both_ways`` the integral runs over the whole line and the
    weight is dropped, giving the orthogonal-projection density at P_w x.
    """
    x = np.asarray(x, dtype=float)
    dirs = np.atleast_2d(directions)
    d = density.dim
    p = d - 1 if weight_power is None else weight_power
    out = np.zeros(len(dirs))
    if density.is_zero or len(dirs) == 0:
        return out
    t0, t1 = _ray_range(density, x)
    step = density.h / 2 if step is None else step
    n_t = max(2, int(math.ceil((t1 - t0) / step)))
    t = t0 + (np.arange(n_t) + 0.5) * (t1 - t0) / n_t
    dt = (t1 - t0) / n_t
    signs = (1.0, -1.0) if both_ways else (1.0,)
    wt = np.ones_like(t) if both_ways else t**p
    per = max(1, chunk // n_t)
    for sgn in signs:
        for a in range(0, len(dirs), per):
            blk = dirs[a:a + per]
            pts = x[None, None, :] + sgn * t[None, :, None] * blk[:, None, :]
            vals = density.sample(pts.reshape(-1, d)).reshape(len(blk), n_t)
            out[a:a + per] += (vals * wt).sum(axis=1) * dt
    return out


def radial_density_caps(
    density: GridDensity, x, grid: SphereCapGrid, refine: int = 2
) -> np.ndarray:
    """Integral of the radial pushforward of f dx over every cap of ``grid``.

    The density is evaluated at the centres of a grid ``refine`` levels finer
    and aggregated back to the coarse caps.
    """
    fine = SphereCapGrid(grid.d, ScaleIndex(grid.scale.k + refine, max_k=64))
    vals = ray_integrals(density, x, fine.centers) * fine.areas
    return np.bincount(refine_map(grid, fine), weights=vals, minlength=grid.n_caps)


def observation_check(mu: PointMeasure, x, capset: CapSet, h_factor: int = 4) -> tuple[float, float]:
    """Both sides of the cap-mass vs. mollified-pushforward comparison.

    Returns (histogram mass of the cap set, integral of pi^x_*(mu^delta)
    over the delta-enlarged cap set).
    """
    grid = capset.grid
    hist = radial_pushforward(mu, x, grid)
    lhs = float(hist.masses[capset.caps].sum())
    dens = mollify(mu, grid.delta, grid.delta / h_factor)
    caps_mass = radial_density_caps(dens, x, grid)
    rhs = float(caps_mass[capset.enlarged().caps].sum())
    return lhs, rhs
