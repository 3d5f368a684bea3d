"""Energy integrals and numerical probes of the comparison inequalities.

The probes return both sides of an inequality and their ratio. None of
them asserts a constant: thresholds belong to whoever reads the ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BudgetError, ConfigError, ProjectionError
from .measures import PointMeasure, ball_masses
from .projections import (
    DEFAULT_EXCLUSION,
    GridDensity,
    ScaleIndex,
    SphereCapGrid,
    mollify,
    ray_integrals,
)

DEFAULT_EPSILON = 0.05
MAX_FOURIER_WORK = 2_000_000_000  # atoms x quadrature nodes


@dataclass
class InequalityProbe:
    lhs: float
    rhs: float
    metadata: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        if self.rhs == 0:
            return math.inf
        return self.lhs / self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, **self.metadata}


@dataclass
class EnergyReport:
    exponent: float
    direct_value: float
    fourier_value: float
    cutoff: float

    @property
    def ratio(self) -> float:
        return self.fourier_value / self.direct_value


# ---------------------------------------------------------------- direct energy


def energy_direct(mu: PointMeasure, s: float, diagonal_cutoff: float = 0.0, chunk: int = 2048) -> float:
    """Discrete Riesz s-energy: sum over i, j of w_i w_j max(|x_i - x_j|, c)^-s.

    Distances are floored at the cutoff c. With c = 0 the i = j terms are
    dropped (they would be infinite); with c > 0 they contribute w_i^2 c^-s,
    which is the floored distance applied to the diagonal as well.
    """
    d = mu.dim
    if not 0 < s < d:
        raise ConfigError(f"energy exponent s={s} outside (0, {d})")
    if diagonal_cutoff < 0:
        raise ConfigError("diagonal_cutoff must be nonnegative")
    loc, w = mu.locations, mu.weights
    n = len(w)
    total = 0.0
    for a in range(0, n, chunk):
        blk = loc[a:a + chunk]
        dist = np.sqrt(((blk[:, None, :] - loc[None, :, :]) ** 2).sum(axis=-1))
        rows = np.arange(a, min(a + chunk, n))
        if diagonal_cutoff > 0:
            kern = np.maximum(dist, diagonal_cutoff) ** -s
        else:
            dist[np.arange(len(rows)), rows] = np.inf
            with np.errstate(divide="ignore"):
                kern = np.where(dist > 0, dist, np.inf) ** -s
        total += float(w[rows] @ kern @ w)
    return total


# ---------------------------------------------------------------- Fourier side


def riesz_constant(d: int, s: float) -> float:
    """c with I_s(mu) = c * int |mu^(xi)|^2 |xi|^(s-d) dxi (FT with e^{-2 pi i x.xi})."""
    return math.pi ** (s - d / 2) * math.exp(gammaln((d - s) / 2) - gammaln(s / 2))


def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def radial_nodes(K: float, b: float, panel: float, order: int = 4):
    """Nodes/weights for int_0^K g(r) r^(b-1) dr with g smooth, b > 0.

    The first panel absorbs the r^(b-1) singularity through r = panel u^(1/b).
    """
    if b <= 0:
        raise ConfigError("radial weight exponent must be > -1")
    x, wq = _gauss(order)
    u = (x + 1) / 2
    first = min(panel, K)
    nodes = [first * u ** (1 / b)]
    weights = [first**b / b * wq / 2]
    n_pan = max(0, int(math.ceil((K - first) / panel)))
    if n_pan:
        edges = np.linspace(first, K, n_pan + 1)
        a, c = edges[:-1, None], edges[1:, None]
        r = (a + (c - a) * u[None, :]).reshape(-1)
        wr = ((c - a) / 2 * wq[None, :]).reshape(-1)
        nodes.append(r)
        weights.append(wr * r ** (b - 1))
    return np.concatenate(nodes), np.concatenate(weights)


def sphere_directions(m: int, n_angle: int):
    """Quadrature directions on S^{m-1} over a half-sphere (symmetric integrands).

    Returns unit vectors and weights summing to |S^{m-1}|, using the
    antipodal symmetry of |F|^2 for real coefficients.
    """
    if m == 1:
        return np.array([[1.0]]), np.array([2.0])
    if m == 2:
        th = (np.arange(n_angle) + 0.5) * np.pi / n_angle
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(n_angle, 2 * np.pi / n_angle)
    k = max(1, int(math.ceil(math.log2(max(1.0, n_angle / math.pi)))))
    grid = SphereCapGrid(3, ScaleIndex(k, max_k=64))
    c, a = grid.centers, grid.areas
    half = c[:, 2] >= 0
    return c[half], 2 * a[half] * (4 * math.pi / (2 * a[half].sum()))


def fourier_ball_integral(points, coeffs, K: float, power: float, spacing: float | None = None,
                          max_work: int = MAX_FOURIER_WORK, chunk: int = 4096) -> float:
    """int_{|xi| <= K} |sum_j c_j exp(-2 pi i x_j . xi)|^2 |xi|^power dxi.

    Polar quadrature: Gauss panels of width 2*spacing in |xi| (spacing
    defaults to 1/(2 diam)) and angular spacing <= spacing at |xi| = K.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 3:
        pts = pts.T
    c = np.asarray(coeffs, dtype=float)
    m = pts.shape[1]
    if c.size == 0 or not np.any(c):
        return 0.0
    if spacing is None:
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        spacing = 1.0 / (2 * max(diam, 1e-3))
    spacing = min(spacing, K)
    r, wr = radial_nodes(K, power + m, 2 * spacing)
    n_angle = max(8, int(math.ceil(math.pi * K / spacing))) if m > 1 else 1
    dirs, wd = sphere_directions(m, n_angle)
    work = len(r) * len(dirs) * len(c)
    if work > max_work:
        raise BudgetError(f"Fourier quadrature needs {work:.3g} terms (budget {max_work:.3g})",
                          estimate=work)
    xi = (r[:, None, None] * dirs[None, :, :]).reshape(-1, m)
    wts = (wr[:, None] * wd[None, :]).reshape(-1)
    total = 0.0
    # centre the points; |F|^2 is translation invariant
    pts = pts - pts.mean(axis=0)
    for a in range(0, len(xi), chunk):
        ph = 2 * np.pi * (pts @ xi[a:a + chunk].T)
        re = c @ np.cos(ph)
        im = c @ np.sin(ph)
        total += float(((re * re + im * im) * wts[a:a + chunk]).sum())
    return total


def energy_fourier(mu: PointMeasure, s: float, K: float, normalize: bool = True, **kw) -> float:
    """Fourier form of the s-energy truncated to |xi| <= K.

    With ``normalize`` the Riesz constant is applied so that the value tends
    to the direct energy as K grows (for s below the measure's dimension).
    """
    d = mu.dim
    if not 0 < s < d:
        raise ConfigError(f"energy exponent s={s} outside (0, {d})")
    if not K > 1:
        raise ConfigError("frequency cutoff K must exceed 1")
    val = fourier_ball_integral(mu.locations, mu.weights, K, s - d, **kw)
    return val * riesz_constant(d, s) if normalize else val


def energy_report(mu: PointMeasure, s: float, K: float, **kw) -> EnergyReport:
    direct = energy_direct(mu, s, diagonal_cutoff=1.0 / K)
    return EnergyReport(s, direct, energy_fourier(mu, s, K, **kw), 1.0 / K)


# ---------------------------------------------------------------- Schur test


def schur_test_check(points, weights, f, r: float, s: float) -> InequalityProbe:
    """Both sides of int_{|xi|<=1/r} |(f dmu)^|^2 <= C r^(s-m) ||f||^2_{L2(mu)}.

    ``points`` has shape (n, m) with m = 1 or 2 (a 1-D array is read as m = 1).
    The measure's r-ball condition is measured and stored in the metadata.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    w = np.asarray(weights, dtype=float)
    f = np.broadcast_to(np.asarray(f, dtype=float), w.shape)
    m = pts.shape[1]
    if m not in (1, 2):
        raise ConfigError("schur_test_check works in R^1 or R^2")
    if not r > 0:
        raise ConfigError("r must be positive")
    lhs = fourier_ball_integral(pts, f * w, 1.0 / r, 0.0)
    rhs = r ** (s - m) * float(np.sum(f * f * w))
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    cnt = tree.query_ball_point(pts, r * (1 + 1e-12))
    ball = max(float(w[idx].sum()) for idx in cnt)
    return InequalityProbe(lhs, rhs, {"r": r, "s": s, "m": m, "ball_constant": ball / r**s})


# ---------------------------------------------------------------- radial / orthogonal L^p


def _direction_grid(d: int, delta: float, refine: int) -> SphereCapGrid:
    k = max(1, int(round(-math.log2(delta)))) + refine
    return SphereCapGrid(d, ScaleIndex(k, max_k=64))


def _hits_box(x, dirs, lo, hi, both_ways=False):
    """Which rays (or lines) from x meet the box [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = (lo - x) / dirs
        t_b = (hi - x) / dirs
    t_lo = np.nanmax(np.minimum(t_a, t_b), axis=1)
    t_hi = np.nanmin(np.maximum(t_a, t_b), axis=1)
    hit = t_lo <= t_hi
    return hit if both_ways else hit & (t_hi >= 0)


def _check_separated(mu: PointMeasure, nu: PointMeasure, rho: float):
    if mu.is_empty or nu.is_empty:
        return
    from scipy.spatial import cKDTree

    dist, idx = cKDTree(mu.locations).query(nu.locations)
    i = int(np.argmin(dist))
    if dist[i] < rho:
        raise ProjectionError(
            f"supports overlap: viewpoint atom {i} is {dist[i]:.4g} from the other measure "
            f"(need >= {rho})",
            atom_index=i,
            distance=float(dist[i]),
        )


def radial_lp(density: GridDensity, viewpoints: PointMeasure, p: float, grid: SphereCapGrid) -> float:
    """sum_x nu_x int_{S^{d-1}} |pi^x_* f(w)|^p dw, directions from ``grid``."""
    lo, hi = density.origin, density.upper()
    total = 0.0
    for x, wx in zip(viewpoints.locations, viewpoints.weights):
        hit = _hits_box(x, grid.centers, lo, hi)
        vals = ray_integrals(density, x, grid.centers[hit])
        total += wx * float((np.abs(vals) ** p * grid.areas[hit]).sum())
    return total


def orthogonal_lp(density: GridDensity, viewpoints: PointMeasure, p: float, grid: SphereCapGrid) -> float:
    """int_{S^{d-1}} sum_x nu_x |(P_w)_* f (P_w x)|^p dw."""
    lo, hi = density.origin, density.upper()
    total = 0.0
    for x, wx in zip(viewpoints.locations, viewpoints.weights):
        hit = _hits_box(x, grid.centers, lo, hi, both_ways=True)
        vals = ray_integrals(density, x, grid.centers[hit], both_ways=True)
        total += wx * float((np.abs(vals) ** p * grid.areas[hit]).sum())
    return total


def orponen_identity_check(
    f_mu: PointMeasure,
    nu: PointMeasure,
    p: float,
    delta: float,
    refine: int = 3,
    exclusion_radius: float = DEFAULT_EXCLUSION,
) -> InequalityProbe:
    """Radial vs. orthogonal averaged L^p norms of the mollified f_mu.

    lhs = int ||pi^x_* f||_p^p dnu(x), rhs = int ||(P_w)_* f||^p_{L^p((P_w)_* nu)} dw
    with f = f_mu * phi_delta. Directions come from a cap grid ``refine``
    levels finer than delta.
    """
    if not p > 0:
        raise ConfigError("p must be positive")
    if f_mu.is_empty or nu.is_empty:
        return InequalityProbe(0.0, 0.0, {"p": p, "delta": delta})
    _check_separated(f_mu, nu, exclusion_radius)
    dens = mollify(f_mu, delta)
    grid = _direction_grid(f_mu.dim, delta, refine)
    lhs = radial_lp(dens, nu, p, grid)
    rhs = orthogonal_lp(dens, nu, p, grid)
    return InequalityProbe(lhs, rhs, {"p": p, "delta": delta, "directions": grid.n_caps})


def lp_radial_moment(
    mu_F: PointMeasure,
    delta: float,
    mu_E: PointMeasure,
    p: float,
    refine: int = 3,
    exclusion_radius: float = DEFAULT_EXCLUSION,
) -> float:
    """sum over atoms x of mu_E of w_x int |pi^x_*(mu_F^delta)(w)|^p dw."""
    if not p > 1:
        raise ConfigError("p must exceed 1")
    if mu_F.is_empty or mu_E.is_empty:
        return 0.0
    _check_separated(mu_F, mu_E, exclusion_radius)
    dens = mollify(mu_F, delta)
    return radial_lp(dens, mu_E, p, _direction_grid(mu_F.dim, delta, refine))


def compare_energy_product(
    mu_F: PointMeasure,
    delta: float,
    mu_E: PointMeasure,
    p: float,
    s_E: float,
    s_F: float,
    epsilon: float = DEFAULT_EPSILON,
    cutoff_E: float = 0.0,
    cutoff_F: float = 0.0,
    refine: int = 3,
) -> InequalityProbe:
    """L^p radial moment against I_{s_E-eps}(mu_E)^(1/2p) I_{s_F-eps}(mu_F)^(1/2)."""
    lhs = lp_radial_moment(mu_F, delta, mu_E, p, refine=refine)
    i_e = energy_direct(mu_E, s_E - epsilon, cutoff_E)
    i_f = energy_direct(mu_F, s_F - epsilon, cutoff_F)
    rhs = i_e ** (1 / (2 * p)) * i_f**0.5
    return InequalityProbe(
        lhs, rhs, {"p": p, "delta": delta, "s_E": s_E, "s_F": s_F, "epsilon": epsilon,
                   "energy_E": i_e, "energy_F": i_f},
    )
