"""Tube masses and the Good/Bad split of viewpoint-target pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import InequalityProbe
from .dimension import _grid
from .errors import ConfigError
from .measures import PointMeasure, ball_masses, restrict
from .projections import (
    DEFAULT_EXCLUSION,
    as_scale,
    capset_size,
    directions_from,
    histogram_from_directions,
    orthogonal_coordinates,
    top_mass,
)

TUBE_FACTOR = 10


def tube_radius(k) -> float:
    return TUBE_FACTOR * as_scale(k).delta


def _line_distances_sq(points: np.ndarray, x: np.ndarray, units: np.ndarray) -> np.ndarray:
    """Squared distances from each point to each line x + R u (shape (n_points, n_lines))."""
    v = points - x
    proj = v @ units.T
    d2 = (v * v).sum(axis=1)[:, None] - proj * proj
    return np.maximum(d2, 0.0)


def tube_mass(mu: PointMeasure, x, y, k) -> float:
    """mu-mass within distance 10 delta_k of the infinite line through x and y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = np.linalg.norm(y - x)
    if n == 0:
        raise ConfigError("tube needs two distinct points")
    if mu.is_empty:
        return 0.0
    d2 = _line_distances_sq(mu.locations, x, ((y - x) / n)[None, :])[:, 0]
    r = tube_radius(k)
    return float(mu.weights[d2 <= r * r * (1 + 1e-12)].sum())


def tube_masses_from(mu_F: PointMeasure, x, targets: np.ndarray, ks) -> dict[int, np.ndarray]:
    """mu_F(T^k_{x,y}) for every row y of ``targets`` and every k."""
    x = np.asarray(x, dtype=float)
    diff = targets - x
    norms = np.linalg.norm(diff, axis=1)
    if np.any(norms == 0):
        raise ConfigError("tube endpoints coincide")
    out = {}
    if mu_F.is_empty:
        return {int(k): np.zeros(len(targets)) for k in ks}
    d2 = _line_distances_sq(mu_F.locations, x, diff / norms[:, None])
    for k in ks:
        r = tube_radius(k)
        out[int(k)] = mu_F.weights @ (d2 <= r * r * (1 + 1e-12))
    return out


class TubeTable:
    """mu_F(T^k_{x,y}) for all pairs (x in supp mu_F, y in supp mu_E) and all k.

    Row i is the i-th atom of mu_F, column j the j-th atom of mu_E. Built
    once and read-only afterwards.
    """

    def __init__(self, mu_E: PointMeasure, mu_F: PointMeasure, ks):
        self.ks = [int(k) for k in ks]
        self.mu_E, self.mu_F = mu_E, mu_F
        nF, nE = mu_F.n_atoms, mu_E.n_atoms
        self.masses = {k: np.zeros((nF, nE)) for k in self.ks}
        for i, x in enumerate(mu_F.locations):
            for k, row in tube_masses_from(mu_F, x, mu_E.locations, self.ks).items():
                self.masses[k][i] = row

    def bad_mask(self, k: int, s: float) -> np.ndarray:
        return self.masses[int(k)] >= 2.0 ** (-int(k) * s)


@dataclass
class GoodBadPartition:
    viewpoint: np.ndarray
    k: int
    s: float
    good: np.ndarray
    bad: np.ndarray
    tube_masses: np.ndarray = field(repr=False)

    @property
    def threshold(self) -> float:
        return 2.0 ** (-self.k * self.s)


def good_bad_partition(mu_E: PointMeasure, mu_F: PointMeasure, x, k, s: float,
                       exclusion_radius: float = DEFAULT_EXCLUSION) -> GoodBadPartition:
    """Split the atoms y of mu_E by whether mu_F(T^k_{x,y}) < delta_k^s."""
    k = as_scale(k).k
    x = np.asarray(x, dtype=float)
    directions_from(mu_E, x, exclusion_radius)
    masses = tube_masses_from(mu_F, x, mu_E.locations, [k])[k]
    good = masses < 2.0 ** (-k * s)
    return GoodBadPartition(x, k, s, np.flatnonzero(good), np.flatnonzero(~good), masses)


def _check_tau(tau: float, d: int, name="tau"):
    if not 0 < tau <= d - 1:
        raise ConfigError(f"{name}={tau} outside (0, {d - 1}]")


def good_term(mu_E: PointMeasure, mu_F: PointMeasure, k, tau: float, s: float,
              table: TubeTable | None = None) -> float:
    """int sup_{D in Theta_k^tau} mu_E|Good^x (pi^x in D) dmu_F(x)."""
    k = as_scale(k).k
    _check_tau(tau, mu_E.dim)
    table = table or TubeTable(mu_E, mu_F, [k])
    bad = table.bad_mask(k, s)
    grid = _grid(mu_E.dim, k)
    m = capset_size(k, tau)
    total = 0.0
    for i, (x, wx) in enumerate(zip(mu_F.locations, mu_F.weights)):
        good = ~bad[i]
        if not good.any():
            continue
        dirs = directions_from(restrict(mu_E, good), x)
        hist = histogram_from_directions(dirs, mu_E.weights[good], grid)
        total += wx * top_mass(hist, m)
    return total


@dataclass
class BadTerm:
    by_viewpoint: float  # int mu_E(Bad^x) dmu_F(x)
    product: float  # (mu_E x mu_F)(Bad)
    by_target: float  # int mu_F(Bad^y) dmu_E(y)

    @property
    def value(self) -> float:
        return self.by_viewpoint


def bad_term(mu_E: PointMeasure, mu_F: PointMeasure, k, s: float,
             table: TubeTable | None = None) -> BadTerm:
    """The Bad integral evaluated in three orders."""
    k = as_scale(k).k
    if mu_E.is_empty or mu_F.is_empty:
        return BadTerm(0.0, 0.0, 0.0)
    table = table or TubeTable(mu_E, mu_F, [k])
    bad = table.bad_mask(k, s).astype(float)
    wE, wF = mu_E.weights, mu_F.weights
    by_x = float(wF @ (bad @ wE))
    prod = float((np.outer(wF, wE) * bad).sum())
    by_y = float(wE @ (bad.T @ wF))
    return BadTerm(by_x, prod, by_y)


def symmetry_check(term: BadTerm) -> InequalityProbe:
    """Largest discrepancy between the three Bad orderings."""
    vals = [term.by_viewpoint, term.product, term.by_target]
    return InequalityProbe(max(vals) - min(vals), max(abs(v) for v in vals) or 1.0,
                           {"routes": vals})


def dual_rhs(mu_E: PointMeasure, mu_F: PointMeasure, k, s: float) -> float:
    """int sup_{D in Theta_k^s} mu_F(pi^y in D) dmu_E(y)."""
    k = as_scale(k).k
    _check_tau(s, mu_E.dim, "s")
    grid = _grid(mu_F.dim, k)
    m = capset_size(k, s)
    total = 0.0
    if mu_F.is_empty:
        return 0.0
    for y, wy in zip(mu_E.locations, mu_E.weights):
        hist = histogram_from_directions(directions_from(mu_F, y), mu_F.weights, grid)
        total += wy * top_mass(hist, m)
    return total


def dual_bad_bound(mu_E: PointMeasure, mu_F: PointMeasure, k, s: float,
                   table: TubeTable | None = None) -> InequalityProbe:
    lhs = bad_term(mu_E, mu_F, k, s, table).value
    rhs = dual_rhs(mu_E, mu_F, k, s)
    return InequalityProbe(lhs, rhs, {"k": as_scale(k).k, "s": s})


def initial_term(mu_E: PointMeasure, mu_F: PointMeasure, k, tau: float) -> float:
    """int sup_{D in Theta_k^tau} mu_E(pi^x in D) dmu_F(x) (no Good/Bad split)."""
    k = as_scale(k).k
    _check_tau(tau, mu_E.dim)
    grid = _grid(mu_E.dim, k)
    m = capset_size(k, tau)
    total = 0.0
    for x, wx in zip(mu_F.locations, mu_F.weights):
        hist = histogram_from_directions(directions_from(mu_E, x), mu_E.weights, grid)
        total += wx * top_mass(hist, m)
    return total


def threshold_exponent(d: int, tau: float, s_E: float, beta: float) -> float:
    """s = d - 1 + tau - s_E + 4 beta."""
    return d - 1 + tau - s_E + 4 * beta


def default_beta(s_E: float, tau: float) -> float:
    return min(0.05, (s_E - tau) / 8)


@dataclass
class ScaleRow:
    k: int
    lhs: float
    good: float
    bad: float
    dual: float
    target: float

    @property
    def ratios(self) -> dict:
        t = self.target
        return {"lhs_ratio": self.lhs / t, "good_ratio": self.good / t,
                "bad_ratio": self.bad / t, "dual_ratio": self.dual / t}


@dataclass
class GoalReport:
    tau: float
    beta: float
    s_E: float
    s: float
    rows: list[ScaleRow]

    @property
    def terms(self) -> np.ndarray:
        return np.array([r.lhs / r.target for r in self.rows])

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)

    @property
    def decay_rate(self) -> float:
        """Least-squares slope of log2(lhs_k / delta_k^{2 beta}) in k."""
        ks = np.array([r.k for r in self.rows], dtype=float)
        t = self.terms
        if len(ks) < 2 or np.any(t <= 0):
            return -math.inf if np.all(t <= 0) else math.nan
        return float(np.polyfit(ks, np.log2(t), 1)[0])

    @property
    def converging(self) -> bool:
        return self.decay_rate < 0

    @property
    def tail_estimate(self) -> float:
        """Partial sum plus a geometric tail at the fitted decay rate (inf if not decaying)."""
        if not self.converging:
            return math.inf
        q = 2.0**self.decay_rate
        return float(self.partial_sums[-1] + self.terms[-1] * q / (1 - q))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "beta": self.beta, "s_E": self.s_E, "s": self.s,
            "decay_rate": self.decay_rate, "converging": self.converging,
            "tail_estimate": self.tail_estimate,
            "rows": [{"k": r.k, "lhs": r.lhs, "good": r.good, "bad": r.bad, "dual": r.dual,
                      "target": r.target, **r.ratios} for r in self.rows],
        }


def goal_check(mu_E: PointMeasure, mu_F: PointMeasure, k_range, tau: float, beta: float | None,
               s_E: float) -> GoalReport:
    """Per-scale comparison of the initial integral with delta_k^{2 beta}.

    Each row holds the full integral, its Good and Bad parts (threshold
    exponent s = d - 1 + tau - s_E + 4 beta), the dual upper bound for Bad
    and the target.
    """
    d = mu_E.dim
    _check_tau(tau, d)
    beta = default_beta(s_E, tau) if beta is None else beta
    if not beta > 0:
        raise ConfigError(f"beta={beta} must be positive (is s_E > tau?)")
    s = threshold_exponent(d, tau, s_E, beta)
    ks = list(range(int(k_range[0]), int(k_range[1]) + 1))
    table = TubeTable(mu_E, mu_F, ks)
    dual_ok = 0 < s <= d - 1
    rows = []
    for k in ks:
        rows.append(ScaleRow(
            k=k,
            lhs=initial_term(mu_E, mu_F, k, tau),
            good=good_term(mu_E, mu_F, k, tau, s, table),
            bad=bad_term(mu_E, mu_F, k, s, table).value,
            dual=dual_rhs(mu_E, mu_F, k, s) if dual_ok else math.nan,
            target=2.0 ** (-2 * beta * k),
        ))
    return GoalReport(tau, beta, s_E, s, rows)


def frostman_projection_check(mu_E: PointMeasure, mu_F: PointMeasure, k, s: float,
                              table: TubeTable | None = None) -> InequalityProbe:
    """Largest delta_k-ball mass of (P_w)_* mu_{F,w} over directions w, against delta_k^s.

    mu_{F,w} keeps the atoms x of mu_F having a good partner y whose line
    direction lies within delta_k of +-w; w runs over the cap centres at scale k.
    """
    k = as_scale(k).k
    delta = 2.0**-k
    table = table or TubeTable(mu_E, mu_F, [k])
    good = ~table.bad_mask(k, s)
    grid = _grid(mu_F.dim, k)
    worst = 0.0
    if good.any():
        # unit directions of good pairs, folded to a half-sphere (lines are undirected)
        ii, jj = np.nonzero(good)
        v = mu_E.locations[jj] - mu_F.locations[ii]
        v /= np.linalg.norm(v, axis=1)[:, None]
        for w in grid.centers:
            close = np.abs(v @ w) >= math.cos(delta)
            if not close.any():
                continue
            keep = np.zeros(mu_F.n_atoms, dtype=bool)
            keep[ii[close]] = True
            u = orthogonal_coordinates(mu_F.locations[keep], w)
            if u.shape[1] == 1:
                u = np.column_stack([u, np.zeros(len(u))])
            proj = PointMeasure(u, mu_F.weights[keep])
            worst = max(worst, float(ball_masses(proj, proj.locations, delta).max()))
    return InequalityProbe(worst, 2.0 ** (-k * s), {"k": k, "s": s})
