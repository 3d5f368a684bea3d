"""Brute-force reference implementations used by ``verify`` and the tests.

These avoid the vectorised code paths on purpose: plain loops, an exhaustive
subset search, and the cross-product formula for point-line distances.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .measures import PointMeasure
from .projections import cap_grid


def exhaustive_worst(masses, m: int) -> float:
    """Largest total over all subsets of at most m caps."""
    masses = [float(v) for v in masses]
    best = 0.0
    for size in range(1, min(m, len(masses)) + 1):
        for combo in itertools.combinations(masses, size):
            best = max(best, math.fsum(combo))
    return best


def line_distance(z, x, y) -> float:
    """Distance from z to the line through x and y via |(y - x) x (z - x)| / |y - x|."""
    u = [b - a for a, b in zip(x, y)]
    v = [b - a for a, b in zip(x, z)]
    if len(u) == 2:
        cross = abs(u[0] * v[1] - u[1] * v[0])
    else:
        c = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
        cross = math.sqrt(sum(t * t for t in c))
    return cross / math.sqrt(sum(t * t for t in u))


def tube_mass(mu: PointMeasure, x, y, k: int) -> float:
    r = 10 * 2.0**-k
    total = 0.0
    for z, w in zip(mu.locations.tolist(), mu.weights.tolist()):
        if line_distance(z, list(x), list(y)) <= r * (1 + 1e-12):
            total += w
    return total


def partition(mu_E: PointMeasure, mu_F: PointMeasure, x, k: int, s: float) -> list[bool]:
    """Per atom of mu_E: True when good."""
    thr = 2.0 ** (-k * s)
    return [tube_mass(mu_F, x, y, k) < thr for y in mu_E.locations.tolist()]


def pair_table(mu_E, mu_F, k, s) -> list[list[bool]]:
    """bad[i][j] for x_i in F, y_j in E."""
    return [[not g for g in partition(mu_E, mu_F, x, k, s)] for x in mu_F.locations.tolist()]


def bad_routes(mu_E: PointMeasure, mu_F: PointMeasure, k: int, s: float) -> tuple[float, float, float]:
    bad = pair_table(mu_E, mu_F, k, s)
    wE, wF = mu_E.weights.tolist(), mu_F.weights.tolist()
    by_x = sum(wF[i] * sum(wE[j] for j in range(len(wE)) if bad[i][j]) for i in range(len(wF)))
    prod = sum(wF[i] * wE[j] for i in range(len(wF)) for j in range(len(wE)) if bad[i][j])
    by_y = sum(wE[j] * sum(wF[i] for i in range(len(wF)) if bad[i][j]) for j in range(len(wE)))
    return by_x, prod, by_y


def _cap_count(k: int, tau: float) -> int:
    return max(1, int(math.floor(2.0 ** (k * tau) + 1e-9)))


def _worst_from(viewpoint, atoms, weights, k, tau) -> float:
    grid = cap_grid(len(viewpoint), k)
    bins: dict[int, float] = {}
    for z, w in zip(atoms, weights):
        v = np.array(z) - np.array(viewpoint)
        cap = int(grid.cap_index(v / np.linalg.norm(v))[0])
        bins[cap] = bins.get(cap, 0.0) + w
    vals = sorted(bins.values(), reverse=True)
    return sum(vals[: _cap_count(k, tau)])


def good_term(mu_E, mu_F, k, tau, s) -> float:
    total = 0.0
    E, wE = mu_E.locations.tolist(), mu_E.weights.tolist()
    for x, wx in zip(mu_F.locations.tolist(), mu_F.weights.tolist()):
        good = partition(mu_E, mu_F, x, k, s)
        atoms = [y for y, g in zip(E, good) if g]
        weights = [w for w, g in zip(wE, good) if g]
        total += wx * _worst_from(x, atoms, weights, k, tau)
    return total


def initial_term(mu_E, mu_F, k, tau) -> float:
    E, wE = mu_E.locations.tolist(), mu_E.weights.tolist()
    return sum(wx * _worst_from(x, E, wE, k, tau)
               for x, wx in zip(mu_F.locations.tolist(), mu_F.weights.tolist()))


def dual_rhs(mu_E, mu_F, k, s) -> float:
    return initial_term(mu_F, mu_E, k, s)


def random_pair(rng: np.random.Generator, d: int = 2, n_E=(8, 30), n_F=(4, 20)):
    """Separated random measures: E in [0, 1]^d, F in [2, 3] x [0, 1]^(d-1)."""
    a = int(rng.integers(*n_E))
    b = int(rng.integers(*n_F))
    E = PointMeasure(rng.uniform(0, 1, (a, d)), rng.uniform(0.1, 1.0, a))
    locF = rng.uniform(0, 1, (b, d))
    locF[:, 0] += 2.0
    F = PointMeasure(locF, rng.uniform(0.1, 1.0, b))
    return E, F


def verify_suite(seed: int = 0, instances: int = 50) -> list[tuple[str, bool, str]]:
    """Compare the library against the brute-force references on random instances."""
    from .projections import ProjectionHistogram, worst_capset
    from . import tubes

    rng = np.random.default_rng(seed)
    out = []

    worst = 0
    for _ in range(instances):
        n = int(rng.integers(1, 13))
        masses = rng.uniform(0, 1, n) * (rng.uniform(0, 1, n) < 0.8)
        k, tau = int(rng.integers(1, 5)), float(rng.uniform(0.05, 1.0))
        _, got = worst_capset(ProjectionHistogram(masses, grid=cap_grid(2, k)), tau)
        worst = max(worst, abs(got - exhaustive_worst(masses, _cap_count(k, tau))))
    out.append(("worst_capset vs exhaustive search", worst <= 1e-12, f"max error {worst:.3g}"))

    errs = {"tube_mass": 0.0, "good_bad_partition": 0, "bad_term routes": 0.0}
    for _ in range(instances):
        d = int(rng.choice([2, 3]))
        E, F = random_pair(rng, d)
        k, s = int(rng.integers(2, 7)), float(rng.uniform(0.2, 1.0))
        x = F.locations[0]
        y = E.locations[int(rng.integers(E.n_atoms))]
        errs["tube_mass"] = max(errs["tube_mass"], abs(tubes.tube_mass(F, x, y, k) - tube_mass(F, x, y, k)))
        part = tubes.good_bad_partition(E, F, x, k, s)
        ref = partition(E, F, x, k, s)
        mism = set(part.good.tolist()) ^ {i for i, g in enumerate(ref) if g}
        errs["good_bad_partition"] += len(mism)
        got = tubes.bad_term(E, F, k, s)
        want = bad_routes(E, F, k, s)
        gaps = [abs(a - b) for a, b in zip((got.by_viewpoint, got.product, got.by_target), want)]
        errs["bad_term routes"] = max(errs["bad_term routes"], *gaps)
    out.append(("tube_mass vs cross-product distance", errs["tube_mass"] <= 1e-12,
                f"max error {errs['tube_mass']:.3g}"))
    out.append(("good_bad_partition vs per-atom loop", errs["good_bad_partition"] == 0,
                f"{errs['good_bad_partition']} misclassified atoms"))
    out.append(("bad_term three routes vs loops", errs["bad_term routes"] <= 1e-12,
                f"max error {errs['bad_term routes']:.3g}"))
    return out
