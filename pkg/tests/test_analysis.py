import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from radproj.analysis import (
    InequalityProbe,
    compare_energy_product,
    energy_direct,
    energy_fourier,
    energy_report,
    fourier_ball_integral,
    lp_radial_moment,
    orponen_identity_check,
    riesz_constant,
    schur_test_check,
)
from radproj.errors import BudgetError, ConfigError, ProjectionError
from radproj.measures import (
    CantorSpec,
    PointMeasure,
    build_cantor_measure,
    four_corner_spec,
    frostman_fit,
    full_grid_spec,
    geometric_radii,
    segment_measure,
)
from radproj.projections import BUMPS, orthogonal_coordinates

# suite-wide constants for the comparability probes
ORPONEN_C = 4.0
SCHUR_C = 8.0


# ------------------------------------------------------------------ probes


def test_probe_ratio_conventions():
    assert InequalityProbe(0.0, 0.0).ratio == 0.0
    assert InequalityProbe(1.0, 0.0).ratio == math.inf
    assert InequalityProbe(3.0, 2.0, {"k": 1}).to_dict() == {"lhs": 3.0, "rhs": 2.0, "ratio": 1.5, "k": 1}


# ------------------------------------------------------------------ direct energy


@pytest.mark.parametrize("s", [0.3, 1.0, 1.7])
def test_two_atoms_energy(s):
    mu = PointMeasure([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
    assert energy_direct(mu, s) == pytest.approx(0.5, rel=1e-15)


def test_single_atom_energy_is_zero():
    assert energy_direct(PointMeasure([[0.2, 0.2]], [1.0]), 1.0) == 0.0


def test_segment_energy_close_to_closed_form():
    mu = segment_measure([0.0, 0.0], [1.0, 0.0], 256)
    val = energy_direct(mu, 0.5, diagonal_cutoff=1 / 256)
    assert val == pytest.approx(8 / 3, rel=0.05)


def test_energy_direct_rejects_exponent():
    with pytest.raises(ConfigError):
        energy_direct(PointMeasure([[0.0, 0.0]], [1.0]), 2.0)


@given(st.integers(0, 2**32 - 1))
def test_energy_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    loc, w = rng.uniform(0, 1, (30, 2)), rng.uniform(0.1, 1, 30)
    perm = rng.permutation(30)
    a = energy_direct(PointMeasure(loc, w), 0.7)
    b = energy_direct(PointMeasure(loc[perm], w[perm]), 0.7)
    assert a == pytest.approx(b, rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0), st.floats(0.1, 1.9))
def test_energy_decreases_when_a_distance_grows(seed, push, s):
    rng = np.random.default_rng(seed)
    loc = rng.uniform(0, 1, (12, 2))
    w = rng.uniform(0.1, 1, 12)
    # moving atom 0 along +x after placing it left of all others lengthens every pair with it
    loc[0] = [-1.0, 0.5]
    moved = loc.copy()
    moved[0, 0] -= push
    assert energy_direct(PointMeasure(moved, w), s) < energy_direct(PointMeasure(loc, w), s)


# ------------------------------------------------------------------ Fourier energy


@pytest.mark.parametrize("s,K,w", [(0.5, 8.0, 1.0), (1.2, 16.0, 0.3)])
def test_single_atom_fourier_closed_form(s, K, w):
    mu = PointMeasure([[0.4, 0.1]], [w])
    got = energy_fourier(mu, s, K, normalize=False)
    assert got == pytest.approx(w**2 * 2 * math.pi * K**s / s, rel=1e-9)


def test_riesz_constant_known_value():
    # d = 2, s = 1: pi^(1 - 1) Gamma(1/2) / Gamma(1/2) = 1
    assert riesz_constant(2, 1.0) == pytest.approx(1.0)


def test_fourier_energy_reflection_invariant(four_corner5):
    mirrored = PointMeasure(-four_corner5.locations, four_corner5.weights)
    a = energy_fourier(four_corner5, 0.8, 16.0)
    assert energy_fourier(mirrored, 0.8, 16.0) == pytest.approx(a, rel=1e-9)


def test_fourier_budget_refusal(four_corner5):
    with pytest.raises(BudgetError) as err:
        fourier_ball_integral(four_corner5.locations, four_corner5.weights, 256.0, -1.2, max_work=10**6)
    assert err.value.estimate > 10**6


def test_fourier_rejects_small_cutoff(four_corner5):
    with pytest.raises(ConfigError):
        energy_fourier(four_corner5, 0.8, 1.0)


@pytest.mark.parametrize(
    "spec",
    [CantorSpec(2, 3, ((0, 0), (2, 0), (0, 2), (2, 2)), 4),
     CantorSpec(2, 2, ((0, 0), (1, 0), (0, 1)), 6)],
)
def test_energy_ratio_stable_across_octaves(spec):
    mu = build_cantor_measure(spec)
    ratios = [energy_report(mu, 0.8, K).ratio for K in (16.0, 32.0, 64.0)]
    assert all(r > 0 for r in ratios)
    assert max(ratios) / min(ratios) < 2.0


def test_four_corner_energy_ratio_frozen(four_corner5):
    ratios = [energy_report(four_corner5, 0.8, K).ratio for K in (16.0, 32.0, 64.0)]
    assert ratios == pytest.approx([1.21, 1.21, 1.14], abs=0.01)
    assert max(ratios) / min(ratios) < 2.0


# ------------------------------------------------------------------ Schur test


@pytest.mark.parametrize("m,expected", [(1, 2.0), (2, math.pi)])
def test_schur_single_atom_ratio_is_ball_volume(m, expected):
    pr = schur_test_check(np.zeros((1, m)), [1.0], 1.0, 0.125, 0.0)
    assert pr.ratio == pytest.approx(expected, rel=1e-6)


def test_schur_uniform_interval_bounded():
    n = 4096
    pts = (np.arange(n) + 0.5) / n
    ratios = [schur_test_check(pts, np.full(n, 1 / n), 1.0, 2.0**-j, 1.0).ratio for j in range(3, 8)]
    assert max(ratios) <= 1.0 + 1e-6
    assert min(ratios) > 0.9


def test_schur_four_corner_projection_bounded(four_corner6):
    w = np.array([2.0, 1.0])
    coords = orthogonal_coordinates(four_corner6.locations, w)[:, 0]
    line = PointMeasure(np.column_stack([coords, np.zeros_like(coords)]), four_corner6.weights)
    s = frostman_fit(line, geometric_radii(0.25, 0.5, 5)).exponent
    ratios = []
    for j in range(3, 8):
        pr = schur_test_check(coords, four_corner6.weights, 1.0, 2.0**-j, s)
        ratios.append(pr.ratio / max(1.0, pr.metadata["ball_constant"]))
    assert max(ratios) <= SCHUR_C


def test_schur_rejects_three_dimensions():
    with pytest.raises(ConfigError):
        schur_test_check(np.zeros((2, 3)), [1.0, 1.0], 1.0, 0.1, 1.0)


# ------------------------------------------------------------------ Orponen identity


def _single_bump_oracle(D, delta, p):
    """Both sides for a point mass at distance D from a single viewpoint, by quadrature."""
    b = BUMPS[2]
    R = b.support * delta

    def inner(th, weighted):
        u, c = D * math.sin(th), D * math.cos(th)
        if abs(u) >= R:
            return 0.0
        h = math.sqrt(R * R - u * u)
        f = lambda t: float(b.profile(math.hypot(u, t - c) / delta)) / delta**2 * (t if weighted else 1.0)
        return integrate.quad(f, c - h, c + h, points=[c], limit=200)[0]

    thmax = math.asin(R / D)
    lhs = integrate.quad(lambda th: inner(th, True) ** p, -thmax, thmax, limit=200)[0]
    # every line is met from two antipodal directions
    rhs = 2 * integrate.quad(lambda th: inner(th, False) ** p, -thmax, thmax, limit=200)[0]
    return lhs, rhs


def test_orponen_single_atom_matches_quadrature():
    pr = orponen_identity_check(PointMeasure([[1.0, 0.0]], [1.0]), PointMeasure([[0.0, 0.0]], [1.0]), 2.0, 0.25)
    lhs, rhs = _single_bump_oracle(1.0, 0.25, 2.0)
    assert pr.lhs == pytest.approx(lhs, rel=0.15)
    assert pr.rhs == pytest.approx(rhs, rel=0.15)
    assert pr.ratio == pytest.approx(lhs / rhs, rel=0.02)
    assert 1 / ORPONEN_C <= pr.ratio <= ORPONEN_C


def test_orponen_zero_function():
    pr = orponen_identity_check(PointMeasure.empty(2), PointMeasure([[0.0, 0.0]], [1.0]), 2.0, 0.25)
    assert (pr.lhs, pr.rhs) == (0.0, 0.0)


def test_orponen_overlap_error(four_corner5):
    with pytest.raises(ProjectionError):
        orponen_identity_check(four_corner5, PointMeasure([[0.5, 0.5]], [1.0]), 2.0, 0.25)


def test_orponen_four_corner_far_grid(four_corner5, grid8):
    nu = grid8.translate([1.5, 0.0])
    pr = orponen_identity_check(four_corner5, nu.scale(1.0), 1.5, 2.0**-5, exclusion_radius=0.05)
    assert 1 / ORPONEN_C <= pr.ratio <= ORPONEN_C


# ------------------------------------------------------------------ radial L^p moment


def _closed_form(D, delta, p):
    b = BUMPS[2]

    def proj(v):
        return 2 * integrate.quad(lambda t: float(b.profile(math.hypot(v, t))), 0, b.support, limit=200)[0]

    I = 2 * integrate.quad(lambda v: proj(v) ** p, 0, b.support, limit=200)[0]
    return D ** (p - 1) * delta ** (1 - p) * I


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("k", [4, 5])
def test_lp_moment_single_bump_closed_form(p, k):
    D, delta = 1.5, 2.0**-k
    got = lp_radial_moment(PointMeasure([[0.0, 0.0]], [1.0]), delta, PointMeasure([[D, 0.0]], [1.0]), p)
    ratio = got / _closed_form(D, delta, p)
    assert 0.5 <= ratio <= 2.0


def test_lp_moment_power_means_monotone_in_p(four_corner5):
    E = segment_measure([3.0, 0.0], [3.0, 1.0], 64)
    total = 2 * math.pi * E.total_mass
    means = []
    for p in (1.05, 1.5, 2.0, 3.0):
        val = lp_radial_moment(four_corner5, 2.0**-4, E, p)
        means.append((val / total) ** (1 / p))
    assert all(a <= b * (1 + 1e-12) for a, b in zip(means, means[1:]))


def test_lp_moment_requires_p_above_one(four_corner5):
    with pytest.raises(ConfigError):
        lp_radial_moment(four_corner5, 0.1, PointMeasure([[3.0, 0.0]], [1.0]), 1.0)


def test_energy_product_ratio_stable_across_delta(four_corner5):
    E = segment_measure([3.0, 0.0], [3.0, 1.0], 256)
    ratios = []
    for k in (4, 5, 6):
        pr = compare_energy_product(four_corner5, 2.0**-k, E, 1.5, 1.0, 1.0, cutoff_E=1 / 256, cutoff_F=2.0**-5)
        assert math.isfinite(pr.ratio) and pr.ratio > 0
        ratios.append(pr.ratio)
    assert max(ratios) / min(ratios) < 1.5
