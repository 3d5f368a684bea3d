import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radproj.errors import BudgetError, ConfigError
from radproj.measures import (
    CantorSpec,
    PointMeasure,
    ball_masses,
    build_cantor_measure,
    four_corner_spec,
    frostman_fit,
    full_grid_spec,
    geometric_radii,
    restrict,
    segment_measure,
)


def test_full_digit_set_gives_uniform_grid():
    mu = build_cantor_measure(full_grid_spec(2, 2, 3))
    assert mu.n_atoms == 64
    assert np.allclose(mu.weights, 1 / 64)
    xs = np.unique(mu.locations[:, 0])
    assert np.allclose(xs, (np.arange(8) + 0.5) / 8)
    assert mu.total_mass == pytest.approx(1.0, abs=1e-15)


def test_four_corner_depth5_atoms_and_exponent(four_corner5):
    assert four_corner5.n_atoms == 1024
    assert np.all(four_corner5.weights == 1 / 1024)
    fit = frostman_fit(four_corner5, geometric_radii(0.25, 0.25, 4))
    assert fit.exponent == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("depth", [1, 4, 9])
def test_single_digit_collapses_to_one_atom(depth):
    mu = build_cantor_measure(CantorSpec(2, 3, ((1, 2),), depth))
    assert mu.n_atoms == 1
    assert mu.total_mass == 1.0


def test_atoms_are_cell_centres_inside_unit_cube():
    spec = CantorSpec(3, 3, ((0, 0, 0), (2, 2, 2), (0, 2, 1)), 3)
    mu = build_cantor_measure(spec)
    assert np.all(mu.locations > 0) and np.all(mu.locations < 1)
    cells = mu.locations * 27 - 0.5
    assert np.allclose(cells, np.round(cells))


def test_cantor_budget_refusal_reports_count():
    with pytest.raises(BudgetError) as err:
        build_cantor_measure(full_grid_spec(2, 4, 12))
    assert err.value.estimate == 16**12


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=2, base=1, digits=((0, 0),), depth=1),
        dict(dim=2, base=2, digits=(), depth=1),
        dict(dim=2, base=2, digits=((2, 0),), depth=1),
        dict(dim=2, base=2, digits=((0, 0, 0),), depth=1),
        dict(dim=4, base=2, digits=((0, 0, 0, 0),), depth=1),
        dict(dim=2, base=2, digits=((0, 0),), depth=0),
    ],
)
def test_invalid_cantor_specs(kwargs):
    with pytest.raises(ConfigError):
        CantorSpec(**kwargs)


def test_nominal_dimension():
    assert four_corner_spec(3).nominal_dimension == pytest.approx(1.0)
    assert CantorSpec(2, 3, ((0, 0), (2, 0)), 2).nominal_dimension == pytest.approx(math.log(2) / math.log(3))


def test_frostman_uniform_grid_exponent_two():
    mu = build_cantor_measure(full_grid_spec(2, 2, 6))
    fit = frostman_fit(mu, geometric_radii(0.5, 0.5, 4))
    assert fit.exponent == pytest.approx(2.0, abs=0.1)
    masses = [m for _, m in fit.per_radius_sup]
    assert all(a >= b for a, b in zip(masses, masses[1:]))


def test_frostman_four_corner_depth6(four_corner6):
    radii = geometric_radii(0.25, 0.25, 4)
    fit = frostman_fit(four_corner6, radii)
    assert fit.exponent == pytest.approx(1.0, abs=0.1)
    # oracle: brute-force sup of ball masses over atom centres
    loc = four_corner6.locations
    for r, got in fit.per_radius_sup:
        best = 0.0
        for a in range(0, len(loc), 512):
            d = np.linalg.norm(loc[a:a + 512, None, :] - loc[None, :, :], axis=-1)
            best = max(best, float((d <= r * (1 + 1e-12)).sum(axis=1).max()) / len(loc))
        assert got == pytest.approx(best, abs=1e-15)


def test_frostman_single_atom_exponent_zero():
    mu = PointMeasure([[0.3, 0.4]], [1.0])
    fit = frostman_fit(mu, geometric_radii(0.5, 0.5, 4))
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)


def test_frostman_flags_radii_below_resolution():
    mu = build_cantor_measure(full_grid_spec(2, 2, 3))  # spacing 1/8
    fit = frostman_fit(mu, geometric_radii(0.5, 0.5, 6))
    assert fit.below_resolution == [0.0625, 0.03125, 0.015625]
    assert fit.scale_window == (0.5, 0.125)


@pytest.mark.parametrize("radii", [[0.5, 0.25], [0.25, 0.5, 0.125], [0.5, 0.5, 0.25], [0.5, 0.0, -1.0]])
def test_frostman_rejects_bad_radii(radii):
    with pytest.raises(ConfigError):
        frostman_fit(build_cantor_measure(full_grid_spec(2, 2, 3)), radii)


def test_ball_sup_at_atoms_vs_dense_grid():
    # sup over all centres lies between the atom-centred sup at r and at 2r
    mu = build_cantor_measure(four_corner_spec(2))
    g = np.linspace(-0.2, 1.2, 141)
    dense = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    for r in (0.05, 0.1, 0.2, 0.4):
        any_centre = ball_masses(mu, dense, r).max()
        at_atoms = ball_masses(mu, mu.locations, r).max()
        assert at_atoms <= any_centre + 1e-15
        assert any_centre <= ball_masses(mu, mu.locations, 2 * r).max() + 1e-15


def test_closed_balls_count_boundary_atoms():
    mu = PointMeasure([[0.0, 0.0], [0.25, 0.0]], [0.5, 0.5])
    assert ball_masses(mu, [[0.0, 0.0]], 0.25)[0] == 1.0


def test_restrict_examples(grid8):
    assert restrict(grid8, np.ones(64, bool)).total_mass == grid8.total_mass
    empty = restrict(grid8, np.zeros(64, bool))
    assert empty.is_empty and empty.total_mass == 0.0
    half = restrict(grid8, lambda idx: grid8.locations[idx, 0] < 0.5)
    assert half.total_mass == pytest.approx(0.5, abs=1e-15)
    assert restrict(grid8, [0, 5, 9]).n_atoms == 3


def test_point_measure_validation():
    with pytest.raises(ConfigError):
        PointMeasure([[0.0, 0.0]], [-1.0])
    with pytest.raises(ConfigError):
        PointMeasure([[0.0]], [1.0])
    with pytest.raises(ConfigError):
        PointMeasure([[0.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ConfigError):
        PointMeasure([[np.nan, 0.0]], [1.0])


def test_point_measure_is_read_only(grid8):
    with pytest.raises(ValueError):
        grid8.weights[0] = 3.0


def test_segment_measure_midpoints():
    mu = segment_measure([0, 0], [1, 0], 4)
    assert np.allclose(mu.locations[:, 0], [0.125, 0.375, 0.625, 0.875])


weights_st = st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=60)


@given(weights_st, st.integers(0, 2**32 - 1))
def test_restrict_mass_additivity(ws, seed):
    rng = np.random.default_rng(seed)
    mu = PointMeasure(rng.uniform(0, 1, (len(ws), 2)), ws)
    keep = rng.uniform(size=len(ws)) < 0.5
    a, b = restrict(mu, keep), restrict(mu, ~keep)
    assert a.total_mass + b.total_mass == pytest.approx(mu.total_mass, rel=1e-14, abs=1e-300)
    assert math.fsum(mu.weights.tolist()) == mu.total_mass


@given(st.floats(1e-3, 1e3), st.integers(0, 2**32 - 1))
def test_weight_scaling_keeps_exponent(lam, seed):
    rng = np.random.default_rng(seed)
    mu = PointMeasure(rng.uniform(0, 1, (200, 2)), rng.uniform(0.1, 1, 200))
    radii = geometric_radii(0.5, 0.5, 4)
    a, b = frostman_fit(mu, radii), frostman_fit(mu.scale_weights(lam), radii)
    assert b.exponent == pytest.approx(a.exponent, abs=1e-9)
    for (_, ma), (_, mb) in zip(a.per_radius_sup, b.per_radius_sup):
        assert mb == pytest.approx(lam * ma, rel=1e-12)
    assert mu.scale_weights(lam).total_mass == pytest.approx(lam * mu.total_mass, rel=1e-12)


@pytest.mark.parametrize(
    "spec",
    [
        four_corner_spec(5),
        full_grid_spec(2, 2, 6),
        CantorSpec(2, 3, ((0, 0), (2, 0), (0, 2), (2, 2)), 5),
        CantorSpec(2, 4, ((0, 1), (1, 3), (2, 0), (3, 2), (1, 1), (2, 2), (0, 2), (3, 1)), 5),
    ],
)
def test_frostman_consistency_with_nominal_dimension(spec):
    mu = build_cantor_measure(spec)
    b = spec.base
    radii = geometric_radii(float(b) ** -1, 1.0 / b, 4)
    fit = frostman_fit(mu, radii)
    assert abs(fit.exponent - spec.nominal_dimension) < 0.15
