import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from knnanomaly import density as dens
from knnanomaly.density import (
    Dataset,
    DensityEstimate,
    SupportBounds,
    ball_volume,
    boundary_correct,
    cell_grid,
    default_k,
    estimate_density,
    grid_estimate,
    kth_nn_distance,
    kth_nn_distances,
    renormalize,
    resample_on_grid,
    split_dataset,
)
from knnanomaly.synthetic import gen_gaussian


def brute_kth(queries, reference, k):
    # full sort of the explicit distance matrix
    d = cdist(np.atleast_2d(queries), np.atleast_2d(reference))
    return np.sort(d, axis=1)[:, k - 1]


# ---------------------------------------------------------------- Dataset


def test_flat_input_becomes_column():
    data = Dataset([1.0, 2.0, 3.0])
    assert data.points.shape == (3, 1)
    assert data.dim == 1 and len(data) == 3


def test_non_finite_points_rejected():
    with pytest.raises(ValueError, match="point 1"):
        Dataset([[0.0, 1.0], [np.nan, 2.0]])


# ---------------------------------------------------------------- split


def test_split_even_sizes():
    split = split_dataset(Dataset(np.arange(10.0)), 0.5, seed=1)
    assert (len(split.evaluation), len(split.reference)) == (5, 5)


def test_split_odd_sizes_floor_rule():
    split = split_dataset(Dataset(np.arange(11.0)), 0.5, seed=1)
    assert (len(split.evaluation), len(split.reference)) == (5, 6)


def test_split_is_a_partition_and_deterministic():
    data = Dataset(np.arange(101.0))
    a = split_dataset(data, 0.3, seed=4)
    b = split_dataset(data, 0.3, seed=4)
    c = split_dataset(data, 0.3, seed=5)
    joined = np.sort(np.concatenate([a.reference_index, a.evaluation_index]))
    np.testing.assert_array_equal(joined, np.arange(101))
    np.testing.assert_array_equal(a.evaluation_index, b.evaluation_index)
    assert not np.array_equal(a.evaluation_index, c.evaluation_index)
    np.testing.assert_array_equal(a.evaluation.points[:, 0], a.evaluation_index.astype(float))


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.01])
def test_split_rejects_empty_parts(fraction):
    with pytest.raises(ValueError):
        split_dataset(Dataset(np.arange(10.0)), fraction)


# ---------------------------------------------------------------- k and volume


def test_default_k_is_ceiling_square_root():
    for m in range(1, 20001):
        assert default_k(m) == math.ceil(math.sqrt(m)), m
    assert default_k(5000) == 71


@pytest.mark.parametrize(
    "r, d, expected",
    [(1.0, 1, 2.0), (1.0, 2, math.pi), (0.5, 2, math.pi / 4), (2.0, 3, 4.0 / 3.0 * math.pi * 8)],
)
def test_ball_volume_closed_forms(r, d, expected):
    assert ball_volume(r, d) == pytest.approx(expected, rel=1e-14)


def test_ball_volume_monte_carlo_in_four_dims():
    # fraction of the cube [-1,1]^4 inside the unit ball
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(400_000, 4))
    inside = np.mean((pts**2).sum(axis=1) <= 1.0) * 16
    assert ball_volume(1.0, 4) == pytest.approx(inside, rel=0.01)


# ---------------------------------------------------------------- kth neighbour


def test_kth_distance_hand_examples():
    assert kth_nn_distance(1.5, Dataset([0.0, 1.0, 2.0, 4.0]), 2) == pytest.approx(0.5)
    square = Dataset([[0, 0], [1, 0], [0, 1], [1, 1]])
    assert kth_nn_distance([0.5, 0.5], square, 2) == pytest.approx(math.sqrt(0.5))
    assert kth_nn_distance(2.0, Dataset([0.0, 1.0, 2.0, 4.0]), 1) == 0.0


def test_ties_count_with_multiplicity():
    ref = Dataset([0.0, 0.0, 5.0])
    assert kth_nn_distance(0.0, ref, 2) == 0.0
    assert kth_nn_distance(0.0, ref, 3) == 5.0


def test_kth_distance_matches_full_sort(monkeypatch):
    # small chunks force the blocked path to be exercised
    monkeypatch.setattr(dens, "_CHUNK_ELEMENTS", 50)
    rng = np.random.default_rng(3)
    q = rng.normal(size=(37, 3))
    ref = rng.normal(size=(29, 3))
    for k in (1, 5, 29):
        np.testing.assert_allclose(kth_nn_distances(q, ref, k), brute_kth(q, ref, k), rtol=1e-12)


def test_kth_distance_errors():
    with pytest.raises(ValueError, match="exceeds"):
        kth_nn_distances([0.0], [1.0, 2.0], 3)
    with pytest.raises(ValueError, match="dimension"):
        kth_nn_distances([[0.0, 1.0]], [1.0, 2.0], 1)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=30),
    st.floats(-100, 100),
    st.integers(1, 3),
)
def test_kth_distance_property_1d(ref, query, k):
    got = kth_nn_distance(query, Dataset(ref), k)
    want = sorted(abs(query - r) for r in ref)[k - 1]
    assert got == pytest.approx(want, abs=1e-9)


# ---------------------------------------------------------------- density


def test_density_hand_examples():
    est = estimate_density([1.5], Dataset([0.0, 1.0, 2.0, 4.0]), 2)
    assert est.values[0] == pytest.approx(1.0 / (4 * 2 * 0.5))
    square = Dataset([[0, 0], [1, 0], [0, 1], [1, 1]])
    est2 = estimate_density([[0.5, 0.5]], square, 2)
    assert est2.values[0] == pytest.approx(1.0 / (4 * math.pi * 0.5))
    assert est2.k == 2 and est2.m_ref == 4 and est2.dim == 2


def test_density_requires_k_at_least_two():
    with pytest.raises(ValueError, match="at least 2"):
        estimate_density([0.0], Dataset([0.0, 1.0]), 1)
    with pytest.raises(ValueError, match="smaller than k"):
        estimate_density([0.0], Dataset([0.0, 1.0]), 3)


def test_saturated_point_takes_nearest_positive_value():
    ref = Dataset([0.0, 0.0, 0.0, 1.0, 2.0])
    est = estimate_density([0.0, 1.5, 10.0], ref, 3)
    # 1.5: distances 1.5,1.5,1.5,0.5,0.5 -> third smallest 1.5
    assert est.values[1] == pytest.approx(2.0 / (5 * 3.0))
    assert est.saturated.tolist() == [True, False, False]
    assert est.values[0] == est.values[1]
    assert np.all(np.isfinite(est.values))


def test_all_saturated_is_an_error():
    with pytest.raises(ValueError, match="saturated"):
        estimate_density([0.0], Dataset([0.0, 0.0, 0.0]), 2)


def test_density_scales_inversely_with_volume():
    rng = np.random.default_rng(1)
    ref = rng.normal(size=(300, 2))
    q = rng.normal(size=(40, 2))
    base = estimate_density(q, ref, 10).values
    scaled = estimate_density(3.0 * q, 3.0 * ref, 10).values
    np.testing.assert_allclose(scaled, base / 9.0, rtol=1e-10)


def test_density_ignores_reference_order():
    rng = np.random.default_rng(2)
    ref = rng.normal(size=200)
    q = rng.normal(size=25)
    a = estimate_density(q, ref, 8).values
    b = estimate_density(q, rng.permutation(ref), 8).values
    np.testing.assert_array_equal(a, b)


def test_gaussian_density_at_zero_near_truth():
    vals = []
    for seed in range(20):
        ref = gen_gaussian(5000, 1, seed=seed)
        vals.append(estimate_density([0.0], ref, 71).values[0])
    truth = 1.0 / math.sqrt(2 * math.pi)
    assert abs(np.median(vals) - truth) <= 0.15 * truth


# ---------------------------------------------------------------- boundary correction


def test_unbounded_correction_is_identity():
    rng = np.random.default_rng(5)
    ref = Dataset(rng.normal(size=(200, 2)))
    est = estimate_density(rng.normal(size=(50, 2)), ref, 10)
    out = boundary_correct(est, ref, SupportBounds.unbounded(2))
    np.testing.assert_array_equal(out.values, est.values)
    assert out.corrected


def test_boundary_hand_example():
    ref = Dataset(0.05 + 0.1 * np.arange(10))
    est = estimate_density([0.02, 0.5, 0.52], ref, 2)
    # 0.02: radius 0.13 > margin 0.02; 0.5 and 0.52 lie inside
    out = boundary_correct(est, ref, SupportBounds.box(0.0, 1.0, 1))
    assert out.values[0] == est.values[1]
    assert out.values[1:].tolist() == est.values[1:].tolist()


def test_boundary_rule_on_beta_sample():
    from knnanomaly.synthetic import gen_beta

    data = gen_beta(2000, 1, seed=3)
    split = split_dataset(data, 0.5, seed=3)
    est = estimate_density(split.evaluation, split.reference, 45)
    out = boundary_correct(est, split.reference, SupportBounds.box(0.0, 1.0, 1))
    x = est.eval_points[:, 0]
    crossing = est.radii > np.minimum(x, 1 - x)
    assert crossing.any() and not crossing.all()
    interior = np.flatnonzero(~crossing)
    for i in np.flatnonzero(crossing):
        j = interior[np.argmin(np.abs(x[interior] - x[i]))]
        assert out.values[i] == est.values[j]
    np.testing.assert_array_equal(out.values[~crossing], est.values[~crossing])


def test_boundary_ties_go_to_lowest_index():
    rng = np.random.default_rng(8)
    ref = np.column_stack([rng.uniform(0.3, 0.7, 400), rng.uniform(-1, 1, 400)])
    pts = np.array([[0.5, 0.3], [0.5, -0.3], [0.01, 0.0]])
    bounds = SupportBounds([0.0, -np.inf], [np.inf, np.inf])
    est = estimate_density(pts, ref, 5)
    out = boundary_correct(est, ref, bounds)
    assert est.values[0] != est.values[1]
    assert out.values[2] == est.values[0]


def test_boundary_without_interior_points_fails():
    ref = Dataset([0.1, 0.2, 0.3])
    est = estimate_density([0.15, 0.25], ref, 3)
    with pytest.raises(ValueError, match="no interior point"):
        boundary_correct(est, ref, SupportBounds.box(0.1, 0.3, 1))


def test_margin_uses_nearest_finite_bound():
    b = SupportBounds.box(0.0, 1.0, 2)
    np.testing.assert_allclose(b.margin([[0.2, 0.5], [0.5, 0.9]]), [0.2, 0.1])
    assert np.isinf(SupportBounds.unbounded(1).margin([3.0])).all()


# ---------------------------------------------------------------- grids


def _grid_estimate(x, values):
    x = np.asarray(x, dtype=float)
    return DensityEstimate(x[:, None], np.asarray(values, dtype=float), k=2, m_ref=2, dim=1)


def test_renormalize_hand_examples():
    out = renormalize(_grid_estimate([0.0, 0.5], [2.0, 2.0]))
    np.testing.assert_allclose(out.values, [1.0, 1.0])
    assert out.renormalized
    # constant on 11 points spaced 0.1 -> integral 11 * 0.1 * c
    out = renormalize(_grid_estimate(np.linspace(0, 1, 11), np.full(11, 3.0)))
    np.testing.assert_allclose(out.values, 1 / 1.1)


def test_renormalize_is_idempotent():
    x = np.linspace(-3, 3, 301)
    once = renormalize(_grid_estimate(x, np.exp(-x**2)))
    twice = renormalize(once)
    np.testing.assert_allclose(twice.values, once.values, rtol=1e-12)


def test_renormalize_rejects_non_uniform_grid_and_2d():
    with pytest.raises(ValueError, match="uniform"):
        renormalize(_grid_estimate([0.0, 1.0, 3.0], [1.0, 1.0, 1.0]))
    est2d = DensityEstimate(np.zeros((3, 2)), np.ones(3), 2, 2, 2)
    with pytest.raises(ValueError, match="1-D"):
        renormalize(est2d)


def test_cell_grid_centres():
    np.testing.assert_allclose(cell_grid(0.0, 1.0, 4), [0.125, 0.375, 0.625, 0.875])


def test_grid_estimate_integrates_near_one():
    ref = gen_gaussian(4000, 1, seed=2)
    est = grid_estimate(ref, 63, size=1024)
    x = est.eval_points[:, 0]
    assert est.values.sum() * (x[1] - x[0]) == pytest.approx(1.0, abs=0.05)


def test_resample_examples():
    est = _grid_estimate([0.0, 1.0], [0.0, 1.0])
    assert resample_on_grid(est, [0.5])[0] == pytest.approx(0.5)
    np.testing.assert_array_equal(resample_on_grid(est, [-0.1, 1.1]), [0.0, 0.0])
    knots = _grid_estimate([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
    np.testing.assert_array_equal(resample_on_grid(knots, [0.0, 1.0, 2.0]), [1.0, 3.0, 5.0])


def test_resample_averages_repeated_points():
    est = _grid_estimate([0.0, 1.0, 1.0, 2.0], [0.0, 2.0, 4.0, 0.0])
    assert resample_on_grid(est, [1.0])[0] == pytest.approx(3.0)
