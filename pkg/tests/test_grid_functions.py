import numpy as np
import pytest
from hypothesis import given, strategies as st

from rearrange import fixtures as fx
from rearrange.grid_functions import (
    Axis,
    GridFunction,
    HeightGrid,
    InvalidGridFunction,
    NonNestedSections,
    layer_cake,
    read_gfn,
    reconstruct_interpolated,
    slice_sections,
    superlevel_section,
    write_gfn,
)
from rearrange.interval_sets import IntervalUnion

from strategies import tent_mixture


def test_superlevel_of_shifted_triangle():
    f = fx.shifted_triangle(0.5)
    U = superlevel_section(f, None, 0.5)
    assert len(U) == 1
    np.testing.assert_allclose(U.endpoints[0], (0.0, 1.0), atol=f.axes[0].step)


def test_superlevel_above_max_is_empty():
    f = fx.triangle()
    assert not superlevel_section(f, None, 1.0)
    assert not superlevel_section(f, None, 2.0)


def test_two_cone_section_at_center_slice():
    f = fx.two_cones(129)
    row = 64
    assert f.axes[0].points[row] == pytest.approx(0.0)
    U = superlevel_section(f, row, 0.5)
    # {|y - 2| < 1/2} together with {2 - 2|y + 2| > 1/2}
    np.testing.assert_allclose(np.ravel(U.endpoints), [-2.75, -1.25, 1.5, 2.5], atol=1e-12)


def test_layer_cake_examples():
    x = np.linspace(-2, 2, 401)
    one = layer_cake([(1.0, IntervalUnion([(-1, 1)]))], x)
    np.testing.assert_array_equal(one, ((x > -1) & (x < 1)).astype(float))
    pyramid = layer_cake(
        [(0.5, IntervalUnion([(-1, 1)])), (0.5, IntervalUnion([(-0.5, 0.5)]))], x
    )
    expected = np.where(np.abs(x) < 0.5, 1.0, np.where(np.abs(x) < 1, 0.5, 0.0))
    np.testing.assert_array_equal(pyramid, expected)


def test_layer_cake_rejects_growing_sections():
    x = np.linspace(-2, 2, 401)
    with pytest.raises(NonNestedSections):
        layer_cake([(0.5, IntervalUnion([(-0.5, 0.5)])), (0.5, IntervalUnion([(-1, 1)]))], x)


def _round_trip_errors(seed, grid_n, n_heights):
    func = tent_mixture(seed, 3)
    f = GridFunction.from_callable(func, [Axis(-2, 2, grid_n)])
    ax = f.axes[0]
    grid = HeightGrid(f.max(), n_heights)
    secs = slice_sections(f.samples, ax.min, ax.step, grid.heights)
    step = layer_cake(list(zip(grid.weights, secs)), ax.points)
    base = superlevel_section(f, None, 0.0)
    smooth = reconstruct_interpolated(grid.heights, secs, ax.points, f.max(), base=base)
    c0 = np.max(np.abs(np.diff(f.samples))) / ax.step
    bound = f.max() / n_heights + c0 * ax.step
    return np.max(np.abs(step - f.samples)), np.max(np.abs(smooth - f.samples)), bound


@given(st.integers(0, 10_000))
def test_round_trip_within_bound(seed):
    step_err, smooth_err, bound = _round_trip_errors(seed, 513, 128)
    assert step_err <= bound
    assert smooth_err <= bound


def test_round_trip_converges_under_refinement():
    errs = [_round_trip_errors(3, 128 * 2**k + 1, 32 * 2**k)[0] for k in range(4)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.mean(rates) > 0.8


@given(st.integers(0, 10_000), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_sections_nested(seed, a, b):
    f = GridFunction.from_callable(tent_mixture(seed, 3), [Axis(-2, 2, 257)])
    h1, h2 = sorted((a * f.max(), b * f.max()))
    assert superlevel_section(f, None, h2).issubset(superlevel_section(f, None, h1))


@given(st.lists(st.integers(0, 16), min_size=20, max_size=60), st.integers(16, 64))
def test_mass_identity_for_level_aligned_samples(levels, n_heights):
    # with every sample value on a height-cell edge, the midpoint rule in h is exact
    vals = np.array([0] + levels + [0], dtype=float)
    if vals.max() == 0:
        return
    top = vals.max()
    vals = vals / top * 1.0
    ax = Axis(0.0, 1.0, vals.size)
    f = GridFunction((ax,), vals)
    grid = HeightGrid(f.max(), int(top) * (n_heights // int(top) + 1))
    secs = slice_sections(f.samples, ax.min, ax.step, grid.heights)
    total = sum(w * U.measure() for w, U in zip(grid.weights, secs))
    assert total == pytest.approx(f.integral(), rel=1e-10)


def test_mass_identity_general_data_is_second_order():
    f = fx.two_bump(1025)
    ax = f.axes[0]
    errs = []
    for nh in (64, 128, 256):
        grid = HeightGrid(f.max(), nh)
        secs = slice_sections(f.samples, ax.min, ax.step, grid.heights)
        errs.append(abs(sum(w * U.measure() for w, U in zip(grid.weights, secs)) - f.integral()))
    assert errs[0] / errs[2] > 8


def test_gfn_round_trip(tmp_path):
    f = fx.two_cones(33)
    write_gfn(f, tmp_path / "f.gfn")
    g = read_gfn(tmp_path / "f.gfn")
    assert g.axes == f.axes
    np.testing.assert_array_equal(g.samples, f.samples)


@pytest.mark.parametrize(
    "samples",
    [[0.0, -1.0, 0.0], [0.0, np.nan, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0]],
)
def test_invalid_grids(samples):
    with pytest.raises(InvalidGridFunction):
        GridFunction((Axis(0.0, 1.0, 3),), np.array(samples))


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.gfn"
    p.write_text('{"format": "gfn", "dim": 1, "axes": [{"min": 0, "max": 1, "count": 4}], "samples": [0, 1, 0]}')
    with pytest.raises(InvalidGridFunction):
        read_gfn(p)
