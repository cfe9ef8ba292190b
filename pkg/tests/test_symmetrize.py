import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rearrange import fixtures as fx
from rearrange.grid_functions import Axis, GridFunction, superlevel_section
from rearrange.symmetrize import (
    TauTooLarge,
    TruncationSpec,
    lipschitz_report,
    steiner_continuous,
    steiner_full,
    steiner_truncated,
)

from strategies import tent_mixture


def _grid_tol(f, n_heights=512):
    return f.axes[-1].step * lipschitz_report(f).c0 + f.max() / n_heights


def test_full_removes_translation():
    f = fx.shifted_triangle(0.7)
    g = steiner_full(f)
    assert np.max(np.abs(g.samples - fx.triangle().samples)) <= _grid_tol(f)


@pytest.mark.parametrize("tau", [0.0, 0.2, 1.0, 5.0])
def test_symmetric_decreasing_is_fixed(tau):
    f = fx.triangle()
    np.testing.assert_allclose(steiner_continuous(f, tau).samples, f.samples, atol=1e-12)
    np.testing.assert_allclose(steiner_full(f).samples, f.samples, atol=1e-12)
    g = steiner_truncated(f, min(tau, 0.2), TruncationSpec(0.25))
    np.testing.assert_allclose(g.samples, f.samples, atol=1e-12)


def test_full_merges_two_bumps():
    f = fx.two_bump()
    g = steiner_full(f)
    U = superlevel_section(g, None, 0.3)
    # widths 0.7 and 0.5 at height 0.3 add up to one centered interval
    assert len(U) == 1
    np.testing.assert_allclose(U.endpoints[0], (-0.6, 0.6), atol=2 * f.axes[0].step)


def test_shifted_triangle_translates_at_unit_speed():
    g = steiner_continuous(fx.shifted_triangle(0.7), 0.3)
    ref = fx.shifted_triangle(0.4)
    assert np.max(np.abs(g.samples - ref.samples)) <= _grid_tol(ref)


@pytest.mark.parametrize("p", [1.0, 2.0, 5.0, np.inf])
@pytest.mark.parametrize("tau", [0.1, 0.4, 1.2])
def test_lp_norm_preserved(p, tau):
    f = fx.two_bump(1025)
    g = steiner_continuous(f, tau, n_heights=512)
    assert g.lp_norm(p) == pytest.approx(f.lp_norm(p), rel=1e-3)


def test_semigroup_on_functions():
    f = fx.three_bump(1025)
    dx = f.axes[0].step
    a = steiner_continuous(steiner_continuous(f, 0.15), 0.25)
    b = steiner_continuous(f, 0.4)
    for h in np.linspace(0.05, 0.95, 10) * f.max():
        A, B = superlevel_section(a, None, h), superlevel_section(b, None, h)
        assert len(A) == len(B)
        if A:
            assert np.max(np.abs(np.ravel(A.endpoints) - np.ravel(B.endpoints))) <= 2 * dx


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.floats(0.0, 2.0))
def test_lipschitz_does_not_grow(seed, tau):
    f = GridFunction.from_callable(tent_mixture(seed, 3), [Axis(-2, 2, 513)])
    c0 = lipschitz_report(f).c0
    g = steiner_continuous(f, tau, n_heights=256)
    assert lipschitz_report(g).c0 <= c0 * (1 + 1e-9) + 2 * c0 * f.axes[0].step


def test_lipschitz_report_examples():
    assert lipschitz_report(fx.triangle()).c0 == pytest.approx(1.0, abs=1e-9)
    ind = fx.indicator(256)
    assert lipschitz_report(ind).c0 == pytest.approx(1.0 / ind.axes[0].step)
    assert lipschitz_report(fx.two_cones()).c0 == pytest.approx(2.0, abs=1e-9)


def test_truncated_two_cones():
    f = fx.two_cones(129)
    h0, tau = 0.25, 0.1
    c0 = lipschitz_report(f).c0
    g, info = steiner_truncated(f, tau, TruncationSpec(h0), full_output=True)
    assert np.array_equal(g.support(), f.support())
    dx = f.axes[-1].step
    assert np.max(np.abs(g.samples - f.samples)) <= tau * c0 + 2 * c0 * dx
    l1 = np.sum(np.abs(g.samples - f.samples)) * f.cell_volume
    support_area = np.count_nonzero(f.support()) * f.cell_volume
    assert l1 <= (tau * c0 + 2 * c0 * dx) * support_area
    bound = c0 * h0 / (h0 - c0 * tau) + 2 * c0 * dx / h0
    assert lipschitz_report(g).per_axis[-1] <= bound
    assert info["tau_max"] == pytest.approx(h0 / c0)


def test_truncated_rejects_large_tau():
    f = fx.two_bump()
    with pytest.raises(TauTooLarge):
        steiner_truncated(f, 0.2, TruncationSpec(0.2))


def test_other_axis_matches_transpose():
    f = fx.two_cones(65)
    a = steiner_continuous(f, 0.3, axis=0)
    b = steiner_continuous(f.transpose(), 0.3, axis=-1).transpose()
    np.testing.assert_array_equal(a.samples, b.samples)


def test_thread_count_does_not_change_output(monkeypatch):
    f = fx.two_cones(65)
    monkeypatch.setenv("REARRANGE_THREADS", "1")
    a = steiner_continuous(f, 0.5)
    monkeypatch.setenv("REARRANGE_THREADS", "3")
    b = steiner_continuous(f, 0.5)
    np.testing.assert_array_equal(a.samples, b.samples)
