import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rearrange import fixtures as fx
from rearrange.energies import KernelSpec, gagliardo
from rearrange.height_interp import RadialProfile
from rearrange.symmetrize import TruncationSpec, steiner_continuous, steiner_truncated
from rearrange.thinfilm import (
    barenblatt_exponents,
    descent_experiment,
    explicit_solution,
    kappa,
    stationary_residual,
)


def test_kappa_values():
    assert kappa(0.5, 1) == 1.5
    assert kappa(0.0, 1) == pytest.approx(1.0)
    assert kappa(1e-9, 1) == pytest.approx(1.0, abs=1e-8)
    s = np.linspace(0.0, 0.99, 400)
    vals = np.array([kappa(x, 1) for x in s])
    assert np.max(np.abs(np.diff(vals))) < 0.05
    with pytest.raises(ValueError):
        kappa(1.0, 1)


@pytest.mark.parametrize("lam, s, n", [(1.0, 0.25, 1), (2.0, 0.45, 1), (0.5, 0.3, 2)])
def test_explicit_solution(lam, s, n):
    v = explicit_solution(lam, s, n)
    assert v.profile.values[0] == pytest.approx(1.0 / (lam**s * kappa(s, n)), rel=1e-14)
    R = lam**-0.5
    dr = v.profile.r[1]
    inside = v.profile.r[v.profile.values > 0]
    assert abs(inside.max() - R) <= dr * (1 + 1e-9)
    w = explicit_solution(2 * lam, s, n)
    assert w.support_radius == pytest.approx(R / math.sqrt(2))
    assert w.peak == pytest.approx(v.peak * 2.0**-s)


@pytest.mark.parametrize("s", [0.25, 0.45])
@pytest.mark.parametrize("n", [1, 2])
def test_stationary_fit(s, n):
    v = explicit_solution(1.0, s, n)
    fit = stationary_residual(v)
    assert fit.residual <= 1e-2
    # (1 - r^2)^(1+s) / kappa has fractional Laplacian 1 - (1 + 2s/n) r^2
    assert fit.a == pytest.approx(1.0, rel=1e-6)
    assert fit.b == pytest.approx(-(1.0 + 2.0 * s / n), rel=1e-6)
    assert fit.beta_implied == pytest.approx(-4.0 * fit.b)


def test_perturbed_profile_is_not_stationary():
    s = 0.25
    v = explicit_solution(1.0, s, 1)
    r = v.profile.r
    bump = 0.05 * np.exp(-(((r - 0.3) / 0.1) ** 2))
    bump[-1] = 0.0
    fit = stationary_residual(v)
    pfit = stationary_residual(RadialProfile(1, r, v.profile.values + bump), s)
    assert pfit.residual > 10 * fit.residual
    with pytest.raises(ValueError):
        stationary_residual(v.profile)


def test_barenblatt_examples():
    e = barenblatt_exponents(1, 0.5)
    assert e.alpha == pytest.approx(0.25) and e.beta == pytest.approx(0.25)
    e = barenblatt_exponents(2, 0.25)
    assert e.alpha == pytest.approx(4 / 9) and e.beta == pytest.approx(2 / 9)


@given(st.sampled_from([1, 2]), st.floats(0.01, 0.99))
def test_barenblatt_alpha_is_n_beta(n, s):
    e = barenblatt_exponents(n, s)
    assert e.alpha == pytest.approx(n * e.beta)


def test_descent_shifted_and_two_bump():
    s, beta = 0.3, 1.0
    taus = np.linspace(0.0, 0.02, 5)
    trunc = TruncationSpec(0.1)
    shifted = descent_experiment(fx.stationary(s, grid_n=513, shift=0.3), s, beta, trunc, taus)
    assert shifted.strictly_decreasing
    two = descent_experiment(fx.two_bump(513), s, beta, trunc, taus)
    assert two.strictly_decreasing
    assert np.all(-np.diff(two.energies) > 3 * np.maximum(two.errors[:-1], two.errors[1:]))
    for rep in (shifted, two):
        assert all(rep.support_preserved)
        # each connected component of the support keeps its mass
        assert rep.mass_errors.max() <= 1e-3


def test_descent_centered_is_flat():
    s = 0.3
    taus = np.linspace(0.0, 0.02, 5)
    rep = descent_experiment(fx.stationary(s, grid_n=513), s, 1.0, TruncationSpec(0.1), taus)
    E = rep.energies[0]
    assert rep.max_relative_change() <= 1e-4
    assert abs(rep.slope()) <= 1e-3 * E


def test_truncation_gap_shrinks_with_h0():
    s, tau = 0.3, 0.02
    v = fx.two_bump(1025)
    spec = KernelSpec(s)
    plain = gagliardo(steiner_continuous(v, tau), spec).value
    gaps = []
    for h0 in (0.2, 0.1, 0.05):
        trunc = gagliardo(steiner_truncated(v, tau, TruncationSpec(h0)), spec).value
        gaps.append(abs(trunc - plain) / tau)
    assert gaps[0] > gaps[1] > gaps[2]
