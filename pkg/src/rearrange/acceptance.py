"""Acceptance suite: one function per criterion, each returning a JSON-ready record.

Every record has ``id``, ``title``, ``passed``, ``metrics`` and
``thresholds``.  Randomized checks draw from ``numpy.random.Philox`` seeded
with the suite seed and the criterion id, so each criterion is
reproducible on its own.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import fixtures
from .energies import KernelSpec, gagliardo, local_seminorm
from .good_funcs import (
    bracket_values,
    case_lower_bound,
    derivative_from_levels,
    derivative_local,
    derivative_nonlocal,
    energy_from_levels,
    level_tables,
)
from .height_interp import (
    RadialProfile,
    convexity_curve,
    height_function,
    potential_convexity,
    reconstruct,
    w1p_from_height,
)
from .interval_sets import IntervalUnion, m_tau, next_merge_time
from .symmetrize import TruncationSpec, lipschitz_report, steiner_continuous, steiner_truncated
from .thinfilm import descent_experiment, explicit_solution, kappa, stationary_residual

__all__ = ["CRITERIA", "run_suite", "rng_for"]

PRNG_NAME = "numpy Philox4x64 (counter-based), key = (seed, criterion id)"


def rng_for(seed: int, criterion: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, criterion]))


def _record(cid, title, passed, metrics, thresholds):
    return {
        "id": cid,
        "title": title,
        "passed": bool(passed),
        "metrics": metrics,
        "thresholds": thresholds,
    }


# ------------------------------------------------------------ 1


def random_union(rng: np.random.Generator, max_pieces: int = 8, half: float = 5.0) -> IntervalUnion:
    k = int(rng.integers(1, max_pieces + 1))
    pts = np.sort(rng.uniform(-half, half, 2 * k))
    return IntervalUnion(zip(pts[0::2], pts[1::2]))


def stepping_merge_time(U: IntervalUnion, dt: float = 1e-6) -> float | None:
    """First contact time on a time lattice of spacing ``dt``.

    Intervals move by ``dt`` per step toward the origin (stopping when
    centered).  Runs of steps in which nothing can change are taken in
    one block, so the result is the first lattice time with a contact.
    """
    left = np.array([a for a, _ in U])
    right = np.array([b for _, b in U])
    if left.size < 2:
        return None
    steps = 0
    while True:
        c = 0.5 * (left + right)
        v = -np.sign(c)
        gaps = left[1:] - right[:-1]
        if np.any(gaps <= 0):
            return steps * dt
        rate = v[:-1] - v[1:]
        if not np.any(rate > 0) and not np.any(v != 0):
            return None
        # steps until a center is within one step of 0 or a gap can close
        cand = [np.floor(np.abs(c[v != 0]) / dt) - 1]
        closing = rate > 0
        cand.append(np.floor(gaps[closing] / (rate[closing] * dt)) - 1)
        flat = np.concatenate([x.ravel() for x in cand])
        if flat.size == 0:
            return None
        block = int(max(1, flat.min()))
        move = block * dt
        # centers never overshoot 0
        shift = v * np.minimum(move, np.abs(c))
        left = left + shift
        right = right + shift
        steps += block


def criterion_1(seed: int) -> dict:
    rng = rng_for(seed, 1)
    worst_semigroup = worst_measure = worst_merge = 0.0
    merges_checked = 0
    for _ in range(1000):
        U = random_union(rng)
        a, b = rng.uniform(0, 3, 2)
        A = m_tau(m_tau(U, a), b)
        B = m_tau(U, a + b)
        sym = A.measure() + B.measure() - 2 * A.intersect(B).measure()
        worst_semigroup = max(worst_semigroup, sym)
        worst_measure = max(worst_measure, abs(m_tau(U, a).measure() - U.measure()))
        event = next_merge_time(U)
        oracle = stepping_merge_time(U)
        if event is None or oracle is None:
            if (event is None) != (oracle is None):
                worst_merge = math.inf
            continue
        merges_checked += 1
        worst_merge = max(worst_merge, abs(event.time - oracle))
    ok = worst_semigroup <= 1e-12 and worst_measure <= 1e-12 and worst_merge <= 1e-5
    return _record(
        1,
        "interval motion: semigroup, measure, merge times",
        ok,
        {
            "unions": 1000,
            "semigroup_symmetric_difference": worst_semigroup,
            "measure_error": worst_measure,
            "merge_time_error": worst_merge,
            "merges_checked": merges_checked,
        },
        {"semigroup": 1e-12, "measure": 1e-12, "merge_time": 1e-5, "oracle_dt": 1e-6},
    )


# ------------------------------------------------------------ 2


LP_FIXTURES: dict[str, Callable] = {
    "triangle": fixtures.triangle,
    "shifted-triangle": fixtures.shifted_triangle,
    "two-bump": fixtures.two_bump,
    "three-bump": fixtures.three_bump,
    "asymmetric-peak": fixtures.asymmetric_peak,
}
LP_TAUS = (0.1, 0.25, 0.5, 1.0, 2.0)


def _lp_errors(grid_n: int, n_heights: int) -> dict:
    errs = {}
    for name, make in LP_FIXTURES.items():
        f = make(grid_n=grid_n)
        for tau in LP_TAUS:
            g = steiner_continuous(f, tau, n_heights=n_heights)
            for p in (1, 2, 5):
                errs[(name, tau, p)] = abs(g.lp_norm(p) / f.lp_norm(p) - 1.0)
    return errs


def criterion_2(seed: int) -> dict:
    coarse = _lp_errors(1025, 512)
    fine = _lp_errors(2049, 1024)
    worst = max(coarse.values())
    ratio = sum(coarse.values()) / max(sum(fine.values()), 1e-300)
    ok = worst <= 1e-3 and ratio >= 2.0
    return _record(
        2,
        "L^p norms preserved by continuous symmetrization",
        ok,
        {
            "cases": len(coarse),
            "max_relative_error": worst,
            "max_relative_error_doubled": max(fine.values()),
            "total_error_ratio_under_doubling": ratio,
        },
        {"max_relative_error": 1e-3, "min_ratio_under_doubling": 2.0, "grid": [1025, 512], "doubled": [2049, 1024]},
    )


# ------------------------------------------------------------ 3


def criterion_3(seed: int) -> dict:
    f = fixtures.two_bump(1025)
    taus = np.linspace(0.0, 0.2, 11)
    members = [steiner_continuous(f, t) for t in taus]
    runs = []
    ok = True
    for s in (0.25, 0.45, 0.75):
        for p in (1.5, 2.0, 3.0):
            reps = [gagliardo(g, KernelSpec(s, p)) for g in members]
            vals = np.array([r.value for r in reps])
            errs = np.array([r.error_estimate for r in reps])
            dec = -np.diff(vals)
            margin = float(np.min(dec / (3.0 * np.maximum(errs[:-1], errs[1:]))))
            slope = float(np.polyfit(taus, vals, 1)[0])
            passed = bool(np.all(dec > 0) and margin > 1.0 and slope < 0)
            ok &= passed
            runs.append({"s": s, "p": p, "min_decrement": float(dec.min()), "decrement_over_3err": margin, "slope": slope, "passed": passed})
    return _record(
        3,
        "strict decrease of [f^tau]^p for a two-bump function",
        ok,
        {"runs": runs, "min_decrement_over_3err": min(r["decrement_over_3err"] for r in runs)},
        {"decrement_over_3err": 1.0, "slope": 0.0, "tau_points": 11},
    )


# ------------------------------------------------------------ 4


def criterion_4(seed: int) -> dict:
    f = fixtures.indicator(2048)
    rep = gagliardo(f, KernelSpec(0.25, 2.0))
    exact = 4.0 / (0.5 * (1 - 0.5))
    rel = abs(rep.value - exact) / exact
    cell = gagliardo(f, KernelSpec(0.25, 2.0), interpolant="constant")
    return _record(
        4,
        "H^(1/4) seminorm of the indicator of (0,1)",
        rel <= 0.02,
        {"value": rep.value, "closed_form": exact, "relative_error": rel, "cell_constant_value": cell.value},
        {"relative_error": 0.02, "grid_n": 2048},
    )


# ------------------------------------------------------------ 5


def _fd_derivative(profile, spec, dt=1e-3, n_heights=256):
    tabs = level_tables(profile, n_heights)
    lp = profile.lp_norm_p(spec.p)
    plus = energy_from_levels([t.moved(dt) for t in tabs], spec, lp)
    minus = energy_from_levels([t.moved(-dt) for t in tabs], spec, lp)
    return (plus - minus) / (2 * dt), derivative_from_levels(tabs, spec)


def random_quadruples(rng, case: str, count: int, min_len: float = 0.05):
    """Admissible quadruples (center of x right of center of y) of one geometric case."""
    L1 = rng.uniform(min_len, 1.5, count)
    L2 = rng.uniform(min_len, 1.5, count)
    base = rng.uniform(-1.0, 1.0, count)
    if case == "separated":
        gap = rng.uniform(0.0, 1.0, count)
        ym = base - L2
        yp = base
        xm = base + gap
        xp = xm + L1
    elif case == "embedded":
        big, small = np.maximum(L1, L2) + min_len, np.minimum(L1, L2)
        lo = base
        hi = base + big
        off = rng.uniform(0.0, 1.0, count) * (big - small)
        inner_m = lo + off
        inner_p = inner_m + small
        # pick which interval is the outer one; the x center must be to the right
        outer_is_x = rng.random(count) < 0.5
        xm = np.where(outer_is_x, lo, inner_m)
        xp = np.where(outer_is_x, hi, inner_p)
        ym = np.where(outer_is_x, inner_m, lo)
        yp = np.where(outer_is_x, inner_p, hi)
        swap = (xm + xp) <= (ym + yp)
        # reflecting through the midpoint of the outer interval swaps the center order
        mid = 0.5 * (lo + hi)
        xm, xp, ym, yp = (
            np.where(swap, 2 * mid - xp, xm),
            np.where(swap, 2 * mid - xm, xp),
            np.where(swap, 2 * mid - yp, ym),
            np.where(swap, 2 * mid - ym, yp),
        )
    else:  # overlapping: y- < x- < y+ < x+
        ym = base
        yp = base + L2
        xm = ym + rng.uniform(0.05, 0.95, count) * L2
        xp = yp + rng.uniform(min_len, 1.5, count)
    keep = (xm + xp) - (ym + yp) > 1e-9
    return xm[keep], xp[keep], ym[keep], yp[keep]


def criterion_5(seed: int) -> dict:
    spec = KernelSpec(s=0.3, p=2.0, eps=1e-2)
    cases = {
        "two-bump": fixtures.two_bump_profile(),
        "three-bump": fixtures.three_bump_profile(),
        "asymmetric-peak": fixtures.asymmetric_peak_profile(),
    }
    fd = {}
    worst = 0.0
    for name, g in cases.items():
        diff, value = _fd_derivative(g, spec)
        rel = abs(value - diff) / abs(diff)
        worst = max(worst, rel)
        fd[name] = {"level_set": value, "finite_difference": diff, "relative_difference": rel}
    rng = rng_for(seed, 5)
    violations = 0
    bound_violations = 0
    checked = 0
    per_case = {}
    for case in ("embedded", "separated", "overlapping"):
        xm, xp, ym, yp = random_quadruples(rng, case, 10000)
        vals = bracket_values(xm, xp, ym, yp, spec, r_max=8.0)
        bad = int(np.count_nonzero(~(vals > 0)))
        bounds = np.array([case_lower_bound(*q, spec) for q in zip(xm, xp, ym, yp)])
        bbad = int(np.count_nonzero(vals < bounds * (1 - 1e-9)))
        violations += bad
        bound_violations += bbad
        checked += xm.size
        per_case[case] = {"count": int(xm.size), "sign_violations": bad, "bound_violations": bbad, "min_value": float(vals.min())}
    ok = worst <= 0.05 and violations == 0 and bound_violations == 0
    return _record(
        5,
        "nonlocal derivative formula and bracket positivity",
        ok,
        {"finite_difference": fd, "max_relative_difference": worst, "quadruples": checked, "brackets": per_case},
        {"relative_difference": 0.05, "violations": 0, "fd_step": 1e-3, "eps": 1e-2, "s": 0.3, "p": 2.0},
    )


# ------------------------------------------------------------ 6


def criterion_6(seed: int) -> dict:
    g = fixtures.two_cones_profile(20)
    spec = KernelSpec(s=0.3, p=2.0, eps=1e-2)
    value, err = derivative_nonlocal(g, spec, n_heights=96, full_output=True)
    local = derivative_local(g, 2.0, 0.5, full_output=True)
    ok = abs(local["value"]) <= 1e-8 * local["scale"] and value < 0 and -value > 3 * err
    return _record(
        6,
        "two-cone example: local derivative zero, nonlocal negative",
        ok,
        {
            "local_derivative": local["value"],
            "local_scale": local["scale"],
            "nonlocal_derivative": value,
            "nonlocal_error_estimate": err,
        },
        {"local_relative": 1e-8, "nonlocal_margin": 3.0, "eps_speed": 0.5},
    )


# ------------------------------------------------------------ 7


def criterion_7(seed: int) -> dict:
    f = fixtures.triangle_radial()
    H = height_function(f)
    closed = 1.0 - np.sqrt(1.0 - H.m)
    h_err = float(np.max(np.abs(H.H - closed)))
    rec = reconstruct(H)
    rt_err = float(np.max(np.abs(rec(f.r) - f.values)))
    slope0 = float(H.dH[0])
    ok = h_err <= 1e-6 and rt_err <= 1e-3 and abs(slope0 - 0.5) <= 1e-3
    return _record(
        7,
        "height function of the triangle",
        ok,
        {"closed_form_error": h_err, "round_trip_error": rt_err, "H_prime_near_0": slope0},
        {"closed_form": 1e-6, "round_trip": 1e-3, "H_prime_0": 1e-3, "m_samples": H.count},
    )


# ------------------------------------------------------------ 8


def criterion_8(seed: int) -> dict:
    t = np.linspace(0.0, 1.0, 21)
    tri = height_function(fixtures.triangle_radial())
    par = height_function(fixtures.parabola_radial())
    cos = height_function(fixtures.cosine_radial())
    pairs = {"triangle-parabola": (tri, par), "parabola-cosine": (par, cos)}
    out = {}

    hs = []
    ok_a = True
    for s in (0.2, 0.45):
        for name, (A, B) in pairs.items():
            c = convexity_curve(A, B, "hs", t, s=s)
            passed = c.min_second_difference > 0
            ok_a &= passed
            hs.append({"s": s, "pair": name, "min_second_difference": c.min_second_difference, "passed": passed})
    out["a_hs"] = hs

    lp = []
    ok_b = True
    for p in (1.5, 2.0, 3.0):
        c = convexity_curve(tri, par, "lp", t, p=p)
        sd = c.second_differences
        if p == 2.0:
            passed = float(np.max(np.abs(sd))) <= 1e-6 * c.scale
        elif p < 2:
            passed = bool(np.all(sd < 0))
        else:
            passed = bool(np.all(sd > 0))
        ok_b &= passed
        lp.append({"p": p, "min_second_difference": float(sd.min()), "max_second_difference": float(sd.max()), "passed": passed})
    out["b_lp"] = lp

    w1p = []
    ok_c = True
    cone = height_function(fixtures.cone_radial())
    bowl = height_function(fixtures.paraboloid_radial())
    for n, p in ((1, 2.0), (2, 1.5), (2, 2.0)):
        A, B = (tri, par) if n == 1 else (cone, bowl)
        c = convexity_curve(A, B, "w1p", t, p=p)
        passed = c.min_second_difference >= -1e-8 * c.scale
        ok_c &= passed
        w1p.append({"n": n, "p": p, "min_second_difference": c.min_second_difference, "scale": c.scale, "passed": passed})
    out["c_w1p"] = w1p

    formula = w1p_from_height(tri, 2.0)
    direct = local_seminorm(fixtures.triangle(3001, 1.5), 2.0)
    ok_d = abs(formula - 2.0) <= 0.01 * 2.0 and abs(formula - direct) <= 0.01 * direct
    out["d_triangle_w12"] = {"height_formula": formula, "direct": direct, "exact": 2.0}

    V = lambda r: r * r  # noqa: E731
    dV = lambda r: 2.0 * r  # noqa: E731
    curve = convexity_curve(tri, par, "potential", t, V=V)
    dt = t[1] - t[0]
    pot = []
    worst = 0.0
    for k in (5, 10, 15):
        closed = potential_convexity(tri, par, V, dV, t[k])[1]
        fd = curve.second_differences[k - 1] / dt**2
        rel = abs(closed - fd) / abs(closed)
        worst = max(worst, rel)
        pot.append({"t": float(t[k]), "closed_form": closed, "finite_difference": fd, "relative_difference": rel})
    ok_e = worst <= 0.05
    out["e_potential"] = pot

    ok = ok_a and ok_b and ok_c and ok_d and ok_e
    out["parts_passed"] = {"a": ok_a, "b": ok_b, "c": ok_c, "d": ok_d, "e": ok_e}
    out["min_hs_second_difference"] = min(r["min_second_difference"] for r in hs)
    out["w12_height_formula"] = formula
    out["potential_max_relative_difference"] = worst
    return _record(
        8,
        "convexity along height interpolation",
        ok,
        out,
        {"t_points": 21, "lp2_flat": 1e-6, "w1p_convex": -1e-8, "w12_agreement": 0.01, "potential_agreement": 0.05},
    )


# ------------------------------------------------------------ 9


def criterion_9(seed: int) -> dict:
    cases = {
        "two-bump": fixtures.two_bump(1025),
        "asymmetric-peak": fixtures.asymmetric_peak(1025),
        "two-cones": fixtures.two_cones(129),
    }
    runs = []
    ok = True
    for name, f in cases.items():
        c0 = lipschitz_report(f).c0
        dx = max(f.spacing)
        for tau, h0 in ((0.05, 0.25), (0.1, 0.25), (0.02, 0.1)):
            g = steiner_truncated(f, tau, TruncationSpec(h0))
            support = bool(np.array_equal(g.support(), f.support()))
            sup = float(np.max(np.abs(g.samples - f.samples)))
            lip = lipschitz_report(g).c0
            lip_bound = c0 * h0 / (h0 - c0 * tau)
            passed = support and sup <= tau * c0 + 2 * c0 * dx and lip <= lip_bound * (1 + 1e-6)
            ok &= passed
            runs.append({
                "fixture": name, "tau": tau, "h0": h0, "support_preserved": support,
                "sup_difference": sup, "sup_bound": tau * c0 + 2 * c0 * dx,
                "lipschitz": lip, "lipschitz_bound": lip_bound, "passed": passed,
            })
    summary = {
        "runs": runs,
        "max_sup_over_bound": max(r["sup_difference"] / r["sup_bound"] for r in runs),
        "max_lipschitz_over_bound": max(r["lipschitz"] / r["lipschitz_bound"] for r in runs),
        "all_supports_preserved": all(r["support_preserved"] for r in runs),
    }
    return _record(9, "truncated symmetrization bounds", ok, summary, {"lipschitz_relative_slack": 1e-6})


# ------------------------------------------------------------ 10


def criterion_10(seed: int) -> dict:
    k = kappa(0.5, 1)
    fits = []
    ok = k == 1.5
    for s in (0.25, 0.45):
        v = explicit_solution(1.0, s, 1)
        fit = stationary_residual(v)
        r = v.profile.r
        bump = 0.05 * np.exp(-(((r - 0.3) / 0.1) ** 2))
        bump[-1] = 0.0
        perturbed = RadialProfile(1, r, v.profile.values + bump)
        pfit = stationary_residual(perturbed, s)
        passed = fit.residual <= 1e-2 and pfit.residual > 10 * fit.residual
        ok &= passed
        fits.append({
            "s": s, "residual": fit.residual, "a": fit.a, "b": fit.b,
            "beta_implied": fit.beta_implied, "perturbed_residual": pfit.residual, "passed": passed,
        })
    return _record(10, "explicit stationary profile", ok, {"kappa_half_1d": k, "fits": fits, "max_residual": max(f["residual"] for f in fits),
         "min_contrast": min(f["perturbed_residual"] / f["residual"] for f in fits)}, {"residual": 1e-2, "contrast": 10.0})


# ------------------------------------------------------------ 11


def criterion_11(seed: int) -> dict:
    s, beta = 0.3, 1.0
    taus = np.linspace(0.0, 0.02, 6)
    trunc = TruncationSpec(0.1)
    centered = descent_experiment(fixtures.stationary(s, grid_n=1025), s, beta, trunc, taus)
    shifted = descent_experiment(fixtures.stationary(s, grid_n=1025, shift=0.3), s, beta, trunc, taus)
    two = descent_experiment(fixtures.two_bump(1025), s, beta, trunc, taus)
    E = float(centered.energies[0])
    flat = centered.max_relative_change()
    slope = abs(centered.slope())
    dec_two = -np.diff(two.energies)
    margin = float(np.min(dec_two / (3 * np.maximum(two.errors[:-1], two.errors[1:]))))
    ok = (
        shifted.strictly_decreasing
        and two.strictly_decreasing
        and margin > 1.0
        and flat <= 1e-4
        and slope <= 1e-3 * E
        and all(shifted.support_preserved + two.support_preserved + centered.support_preserved)
    )
    return _record(
        11,
        "energy descent under truncated symmetrization",
        ok,
        {
            "shifted_energies": shifted.energies.tolist(),
            "two_bump_energies": two.energies.tolist(),
            "two_bump_decrement_over_3err": margin,
            "centered_max_relative_change": flat,
            "centered_slope": centered.slope(),
            "centered_energy": E,
            "mass_errors": {
                "centered": float(centered.mass_errors.max()),
                "shifted": float(shifted.mass_errors.max()),
                "two_bump": float(two.mass_errors.max()),
            },
        },
        {"flat": 1e-4, "slope_relative": 1e-3, "decrement_over_3err": 1.0, "h0": 0.1, "s": s, "beta": beta},
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_suite(seed: int, only=None, log=None) -> list[dict]:
    """Run criteria 1-11 (12 is checked by comparing two manifests)."""
    out = []
    for cid, func in CRITERIA.items():
        if only and cid not in only:
            continue
        if log:
            log(f"criterion {cid}")
        out.append(func(seed))
    return out
