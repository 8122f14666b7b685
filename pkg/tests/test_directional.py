"""One-sided derivatives of the slope and their calculus identities."""

import numpy as np
import pytest

from mmscalc.directional import (
    chain_rule_check,
    d_pm_exact,
    d_pm_sweep,
    leibniz_check,
    linearity_check,
    strict_convexity_probe,
)
from mmscalc.fields import PiecewiseAffine, SmoothFn, abs_fn, exp_fn, square_fn
from mmscalc.spaces import build_cycle_graph, build_euclidean_grid, from_distance_matrix

import oracles


def _random_space(rng, n=9):
    pts = rng.uniform(-1.0, 1.0, size=(n, 2))
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    return from_distance_matrix(D, weights=np.ones(n), h=0.9)


def test_dpm_exact_matches_rational_oracle_seeded():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(12):
        space = _random_space(rng)
        f = rng.standard_normal(space.n)
        g = rng.standard_normal(space.n)
        res = d_pm_exact(space, f, g, p=2.0)
        D = space.dense_dist()
        for i in range(space.n):
            dp, dm = oracles.dpm_exact_rational(D, space.h, f, g, i)
            worst = max(worst, abs(res.dplus[i] - float(dp)), abs(res.dminus[i] - float(dm)))
    assert worst <= 1e-11


def test_dpm_gap_nonnegative_and_p_scaling():
    rng = np.random.default_rng(100)
    space = _random_space(rng, n=12)
    f = rng.standard_normal(space.n)
    g = rng.standard_normal(space.n)
    base = d_pm_exact(space, f, g, p=2.0)
    assert np.min(base.gap) >= -1e-13
    for p in (1.5, 3.0, 4.0):
        res = d_pm_exact(space, f, g, p=p)
        scaled = base.slope ** (p - 2.0)
        live = base.slope > 1e-12
        assert np.max(np.abs(res.dplus - scaled * base.dplus)[live]) <= 1e-10
        assert np.max(np.abs(res.dminus - scaled * base.dminus)[live]) <= 1e-10


def test_dpm_sweep_encloses_exact_values():
    rng = np.random.default_rng(101)
    space = _random_space(rng, n=10)
    f = rng.standard_normal(space.n)
    g = rng.standard_normal(space.n)
    exact = d_pm_exact(space, f, g)
    sweep = d_pm_sweep(space, f, g, keep_sequences=True)
    # final quotients land on the one-sided values for piecewise-affine data
    assert np.max(np.abs(sweep["dplus"] - exact.dplus)) <= 1e-9
    assert np.max(np.abs(sweep["dminus"] - exact.dminus)) <= 1e-9
    assert sweep["monotone_violation"] <= 1e-10
    # every intermediate quotient stays outside the limit interval
    assert np.all(sweep["q_plus"] >= exact.dplus[None, :] - 1e-10)
    assert np.all(sweep["q_minus"] <= exact.dminus[None, :] + 1e-10)


def test_dpm_sweep_rejects_bad_grid():
    space = build_cycle_graph(5)
    f = np.arange(5.0)
    with pytest.raises(ValueError):
        d_pm_sweep(space, f, f, eps_grid=[1e-4, 1e-3])


def test_dpm_zero_slope_point():
    # constant g has zero slope; convention puts both one-sided values at 0
    space = build_cycle_graph(6)
    f = np.sin(np.arange(6.0))
    res = d_pm_exact(space, f, np.zeros(6))
    assert np.all(res.dplus == 0.0)
    assert np.all(res.dminus == 0.0)


def test_chain_rule_inner_piecewise_affine_exact():
    rng = np.random.default_rng(102)
    space = build_euclidean_grid([9, 9], spacing=0.12)
    f = np.asarray(space.points @ np.array([0.7, -0.4]))
    g = rng.standard_normal(space.n) * 0.1 + space.points @ np.array([1.0, 0.2])
    rep = chain_rule_check(space, f, g, abs_fn(), side="inner")
    assert rep["mode"] == "exact"
    assert rep["ok"]
    assert rep["max_err_plus"] <= 1e-9 * rep["scale"]
    assert rep["checked_points"] + rep["excluded_points"] == space.n


def test_chain_rule_outer_piecewise_affine_exact():
    rng = np.random.default_rng(103)
    space = build_euclidean_grid([8, 8], spacing=0.12)
    f = rng.standard_normal(space.n)
    g = space.points @ np.array([0.5, 1.0])
    phi = PiecewiseAffine(breaks=[-0.3, 0.4], slopes=[0.5, 2.0, -1.0], y0=0.0)
    rep = chain_rule_check(space, f, g, phi, side="outer")
    assert rep["mode"] == "exact"
    assert rep["ok"]


def test_chain_rule_smooth_residual_shrinks_with_h():
    # smooth phi only satisfies the rule up to O(h); check first-order decay
    errs = []
    for spacing in (0.2, 0.1, 0.05):
        space = build_euclidean_grid([int(1.6 / spacing) + 1] * 2, spacing)
        f = np.sin(space.points @ np.array([1.0, 0.5]))
        g = space.points @ np.array([1.0, -0.3])
        phi = SmoothFn(np.tanh, lambda x: 1.0 / np.cosh(x) ** 2,
                       lambda x: -2.0 * np.tanh(x) / np.cosh(x) ** 2, "tanh")
        rep = chain_rule_check(space, f, g, phi, side="inner")
        assert rep["mode"] == "residual"
        errs.append(max(rep["max_err_plus"], rep["max_err_minus"]))
    assert errs[2] <= 0.6 * errs[0]


def test_chain_rule_outer_p_form_coefficient():
    # outer composition at p != 2 picks up |phi'|^(p-2) phi'; exact for
    # affine pieces away from the breakpoint
    space = build_euclidean_grid([7, 7], spacing=0.1)
    g = space.points @ np.array([0.3, 1.0])
    f = np.cos(space.points @ np.array([2.0, 0.0]))
    phi = PiecewiseAffine(breaks=[0.0], slopes=[3.0, -2.0], y0=0.0)
    rep = chain_rule_check(space, f, g, phi, side="outer", p=3.0)
    assert rep["mode"] == "exact"
    assert rep["ok"]
    assert rep["excluded_points"] < space.n


def test_chain_rule_smooth_square_reports_residual():
    space = build_euclidean_grid([7, 7], spacing=0.1)
    g = 2.0 + space.points @ np.array([0.3, 0.1])
    f = np.cos(space.points @ np.array([2.0, 0.0]))
    rep = chain_rule_check(space, f, g, square_fn(), side="outer", p=3.0)
    assert rep["mode"] == "residual"
    assert rep["ok"] is None
    assert rep["checked_points"] == space.n


def test_leibniz_envelope_random():
    rng = np.random.default_rng(104)
    space = _random_space(rng, n=11)
    f1 = rng.standard_normal(space.n)
    f2 = rng.standard_normal(space.n)
    g = rng.standard_normal(space.n)
    rep = leibniz_check(space, f1, f2, g)
    assert rep["ok"]
    assert rep["min_slack_upper"] >= -1e-10 * rep["scale"]
    assert rep["min_slack_lower"] >= -1e-10 * rep["scale"]


def test_leibniz_correction_vanishes_with_h():
    # the product-increment correction is O(h); the equality version of the
    # rule also holds to O(h), but only where the active quotient is unique.
    # Hull corners straddle two signs forever, so measure the residual on
    # the interior only.
    corr = []
    resid_int = []
    for spacing in (0.2, 0.05):
        space = build_euclidean_grid([int(round(1.2 / spacing)) + 1] * 2, spacing)
        f1 = np.sin(space.points @ np.array([1.0, 0.0]))
        f2 = np.cos(space.points @ np.array([0.0, 1.0]))
        g = space.points @ np.array([1.0, 1.0])
        rep = leibniz_check(space, f1, f2, g)
        assert rep["ok"]
        corr.append(rep["max_correction"])
        b1 = d_pm_exact(space, f1, g)
        b2 = d_pm_exact(space, f2, g)
        lhs = d_pm_exact(space, f1 * f2, g)
        t_up = (np.where(f1 >= 0, f1 * b2.dplus, f1 * b2.dminus)
                + np.where(f2 >= 0, f2 * b1.dplus, f2 * b1.dminus))
        inner = space.boundary_clearance() >= space.h
        resid_int.append(float(np.max(np.abs(lhs.dplus - t_up)[inner])))
    assert corr[1] <= 0.5 * corr[0]
    assert resid_int[1] <= 0.5 * resid_int[0]


def test_linearity_check_identities():
    rng = np.random.default_rng(105)
    space = _random_space(rng, n=10)
    f1 = rng.standard_normal(space.n)
    f2 = rng.standard_normal(space.n)
    g = rng.standard_normal(space.n)
    rep = linearity_check(space, f1, f2, g, alpha=1.7, beta=-0.6)
    assert rep["homogeneity_err"] <= 1e-12
    assert rep["min_subadd_slack"] >= -1e-10
    assert rep["min_superadd_slack"] >= -1e-10
    assert rep["singleton_linearity_err"] <= 1e-10
    assert rep["ok"]


def test_strict_convexity_probe_reports():
    grid = build_euclidean_grid([8, 8], spacing=0.13)
    probe = strict_convexity_probe(grid, sample_count=6, seed=1)
    assert probe["samples"] == 6
    assert probe["max_gap"] >= 0.0
    assert 0.0 <= probe["multi_fraction_mean"] <= 1.0


def test_tied_active_set_opens_a_gap():
    # node 0 of C4 sees |increment| 1 toward both neighbors; the one-sided
    # values then split according to the f increments along each witness
    space = build_cycle_graph(4)
    g = np.array([0.0, 1.0, 0.0, 1.0])
    f = np.array([0.0, 2.0, 0.0, 5.0])
    res = d_pm_exact(space, f, g)
    assert res.slope[0] == pytest.approx(1.0)
    assert res.dplus[0] == pytest.approx(5.0)
    assert res.dminus[0] == pytest.approx(2.0)


def test_exp_fn_derivative_used_by_chain_rule():
    phi = exp_fn(0.5)
    assert phi(np.array([0.0]))[0] == pytest.approx(1.0)
    assert phi.deriv(np.array([2.0]))[0] == pytest.approx(0.5 * np.exp(1.0))
