"""Norm duality, gradient sets, and one-sided pairings on the normed plane."""

import math

import numpy as np
import pytest

from mmscalc.fields import BumpField, LinearField
from mmscalc.norms import (
    DEFAULT_EPS_GRID,
    d_pm_batch,
    d_pm_via_difference_quotient,
    d_pm_via_gradient_set,
    dual_norm,
    duality_map_inverse,
    laplacian_interval_normed,
    lp_norm,
    norm_from_string,
    norm_to_string,
    polygon_norm,
    primal_norm,
    quotient_sequence,
    young_gap,
)

from oracles import HAND_VALUES

DIAMOND = polygon_norm([(1, 0), (0, 1), (-1, 0), (0, -1)])
HEXAGON = polygon_norm([(1, 0), (0.5, 1), (-0.5, 1), (-1, 0), (-0.5, -1), (0.5, -1)])
NORM_FAMILY = [
    lp_norm(1, 2),
    lp_norm(1.5, 2),
    lp_norm(2, 2),
    lp_norm(3, 2),
    lp_norm(math.inf, 2),
    DIAMOND,
    HEXAGON,
]


def test_lp_primal_values():
    v = np.array([3.0, -4.0])
    assert primal_norm(lp_norm(2, 2), v) == pytest.approx(5.0, abs=1e-15)
    assert primal_norm(lp_norm(1, 2), v) == pytest.approx(7.0, abs=1e-15)
    assert primal_norm(lp_norm(math.inf, 2), v) == pytest.approx(4.0, abs=1e-15)


def test_dual_of_lp_is_lq():
    rng = np.random.default_rng(7)
    for p in (1.0, 1.25, 2.0, 4.0, math.inf):
        norm = lp_norm(p, 2)
        q = 1.0 if math.isinf(p) else (math.inf if p == 1.0 else p / (p - 1.0))
        for w in rng.normal(size=(20, 2)):
            expect = primal_norm(lp_norm(q, 2), w)
            assert dual_norm(norm, w) == pytest.approx(expect, rel=1e-13)


def test_dual_norm_by_support_function():
    # brute-force sup over a fine angular sweep of the unit sphere
    rng = np.random.default_rng(3)
    th = np.linspace(0, 2 * np.pi, 20001)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    for norm in NORM_FAMILY:
        lens = np.array([primal_norm(norm, u) for u in dirs])
        sphere = dirs / lens[:, None]
        for w in rng.normal(size=(5, 2)):
            # the sweep only lower-bounds the sup; missing a ball vertex by
            # half a grid angle costs O(angle) at a kink
            brute = float(np.max(sphere @ w))
            ns = dual_norm(norm, w)
            assert brute - 1e-12 <= ns <= brute * (1.0 + 1e-3)


def test_diamond_norm_is_l1():
    rng = np.random.default_rng(11)
    for v in rng.normal(size=(25, 2)):
        assert primal_norm(DIAMOND, v) == pytest.approx(primal_norm(lp_norm(1, 2), v), rel=1e-13)
        assert dual_norm(DIAMOND, v) == pytest.approx(dual_norm(lp_norm(1, 2), v), rel=1e-13)


def test_norm_string_round_trip():
    for norm in NORM_FAMILY:
        text = norm_to_string(norm)
        back = norm_from_string(text)
        assert back.kind == norm.kind
        if norm.kind == "p":
            assert back.p == norm.p
        else:
            assert back.vertices == norm.vertices
    with pytest.raises(ValueError):
        norm_from_string("ellipse:1,2")


def test_polygon_norm_rejects_asymmetric():
    with pytest.raises(ValueError):
        polygon_norm([(1, 0), (0, 1), (-1, 0), (0.1, -1)])


def test_gradient_set_hand_value():
    gs = duality_map_inverse(lp_norm(math.inf, 2), (1.0, 0.0))
    got = {tuple(np.round(v, 12)) for v in gs.vertices}
    assert got == set(HAND_VALUES["linf_gradient_set_x1"])
    assert gs.dual_value == pytest.approx(1.0)
    assert not gs.is_singleton


def test_gradient_set_vertex_identities():
    rng = np.random.default_rng(5)
    for norm in NORM_FAMILY:
        for w in rng.normal(size=(10, 2)):
            ns = dual_norm(norm, w)
            gs = duality_map_inverse(norm, w)
            for v in gs.vertex_array():
                assert float(w @ v) == pytest.approx(ns ** 2, rel=1e-10)
                assert primal_norm(norm, v) == pytest.approx(ns, rel=1e-10)
                assert young_gap(norm, w, v) == pytest.approx(0.0, abs=1e-10 * (1 + ns ** 2))


def test_gradient_set_zero_covector():
    gs = duality_map_inverse(lp_norm(2, 2), (0.0, 0.0))
    assert gs.is_singleton
    assert np.allclose(gs.vertex_array(), 0.0)


def test_young_gap_nonnegative_random():
    rng = np.random.default_rng(9)
    for norm in NORM_FAMILY:
        w = rng.normal(size=(50, 2))
        v = rng.normal(size=(50, 2))
        for a, b in zip(w, v):
            assert young_gap(norm, a, b) >= -1e-12


def test_linf_dpm_hand_formula():
    norm = lp_norm(math.inf, 2)
    rng = np.random.default_rng(13)
    for a, b in rng.normal(size=(30, 2)):
        dplus = d_pm_via_gradient_set(norm, (a, b), (1.0, 0.0), sign=+1)
        dminus = d_pm_via_gradient_set(norm, (a, b), (1.0, 0.0), sign=-1)
        eplus, eminus = HAND_VALUES["linf_dpm"](a, b)
        assert dplus == pytest.approx(eplus, abs=1e-13)
        assert dminus == pytest.approx(eminus, abs=1e-13)


def test_dpm_two_routes_agree_seeded():
    # gradient-set pairing vs cancellation-free difference quotients
    rng = np.random.default_rng(2024)
    worst = 0.0
    for norm in NORM_FAMILY:
        for _ in range(12):
            Df = rng.normal(size=2)
            Dg = rng.normal(size=2)
            for sign in (+1, -1):
                a = d_pm_via_gradient_set(norm, Df, Dg, sign=sign)
                b = d_pm_via_difference_quotient(norm, Df, Dg, sign=sign)
                worst = max(worst, abs(a - b))
    assert worst <= 1e-9


def test_dpm_batch_matches_scalar_route():
    rng = np.random.default_rng(31)
    Df = rng.normal(size=(40, 2))
    Dg = rng.normal(size=(40, 2))
    for norm in NORM_FAMILY:
        dplus, dminus = d_pm_batch(norm, Df, Dg)
        for k in range(len(Df)):
            assert dplus[k] == pytest.approx(
                d_pm_via_gradient_set(norm, Df[k], Dg[k], sign=+1), abs=1e-11)
            assert dminus[k] == pytest.approx(
                d_pm_via_gradient_set(norm, Df[k], Dg[k], sign=-1), abs=1e-11)


def test_dpm_batch_zero_rows():
    dplus, dminus = d_pm_batch(lp_norm(math.inf, 2), [[1.0, 2.0]], [[0.0, 0.0]])
    assert dplus[0] == 0.0 and dminus[0] == 0.0


def test_quotient_sequence_monotone():
    norm = lp_norm(math.inf, 2)
    seq = quotient_sequence(norm, (0.7, -0.3), (1.0, 0.2), sign=+1)
    assert len(seq) == len(DEFAULT_EPS_GRID)
    assert np.all(np.diff(seq) <= 1e-12)
    seq = quotient_sequence(norm, (0.7, -0.3), (1.0, 0.2), sign=-1)
    assert np.all(np.diff(seq) >= -1e-12)
    with pytest.raises(ValueError):
        quotient_sequence(norm, (1, 0), (0, 1), eps_grid=[1e-3, 1e-2])


def test_dpm_linear_in_f_direction():
    # D+(af1 + bf2) <= a D+f1 + b D+f2 for a, b >= 0 with common g, and
    # equality when the gradient set is a singleton
    norm = lp_norm(1.5, 2)
    Dg = np.array([0.4, -1.1])
    Df1 = np.array([1.0, 0.3])
    Df2 = np.array([-0.2, 0.8])
    s = d_pm_via_gradient_set(norm, 2.0 * Df1 + 3.0 * Df2, Dg, sign=+1)
    s1 = d_pm_via_gradient_set(norm, Df1, Dg, sign=+1)
    s2 = d_pm_via_gradient_set(norm, Df2, Dg, sign=+1)
    assert s == pytest.approx(2.0 * s1 + 3.0 * s2, rel=1e-12)


def test_laplacian_interval_normed_euclidean_collapses():
    # Euclidean plane: one-sided pairings coincide, interval has zero width,
    # and the odd integrand over a symmetric box integrates to zero
    f = BumpField(center=(0.0, 0.0), radius=0.5)
    g = LinearField(a=(0.0, 1.0))
    lo, hi = laplacian_interval_normed(lp_norm(2, 2), g, f, -1.0, 1.0, 60)
    assert hi - lo <= 1e-12
    assert abs(lo) <= 1e-12


def test_laplacian_interval_normed_support_guard():
    f = BumpField(center=(0.0, 0.0), radius=1.2)
    g = LinearField(a=(1.0, 0.0))
    with pytest.raises(ValueError):
        laplacian_interval_normed(lp_norm(2, 2), g, f, -1.0, 1.0, 40)
