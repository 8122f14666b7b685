"""Slope fields, upper gradients, and the quadratic energy forms."""

import numpy as np
import pytest

from mmscalc.slopes import (
    cheeger_energy,
    dirichlet_form,
    local_slope,
    pair_arrays,
    row_max,
    slope_equality_report,
    upper_gradient_check,
)
from mmscalc.spaces import build_cycle_graph, build_euclidean_grid, from_distance_matrix

import oracles


def _random_space(rng, n=14):
    pts = rng.uniform(-1.0, 1.0, size=(n, 2))
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    return from_distance_matrix(D, weights=rng.uniform(0.5, 1.5, size=n), h=0.8)


def test_local_slope_matches_dense_oracle_seeded():
    rng = np.random.default_rng(42)
    for _ in range(10):
        space = _random_space(rng)
        f = rng.normal(size=space.n)
        D = space.dense_dist()
        for kind in ("full", "asc", "desc"):
            got = local_slope(space, f, kind)
            ref = oracles.slope_dense(D, space.h, f, kind)
            assert np.max(np.abs(got - ref)) <= 1e-13


def test_cheeger_energy_matches_dense_oracle():
    rng = np.random.default_rng(43)
    space = _random_space(rng)
    f = rng.normal(size=space.n)
    for p in (1.0, 2.0, 3.5):
        got = cheeger_energy(space, f, p=p)
        ref = oracles.cheeger_dense(space.dense_dist(), space.h, space.weights, f, p)
        assert got == pytest.approx(ref, rel=1e-13)


def test_slope_of_linear_function_on_grid():
    space = build_euclidean_grid([9, 9], spacing=0.1)
    f = space.points @ np.array([1.0, 0.0])
    sl = local_slope(space, f, "full")
    # steepest in-graph quotient of x1 over the 8-stencil is along the axis
    assert np.max(np.abs(sl - 1.0)) <= 1e-12


def test_slope_variants_split_by_sign():
    space = build_cycle_graph(6)
    f = np.zeros(6)
    f[0] = 1.0  # peak at node 0
    asc = local_slope(space, f, "asc")
    desc = local_slope(space, f, "desc")
    assert desc[0] == pytest.approx(1.0)   # only downhill from the peak
    assert asc[0] == 0.0
    assert asc[1] == pytest.approx(1.0)    # uphill toward the peak
    assert np.allclose(local_slope(space, f, "full"), np.maximum(asc, desc))
    with pytest.raises(ValueError):
        local_slope(space, f, "sideways")


def test_row_max_handles_empty_rows():
    vals = np.array([3.0, 1.0, 5.0])
    indptr = np.array([0, 2, 2, 3])
    out = row_max(vals, indptr, fill=-1.0)
    assert out.tolist() == [3.0, -1.0, 5.0]


def test_pair_arrays_shapes():
    space = build_euclidean_grid([4, 4], spacing=0.2)
    ii, jj, dd = pair_arrays(space)
    assert len(ii) == len(jj) == len(dd)
    assert np.all(space.dist_rows(np.unique(ii))[0] >= 0)
    k = 17 % len(ii)
    assert dd[k] == pytest.approx(space.dist(int(ii[k]), int(jj[k])))


def test_upper_gradient_check_full_slope_passes():
    space = build_euclidean_grid([7, 7], spacing=0.15)
    rng = np.random.default_rng(4)
    f = rng.normal(size=space.n)
    sl = local_slope(space, f, "full")
    path = [0, 1, 2, 9, 16, 23]   # axis and diagonal hops, all in-graph
    rep = upper_gradient_check(space, f, sl, path)
    assert rep["ok"] and rep["long_hops"] == 0
    assert rep["slack"] >= -1e-12


def test_upper_gradient_check_flags_long_hops_and_failure():
    space = build_euclidean_grid([7, 7], spacing=0.15)
    f = space.points @ np.array([1.0, 1.0])
    rep = upper_gradient_check(space, f, np.zeros(space.n), [0, space.n - 1])
    assert rep["long_hops"] == 1
    assert not rep["ok"]
    with pytest.raises(ValueError):
        upper_gradient_check(space, f, f, [3])


def test_upper_gradient_mean_convention_is_weaker():
    space = build_cycle_graph(10)
    f = np.cos(2 * np.pi * np.arange(10) / 10)
    sl = local_slope(space, f, "full")
    path = list(range(6))
    r_max = upper_gradient_check(space, f, sl, path, convention="max")
    r_mean = upper_gradient_check(space, f, sl, path, convention="mean")
    assert r_max["rhs"] >= r_mean["rhs"]


def test_dirichlet_form_matches_dense_oracle():
    rng = np.random.default_rng(44)
    space = build_euclidean_grid([6, 5], spacing=0.2)
    f = rng.normal(size=space.n)
    g = rng.normal(size=space.n)
    ei, ej, w = space.edges
    ref = oracles.dirichlet_dense(list(zip(ei.tolist(), ej.tolist())), w, f, g)
    assert dirichlet_form(space, f, g) == pytest.approx(ref, rel=1e-13)
    assert dirichlet_form(space, f) == pytest.approx(
        oracles.dirichlet_dense(list(zip(ei.tolist(), ej.tolist())), w, f, f), rel=1e-13)


def test_dirichlet_two_node_hand_value():
    D = np.array([[0.0, 1.0], [1.0, 0.0]])
    space = from_distance_matrix(D, weights=[1.0, 1.0], edges=([0], [1], [1.0]))
    f = np.array([0.0, 1.0])
    assert dirichlet_form(space, f) == pytest.approx(oracles.HAND_VALUES["dirichlet_two_node"])


def test_dirichlet_requires_edges():
    space = from_distance_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        dirichlet_form(space, np.array([0.0, 1.0]))


def test_slope_equality_report_symmetric_function():
    space = build_euclidean_grid([11, 11], spacing=0.1)
    f = space.points @ np.array([1.0, 0.0])
    rep = slope_equality_report(space, f)
    assert rep["identity_err"] == 0.0
    # x1 sees both signs everywhere except on the two extreme columns,
    # where one one-sided slope loses its witness neighbor
    interior = space.boundary_clearance() > 0
    assert np.max(rep["slope_asc"][interior] - rep["slope_desc"][interior]) <= 1e-12
    assert rep["asym_mass_fraction"] == pytest.approx(22.0 / 121.0)


def test_cheeger_energy_scaling_in_f():
    rng = np.random.default_rng(45)
    space = _random_space(rng)
    f = rng.normal(size=space.n)
    base = cheeger_energy(space, f, p=2.0)
    assert cheeger_energy(space, 3.0 * f, p=2.0) == pytest.approx(9.0 * base, rel=1e-12)
    assert cheeger_energy(space, f + 5.0, p=2.0) == pytest.approx(base, rel=1e-12)
