"""Construction, metric validation, and serialization of finite spaces."""

import numpy as np
import pytest

from mmscalc.spaces import (
    build_cycle_graph,
    build_euclidean_grid,
    build_model_disk,
    build_sphere,
    ball_volume,
    from_distance_matrix,
    geodesic_points,
    load_space,
    neighbor_graph,
    paired_coord_dist,
    restrict_space,
    save_space,
    snap_points,
    space_curve_length,
    validate_metric,
)
from mmscalc.norms import lp_norm


def test_grid_counts_and_mass():
    space = build_euclidean_grid([5, 7], spacing=0.25)
    assert space.n == 35
    assert space.dim == 2
    # uniform cell measure: total mass = n * spacing^d
    assert space.total_mass() == pytest.approx(35 * 0.25 ** 2, rel=1e-14)
    assert space.h == pytest.approx(1.5 * 0.25)


def test_grid_distance_is_euclidean():
    space = build_euclidean_grid([4, 4], spacing=0.5)
    i, j = 0, 15
    expect = np.linalg.norm(space.points[i] - space.points[j])
    assert space.dist(i, j) == pytest.approx(expect, abs=1e-15)
    rows = space.dist_rows([i, j])
    assert rows.shape == (2, space.n)
    assert rows[0, j] == pytest.approx(expect, abs=1e-15)
    assert rows[0, i] == 0.0


def test_grid_linf_metric():
    space = build_euclidean_grid([4, 4], spacing=0.5, norm=lp_norm(np.inf, 2))
    d = space.dist(0, 5)          # offset (1, 1) cells
    assert d == pytest.approx(0.5, abs=1e-15)
    d = space.dist(0, 2)          # offset (0, 2) cells
    assert d == pytest.approx(1.0, abs=1e-15)


def test_validate_metric_grid():
    space = build_euclidean_grid([6, 6], spacing=0.2)
    rep = validate_metric(space)
    assert rep["ok"]
    assert rep["sym_max"] == 0.0
    assert rep["diag_max"] == 0.0
    assert rep["tri_min"] >= -1e-12


def test_validate_metric_catches_triangle_violation():
    D = np.array([[0.0, 1.0, 3.0],
                  [1.0, 0.0, 1.0],
                  [3.0, 1.0, 0.0]])
    space = from_distance_matrix(D)
    rep = validate_metric(space)
    assert not rep["ok"]
    assert rep["tri_min"] < -0.9


def test_sphere_builder_geodesics():
    space = build_sphere(2, mesh=0.25)
    rep = validate_metric(space, tol=1e-9)
    assert rep["ok"]
    # antipodal-ish pair stays within [0, pi]
    D = space.dense_dist()
    assert np.max(D) <= np.pi + 1e-12
    # surface measure is close to 4 pi once cells are summed
    assert space.total_mass() == pytest.approx(4 * np.pi, rel=0.05)


def test_model_disk_total_mass_flat():
    space = build_model_disk(0.0, radius=0.5, mesh=0.05)
    # midpoint-rule ring masses tile the disk of radius R + mesh/2 exactly
    assert space.total_mass() == pytest.approx(np.pi * 0.525 ** 2, rel=1e-12)
    rep = validate_metric(space, tol=1e-9)
    assert rep["ok"]


def test_model_disk_curved_distance_matches_polar_law():
    # points on a common ray: distance reduces to |r1 - r2|
    space = build_model_disk(1.0, radius=0.8, mesh=0.08)
    r = np.hypot(space.points[:, 0], space.points[:, 1])
    on_axis = np.where((np.abs(space.points[:, 1]) < 1e-12) & (space.points[:, 0] > 0))[0]
    i, j = on_axis[0], on_axis[-1]
    assert space.dist(i, j) == pytest.approx(abs(r[i] - r[j]), abs=1e-12)


def test_cycle_graph_shortest_path():
    space = build_cycle_graph(8)
    assert space.dist(0, 3) == pytest.approx(3.0)
    assert space.dist(0, 5) == pytest.approx(3.0)   # wraps the short way
    assert validate_metric(space)["ok"]


def test_neighbor_graph_symmetric_within_h():
    space = build_euclidean_grid([5, 5], spacing=0.1)
    G = neighbor_graph(space)
    # radius h = 1.5 * spacing picks up the 8-point stencil in the interior
    counts = np.diff(G.indptr)
    assert counts.max() == 8
    ii = np.repeat(np.arange(space.n), counts)
    pairs = set(zip(ii.tolist(), G.indices.tolist()))
    assert all((j, i) in pairs for i, j in pairs)
    assert np.all(G.dist > 0)
    assert np.all(G.dist <= space.h + 1e-12)


def test_restrict_space_masks_consistently():
    space = build_euclidean_grid([6, 6], spacing=0.2)
    mask = space.points[:, 0] > 0.3
    sub = restrict_space(space, mask)
    assert sub.n == int(np.sum(mask))
    assert sub.total_mass() == pytest.approx(float(np.sum(space.weights[mask])))
    # distances survive the restriction
    keep = np.where(mask)[0]
    assert sub.dist(0, sub.n - 1) == pytest.approx(space.dist(keep[0], keep[-1]))


def test_ball_volume_monotone():
    space = build_euclidean_grid([21, 21], spacing=0.1)
    c = space.n // 2
    v1 = ball_volume(space, c, 0.3)
    v2 = ball_volume(space, c, 0.6)
    assert 0 < v1 < v2
    # flat scaling: ratio near (0.6/0.3)^2 at this resolution
    assert v2 / v1 == pytest.approx(4.0, rel=0.15)


def test_snap_points_exact_on_grid():
    space = build_euclidean_grid([5, 5], spacing=0.5)
    idx = snap_points(space, space.points[[3, 17]])
    assert idx.tolist() == [3, 17]
    mid = 0.5 * (space.points[3] + space.points[4])
    j = snap_points(space, mid[None, :])[0]
    assert j in (3, 4)


def test_geodesic_points_interpolate_distances():
    space = build_euclidean_grid([31, 31], spacing=0.05)
    i, j = 0, space.n - 1
    t_grid = np.linspace(0.0, 1.0, 5)
    pts = geodesic_points(space, i, j, t_grid)
    d = space.dist(i, j)
    seg = paired_coord_dist(space.metric, pts[:-1], pts[1:])
    assert float(np.sum(seg)) == pytest.approx(d, rel=1e-12)
    assert space_curve_length(space, pts) == pytest.approx(d, rel=1e-12)


def test_from_distance_matrix_weighted():
    D = np.array([[0.0, 2.0], [2.0, 0.0]])
    space = from_distance_matrix(D, weights=[0.25, 0.75], h=2.5)
    assert space.total_mass() == pytest.approx(1.0)
    assert space.dist(0, 1) == 2.0
    assert space.h == 2.5


def test_save_load_round_trip_bitstable(tmp_path):
    space = build_euclidean_grid([4, 3], spacing=0.125, norm=lp_norm(np.inf, 2))
    path = tmp_path / "grid.mms"
    save_space(space, path)
    clone = load_space(path)
    assert clone.n == space.n
    assert np.array_equal(clone.points, space.points)
    assert np.array_equal(clone.weights, space.weights)
    assert clone.h == space.h
    assert np.array_equal(clone.dense_dist(), space.dense_dist())
    # a second save of the loaded space is byte-identical
    path2 = tmp_path / "again.mms"
    save_space(clone, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_save_load_explicit_matrix(tmp_path):
    D = np.array([[0.0, 1.0, 1.5],
                  [1.0, 0.0, 1.2],
                  [1.5, 1.2, 0.0]])
    space = from_distance_matrix(D, weights=[1.0, 2.0, 3.0])
    path = tmp_path / "explicit.mms"
    save_space(space, path)
    clone = load_space(path)
    assert np.array_equal(clone.dense_dist(), D)
    assert np.array_equal(clone.weights, space.weights)


def test_boundary_clearance_grid_and_sphere():
    grid = build_euclidean_grid([5, 5], spacing=0.2)
    clear = grid.boundary_clearance()
    assert clear.min() == 0.0
    assert clear.max() == pytest.approx(0.4)
    sphere = build_sphere(2, mesh=0.4)
    assert np.all(np.isinf(sphere.boundary_clearance()))


def test_bad_weights_rejected():
    with pytest.raises(ValueError):
        from_distance_matrix(np.zeros((2, 2)), weights=[1.0, 0.0])
