"""Finite metric measure spaces and their neighborhood graphs.

A space is a finite point set with positive weights, a metric, and an
interaction radius h.  The neighborhood graph collects all ordered pairs
with 0 < d(x, y) <= h; slopes and one-sided derivatives act on it.  Some
spaces additionally carry a configured edge list with conductances, which
drives the Dirichlet form and the linear Laplacian.

Builders produce the standard examples: Euclidean lattices under a chosen
norm, spheres sampled by latitude bands, constant-curvature polar disks
with finite-volume conductances, and small combinatorial graphs.  Each
builder records a recipe in space.structure so that large spaces can be
serialized compactly and rebuilt bit for bit.
"""

from __future__ import annotations

import ast
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .norms import NormSpec, dual_norm, lp_norm, norm_from_string, norm_to_string, primal_norm

__all__ = [
    "FiniteMMS",
    "NeighborhoodGraph",
    "NormMetric",
    "CircleMetric",
    "SphereSurfaceMetric",
    "PolarModelMetric",
    "ExplicitMetric",
    "build_euclidean_grid",
    "build_sphere",
    "build_model_disk",
    "build_cycle_graph",
    "from_distance_matrix",
    "restrict_space",
    "neighbor_graph",
    "validate_metric",
    "ball_volume",
    "snap_points",
    "geodesic_points",
    "paired_coord_dist",
    "space_curve_length",
    "save_space",
    "load_space",
    "DENSE_CAP",
]

# Spaces up to this size keep a cached dense distance matrix.
DENSE_CAP = 3000

FORMAT_VERSION = "1"


def model_scale(K, r):
    """Warped radius s_K(r): sin-type for K > 0, linear for K = 0, sinh-type for K < 0."""
    r = np.asarray(r, dtype=float)
    if K > 0:
        u = math.sqrt(K)
        return np.sin(u * r) / u
    if K < 0:
        u = math.sqrt(-K)
        return np.sinh(u * r) / u
    return r.copy() if r.ndim else float(r)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

class NormMetric:
    """Flat metric d(x, y) = |x - y| for a chosen norm."""

    kind = "norm"

    def __init__(self, norm=None, d=2):
        self.norm = norm if norm is not None else lp_norm(2, d)

    def pairwise(self, X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        diff = X[:, None, :] - Y[None, :, :]
        flat = diff.reshape(-1, diff.shape[-1])
        vals = np.atleast_1d(primal_norm(self.norm, flat))
        return vals.reshape(len(X), len(Y))

    def kd_plan(self, points, h):
        p = self.norm.p if self.norm.kind == "p" else None
        if p is not None:
            return points, float(h), p
        # Polygonal unit ball: cover by the Euclidean ball of radius
        # h * max |v|_2 over ball vertices, then filter exactly.
        vmax = float(np.max(np.hypot(*self.norm.vertex_array().T)))
        return points, h * vmax, 2.0

    def geodesic(self, x, y, t):
        t = np.asarray(t, dtype=float)[:, None]
        return (1.0 - t) * np.asarray(x) + t * np.asarray(y)

    def tag(self):
        return "norm:" + norm_to_string(self.norm)


class CircleMetric:
    """Arc-length metric on the circle of given radius, points in the plane."""

    kind = "circle"

    def __init__(self, radius=1.0):
        self.radius = float(radius)

    def _angles(self, X):
        X = np.atleast_2d(X)
        return np.arctan2(X[:, 1], X[:, 0])

    def pairwise(self, X, Y):
        a = self._angles(X)[:, None]
        b = self._angles(Y)[None, :]
        gap = np.abs(a - b)
        gap = np.minimum(gap, 2.0 * np.pi - gap)
        return self.radius * gap

    def kd_plan(self, points, h):
        chord = 2.0 * self.radius * math.sin(min(h / self.radius, math.pi) / 2.0)
        return points, chord * (1.0 + 1e-12), 2.0

    def geodesic(self, x, y, t):
        a = math.atan2(x[1], x[0])
        b = math.atan2(y[1], y[0])
        gap = (b - a) % (2.0 * math.pi)
        if gap > math.pi or (gap == math.pi):
            # shorter arc is clockwise; at a tie go counterclockwise
            if gap > math.pi:
                gap -= 2.0 * math.pi
        ang = a + np.asarray(t, dtype=float) * gap
        return self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def tag(self):
        return "circle:%r" % self.radius


class SphereSurfaceMetric:
    """Great-circle metric on the unit two-sphere, points as unit 3-vectors."""

    kind = "sphere2"

    def pairwise(self, X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        dots = np.clip(X @ Y.T, -1.0, 1.0)
        # robust arc length via atan2(|u x v|, u . v)
        cx = X[:, None, 1] * Y[None, :, 2] - X[:, None, 2] * Y[None, :, 1]
        cy = X[:, None, 2] * Y[None, :, 0] - X[:, None, 0] * Y[None, :, 2]
        cz = X[:, None, 0] * Y[None, :, 1] - X[:, None, 1] * Y[None, :, 0]
        sin_part = np.sqrt(cx * cx + cy * cy + cz * cz)
        return np.arctan2(sin_part, dots)

    def kd_plan(self, points, h):
        chord = 2.0 * math.sin(min(h, math.pi) / 2.0)
        return points, chord * (1.0 + 1e-12), 2.0

    def geodesic(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dot = float(np.clip(x @ y, -1.0, 1.0))
        theta = math.atan2(float(np.linalg.norm(np.cross(x, y))), dot)
        if theta < 1e-15:
            return np.broadcast_to(x, (np.size(t), 3)).copy()
        if math.pi - theta < 1e-12:
            # antipodal: route through a deterministic midpoint
            k = int(np.argmin(np.abs(x)))
            e = np.zeros(3)
            e[k] = 1.0
            mid = e - (x @ e) * x
            mid /= np.linalg.norm(mid)
            t = np.asarray(t, dtype=float)
            first = self.geodesic(x, mid, np.clip(2.0 * t, 0.0, 1.0))
            second = self.geodesic(mid, y, np.clip(2.0 * t - 1.0, 0.0, 1.0))
            return np.where((t <= 0.5)[:, None], first, second)
        t = np.asarray(t, dtype=float)[:, None]
        s = math.sin(theta)
        out = (np.sin((1.0 - t) * theta) * x[None, :] + np.sin(t * theta) * y[None, :]) / s
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def tag(self):
        return "sphere2"


class PolarModelMetric:
    """Constant-curvature model plane in polar chart coordinates.

    Points are stored as (s cos phi, s sin phi) with s the chart radius equal
    to the geodesic distance from the pole.  Distances use the half-angle
    form, cancellation-free for nearby points:

        K > 0:  sin^2(u d/2) = sin^2(u dr/2) + sin(u r) sin(u r') sin^2(dphi/2)
        K = 0:  plain Euclidean chart
        K < 0:  sinh^2(u d/2) = sinh^2(u dr/2) + sinh(u r) sinh(u r') sin^2(dphi/2)

    with u = sqrt(|K|).
    """

    kind = "polar"

    def __init__(self, K):
        self.K = float(K)

    def _polar(self, X):
        X = np.atleast_2d(X)
        r = np.hypot(X[:, 0], X[:, 1])
        phi = np.arctan2(X[:, 1], X[:, 0])
        return r, phi

    def pairwise(self, X, Y):
        K = self.K
        ra, pa = self._polar(X)
        rb, pb = self._polar(Y)
        dphi = pa[:, None] - pb[None, :]
        sp2 = np.sin(0.5 * dphi) ** 2
        if K == 0.0:
            X = np.atleast_2d(X)
            Y = np.atleast_2d(Y)
            diff = X[:, None, :] - Y[None, :, :]
            return np.hypot(diff[..., 0], diff[..., 1])
        u = math.sqrt(abs(K))
        dr = ra[:, None] - rb[None, :]
        if K > 0:
            val = np.sin(0.5 * u * dr) ** 2 + np.sin(u * ra)[:, None] * np.sin(u * rb)[None, :] * sp2
            return 2.0 / u * np.arcsin(np.sqrt(np.clip(val, 0.0, 1.0)))
        val = np.sinh(0.5 * u * dr) ** 2 + np.sinh(u * ra)[:, None] * np.sinh(u * rb)[None, :] * sp2
        return 2.0 / u * np.arcsinh(np.sqrt(np.maximum(val, 0.0)))

    def kd_plan(self, points, h):
        if self.K <= 0:
            # chart distance never exceeds model distance
            return points, float(h) * (1.0 + 1e-12), 2.0
        # positive curvature: lift to the round sphere and use chords
        R = 1.0 / math.sqrt(self.K)
        r, phi = self._polar(points)
        s = np.sin(r / R)
        lifted = R * np.stack([s * np.cos(phi), s * np.sin(phi), np.cos(r / R)], axis=1)
        chord = 2.0 * R * math.sin(min(h / R, math.pi) / 2.0)
        return lifted, chord * (1.0 + 1e-12), 2.0

    def _lift(self, x):
        r = math.hypot(x[0], x[1])
        phi = math.atan2(x[1], x[0])
        u = math.sqrt(abs(self.K))
        if self.K > 0:
            R = 1.0 / u
            return np.array([R * math.sin(r / R) * math.cos(phi),
                             R * math.sin(r / R) * math.sin(phi),
                             R * math.cos(r / R)])
        R = 1.0 / u
        return np.array([R * math.sinh(r / R) * math.cos(phi),
                         R * math.sinh(r / R) * math.sin(phi),
                         R * math.cosh(r / R)])

    def _drop(self, P):
        u = math.sqrt(abs(self.K))
        R = 1.0 / u
        phi = np.arctan2(P[:, 1], P[:, 0])
        rho = np.hypot(P[:, 0], P[:, 1])
        if self.K > 0:
            r = R * np.arctan2(rho / R, P[:, 2] / R)
        else:
            r = R * np.arcsinh(rho / R)
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)

    def geodesic(self, x, y, t):
        t = np.asarray(t, dtype=float)
        if self.K == 0.0:
            return (1.0 - t)[:, None] * np.asarray(x) + t[:, None] * np.asarray(y)
        d = float(self.pairwise([x], [y])[0, 0])
        if d < 1e-15:
            return np.broadcast_to(np.asarray(x, float), (t.size, 2)).copy()
        u = math.sqrt(abs(self.K))
        R = 1.0 / u
        theta = d / R
        P0 = self._lift(x)
        P1 = self._lift(y)
        if self.K > 0:
            s = math.sin(theta)
            pts = (np.sin((1.0 - t) * theta)[:, None] * P0 + np.sin(t * theta)[:, None] * P1) / s
            nrm = np.linalg.norm(pts, axis=1, keepdims=True)
            pts = R * pts / nrm
        else:
            s = math.sinh(theta)
            pts = (np.sinh((1.0 - t) * theta)[:, None] * P0 + np.sinh(t * theta)[:, None] * P1) / s
        return self._drop(pts)

    def tag(self):
        return "polar:%r" % self.K


class ExplicitMetric:
    """Metric given by a dense distance matrix; no coordinates required."""

    kind = "explicit"

    def __init__(self, D):
        self.D = np.asarray(D, dtype=float)

    def pairwise_idx(self, I, J):
        return self.D[np.ix_(I, J)]

    def tag(self):
        return "explicit"


def _metric_from_tag(tag, dim):
    if tag.startswith("norm:"):
        return NormMetric(norm_from_string(tag[5:], d=dim))
    if tag.startswith("circle:"):
        return CircleMetric(float(tag[7:]))
    if tag == "sphere2":
        return SphereSurfaceMetric()
    if tag.startswith("polar:"):
        return PolarModelMetric(float(tag[6:]))
    if tag == "explicit":
        return None
    raise ValueError("unknown metric tag %r" % tag)


# ---------------------------------------------------------------------------
# the space object
# ---------------------------------------------------------------------------

@dataclass
class NeighborhoodGraph:
    """CSR arrays for all ordered pairs with 0 < d <= h."""

    indptr: np.ndarray
    indices: np.ndarray
    dist: np.ndarray

    @property
    def n(self):
        return len(self.indptr) - 1

    def neighbors(self, i):
        sl = slice(self.indptr[i], self.indptr[i + 1])
        return self.indices[sl], self.dist[sl]

    def degree(self):
        return np.diff(self.indptr)


class FiniteMMS:
    """Finite metric measure space with interaction radius h.

    points    : (n, d) coordinates, or None for explicit-matrix spaces
    weights   : (n,) positive masses
    h         : neighborhood radius for slope-type operators
    metric    : one of the metric objects above
    structure : builder recipe dict (drives fast paths and serialization)
    edges     : optional (ei, ej, w) conductance triple for the Dirichlet form,
                unordered pairs listed once with ei < ej
    """

    def __init__(self, points, weights, h, metric, structure=None, edges=None, name=""):
        self.points = None if points is None else np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        self.h = float(h)
        self.metric = metric
        self.structure = dict(structure) if structure else {}
        if edges is not None:
            ei, ej, w = edges
            self.edges = (np.asarray(ei, dtype=np.int64), np.asarray(ej, dtype=np.int64),
                          np.asarray(w, dtype=float))
        else:
            self.edges = None
        self.name = name
        self._graph = None
        self._dense = None
        self._clearance = None

    @property
    def n(self):
        return len(self.weights)

    @property
    def dim(self):
        return 0 if self.points is None else self.points.shape[1]

    def total_mass(self):
        return float(np.sum(self.weights))

    # -- distances ---------------------------------------------------------

    def dense_dist(self):
        """Full distance matrix; cached, only for n <= DENSE_CAP."""
        if self._dense is None:
            if isinstance(self.metric, ExplicitMetric):
                self._dense = self.metric.D
            else:
                if self.n > DENSE_CAP:
                    raise ValueError("space too large for a dense distance matrix")
                self._dense = self.metric.pairwise(self.points, self.points)
        return self._dense

    def dist(self, i, j):
        if isinstance(self.metric, ExplicitMetric):
            return float(self.metric.D[i, j])
        return float(self.metric.pairwise(self.points[[i]], self.points[[j]])[0, 0])

    def dist_rows(self, I):
        """Distances from the listed indices to every point, shape (len(I), n)."""
        I = np.atleast_1d(np.asarray(I, dtype=np.int64))
        if isinstance(self.metric, ExplicitMetric):
            return self.metric.D[I]
        return self.metric.pairwise(self.points[I], self.points)

    # -- neighborhood graph ------------------------------------------------

    def graph(self):
        if self._graph is None:
            self._graph = neighbor_graph(self)
        return self._graph

    # -- boundary ----------------------------------------------------------

    def boundary_clearance(self):
        """Distance from each point to the edge of the modeled domain.

        Lattices measure the gap to the hull faces, disks to the outer rim;
        boundary-free spaces (spheres, circles, graphs) return +inf.
        """
        if self._clearance is None:
            kind = self.structure.get("kind")
            if kind == "grid":
                lo = self.points.min(axis=0)
                hi = self.points.max(axis=0)
                margin = np.minimum(self.points - lo, hi - self.points)
                self._clearance = margin.min(axis=1)
            elif kind == "disk":
                rim = self.structure["radius"] + 0.5 * self.structure["delta"]
                r = np.hypot(self.points[:, 0], self.points[:, 1])
                self._clearance = rim - r
            else:
                self._clearance = np.full(self.n, np.inf)
        return self._clearance

    def __repr__(self):
        return "FiniteMMS(n=%d, h=%g, metric=%s%s)" % (
            self.n, self.h, getattr(self.metric, "kind", "?"),
            ", name=%r" % self.name if self.name else "")


# ---------------------------------------------------------------------------
# neighbor graph construction
# ---------------------------------------------------------------------------

def _csr_from_pairs(n, ii, jj, dd):
    order = np.lexsort((jj, ii))
    ii, jj, dd = ii[order], jj[order], dd[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, ii + 1, 1)
    np.cumsum(indptr, out=indptr)
    return NeighborhoodGraph(indptr=indptr, indices=jj, dist=dd)


def _grid_stencil_graph(space):
    st = space.structure
    dims = list(st["dims"])
    s = st["spacing"]
    norm = space.metric.norm
    reach = int(math.floor(space.h / s + 1e-9))
    ranges = [np.arange(-reach, reach + 1)] * len(dims)
    offs = np.stack([m.ravel() for m in np.meshgrid(*ranges, indexing="ij")], axis=1)
    keep = []
    for z in offs:
        if not np.any(z):
            continue
        dist = primal_norm(norm, z.astype(float) * s)
        if 0.0 < dist <= space.h:
            keep.append((z, float(dist)))
    shape = tuple(dims)
    idx = np.arange(space.n).reshape(shape)
    coords = np.stack([c.ravel() for c in np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")], axis=1)
    ii_list, jj_list, dd_list = [], [], []
    for z, dist in keep:
        shifted = coords + z
        ok = np.all((shifted >= 0) & (shifted < np.asarray(dims)), axis=1)
        src = np.flatnonzero(ok)
        dst = idx[tuple(shifted[ok].T)]
        ii_list.append(src)
        jj_list.append(dst)
        dd_list.append(np.full(len(src), dist))
    ii = np.concatenate(ii_list)
    jj = np.concatenate(jj_list)
    dd = np.concatenate(dd_list)
    return _csr_from_pairs(space.n, ii, jj, dd)


def _cycle_stencil_graph(space):
    # arc lengths are whole numbers of unit steps; recovering them from the
    # embedded coordinates rounds pairs at distance exactly h off the graph
    n = space.structure["n"]
    reach = min(int(math.floor(space.h + 1e-9)), n // 2)
    base = np.arange(n, dtype=np.int64)
    ii_list, jj_list, dd_list = [], [], []
    for k in range(1, reach + 1):
        steps = (+k,) if 2 * k == n else (+k, -k)
        for sgn in steps:
            ii_list.append(base)
            jj_list.append((base + sgn) % n)
            dd_list.append(np.full(n, float(k)))
    if not ii_list:
        empty = np.zeros(0, dtype=np.int64)
        return _csr_from_pairs(n, empty, empty, np.zeros(0))
    return _csr_from_pairs(n, np.concatenate(ii_list), np.concatenate(jj_list),
                           np.concatenate(dd_list))


def _kd_graph_exact(space):
    pts, radius, p = space.metric.kd_plan(space.points, space.h)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=radius, p=p, output_type="ndarray")
    empty = np.zeros(0, dtype=np.int64)
    if len(pairs) == 0:
        return _csr_from_pairs(space.n, empty, empty, np.zeros(0))
    a = pairs[:, 0].astype(np.int64)
    b = pairs[:, 1].astype(np.int64)
    dd = _paired_dist(space, a, b)
    keep = (dd > 0.0) & (dd <= space.h)
    a, b, dd = a[keep], b[keep], dd[keep]
    ii = np.concatenate([a, b])
    jj = np.concatenate([b, a])
    dvals = np.concatenate([dd, dd])
    return _csr_from_pairs(space.n, ii, jj, dvals)


def _paired_dist(space, a, b):
    """d(x_a, x_b) elementwise for index arrays of equal length."""
    return paired_coord_dist(space.metric, space.points[a], space.points[b])


def paired_coord_dist(m, X, Y):
    """Metric distances elementwise between two coordinate arrays."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    if isinstance(m, NormMetric):
        return np.atleast_1d(primal_norm(m.norm, X - Y))
    if isinstance(m, CircleMetric):
        ang = np.abs(np.arctan2(X[:, 1], X[:, 0]) - np.arctan2(Y[:, 1], Y[:, 0]))
        ang = np.minimum(ang, 2.0 * np.pi - ang)
        return m.radius * ang
    if isinstance(m, SphereSurfaceMetric):
        dots = np.clip(np.sum(X * Y, axis=1), -1.0, 1.0)
        crosses = np.linalg.norm(np.cross(X, Y), axis=1)
        return np.arctan2(crosses, dots)
    if isinstance(m, PolarModelMetric):
        out = np.empty(len(X))
        for lo in range(0, len(X), 100000):
            sl = slice(lo, min(lo + 100000, len(X)))
            ra = np.hypot(X[sl, 0], X[sl, 1])
            rb = np.hypot(Y[sl, 0], Y[sl, 1])
            pa = np.arctan2(X[sl, 1], X[sl, 0])
            pb = np.arctan2(Y[sl, 1], Y[sl, 0])
            K = m.K
            sp2 = np.sin(0.5 * (pa - pb)) ** 2
            if K == 0.0:
                out[sl] = np.hypot(X[sl, 0] - Y[sl, 0], X[sl, 1] - Y[sl, 1])
            elif K > 0:
                u = math.sqrt(K)
                val = np.sin(0.5 * u * (ra - rb)) ** 2 + np.sin(u * ra) * np.sin(u * rb) * sp2
                out[sl] = 2.0 / u * np.arcsin(np.sqrt(np.clip(val, 0.0, 1.0)))
            else:
                u = math.sqrt(-K)
                val = np.sinh(0.5 * u * (ra - rb)) ** 2 + np.sinh(u * ra) * np.sinh(u * rb) * sp2
                out[sl] = 2.0 / u * np.arcsinh(np.sqrt(np.maximum(val, 0.0)))
        return out
    raise TypeError("paired distances unavailable for %r" % type(m).__name__)


def _dense_graph(space):
    D = space.dense_dist()
    mask = (D > 0.0) & (D <= space.h)
    ii, jj = np.nonzero(mask)
    return _csr_from_pairs(space.n, ii.astype(np.int64), jj.astype(np.int64), D[mask])


def neighbor_graph(space):
    """All ordered pairs with 0 < d(x, y) <= h, in CSR form.

    Grid lattices use the exact stencil; coordinate spaces go through a
    KD-tree candidate pass with an exact metric filter; everything else
    falls back to the dense matrix.
    """
    kind = space.structure.get("kind")
    if kind == "grid":
        return _grid_stencil_graph(space)
    if kind == "cycle":
        return _cycle_stencil_graph(space)
    if space.points is not None and hasattr(space.metric, "kd_plan") and space.n > DENSE_CAP:
        return _kd_graph_exact(space)
    if space.points is None or isinstance(space.metric, ExplicitMetric):
        return _dense_graph(space)
    if space.n <= DENSE_CAP:
        return _dense_graph(space)
    return _kd_graph_exact(space)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_euclidean_grid(dims, spacing, norm=None, h=None):
    """Centered lattice in R^d under the given norm.

    Cell masses are spacing^d; configured edges join axis neighbors with
    conductance spacing^(d-2), the flat finite-volume calibration.
    """
    dims = [int(k) for k in np.atleast_1d(dims)]
    d = len(dims)
    s = float(spacing)
    norm = norm if norm is not None else lp_norm(2, d)
    if norm.d != d:
        raise ValueError("norm dimension %d does not match grid dimension %d" % (norm.d, d))
    axes = [s * (np.arange(k) - 0.5 * (k - 1)) for k in dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    n = len(pts)
    weights = np.full(n, s**d)
    if h is None:
        h = 1.5 * s
    idx = np.arange(n).reshape(dims)
    ei, ej, w = [], [], []
    for ax in range(d):
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[ax] = slice(0, dims[ax] - 1)
        sl_hi[ax] = slice(1, dims[ax])
        a = idx[tuple(sl_lo)].ravel()
        b = idx[tuple(sl_hi)].ravel()
        ei.append(a)
        ej.append(b)
        w.append(np.full(len(a), s ** (d - 2)))
    edges = (np.concatenate(ei), np.concatenate(ej), np.concatenate(w))
    st = {"kind": "grid", "dims": dims, "spacing": s, "norm": norm_to_string(norm), "h": float(h)}
    return FiniteMMS(pts, weights, h, NormMetric(norm), structure=st, edges=edges,
                     name="grid%s" % "x".join(map(str, dims)))


def build_sphere(N, mesh, h=None):
    """Round sphere S^N (N = 1 or 2) sampled at the given mesh size.

    N = 1 is the unit circle with equal arcs.  N = 2 places latitude bands
    of height mesh with near-square cells plus two polar cap points; cell
    masses are exact band areas, so the total is the sphere area 4 pi.
    """
    if h is None:
        h = 1.5 * mesh
    if N == 1:
        n = max(4, int(round(2.0 * math.pi / mesh)))
        ang = 2.0 * math.pi * np.arange(n) / n
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        weights = np.full(n, 2.0 * math.pi / n)
        st = {"kind": "circle", "n": n, "radius": 1.0, "mesh": float(mesh), "h": float(h)}
        return FiniteMMS(pts, weights, h, CircleMetric(1.0), structure=st, name="circle%d" % n)
    if N != 2:
        raise ValueError("only N = 1 and N = 2 spheres are built")
    bands = max(3, int(round(math.pi / mesh)))
    dth = math.pi / bands
    pts = [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])]
    cap = 2.0 * math.pi * (1.0 - math.cos(0.5 * dth))
    weights = [cap, cap]
    for j in range(bands):
        th = (j + 0.5) * dth
        lo, hi = th - 0.5 * dth, th + 0.5 * dth
        # clip the first and last band against the polar caps
        lo = max(lo, 0.5 * dth) if j == 0 else lo
        hi = min(hi, math.pi - 0.5 * dth) if j == bands - 1 else hi
        if hi <= lo:
            continue
        area = 2.0 * math.pi * (math.cos(lo) - math.cos(hi))
        m_j = max(4, int(round(2.0 * math.pi * math.sin(th) / mesh)))
        phi = 2.0 * math.pi * np.arange(m_j) / m_j
        ring = np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi),
                         np.full(m_j, math.cos(th))], axis=1)
        pts.append(ring)
        weights.append(np.full(m_j, area / m_j))
    pts = np.vstack([np.atleast_2d(p) for p in pts])
    weights = np.concatenate([np.atleast_1d(w) for w in weights])
    st = {"kind": "latband", "mesh": float(mesh), "h": float(h)}
    return FiniteMMS(pts, weights, h, SphereSurfaceMetric(), structure=st,
                     name="sphere2_%g" % mesh)


def build_model_disk(K, radius, mesh, h=None):
    """Geodesic disk in the curvature-K model surface, polar rings.

    Rings sit at r = k*mesh with a fixed angular count M aligned across
    rings, plus a center point carrying the exact small-cap mass.  Ring
    masses use the midpoint rule s_K(r) * mesh * dphi.  Configured edges
    carry finite-volume conductances: radial s_K(r +- mesh/2) * dphi / mesh
    and in-ring mesh / (s_K(r) * dphi).
    """
    K = float(K)
    delta = float(mesh)
    rings = int(round(radius / delta))
    if rings < 2:
        raise ValueError("disk needs at least two rings")
    r_out = rings * delta
    M = max(8, int(math.ceil(2.0 * math.pi * float(model_scale(K, r_out)) / delta)))
    dphi = 2.0 * math.pi / M
    if h is None:
        h = 1.5 * delta
    phi = dphi * np.arange(M)
    pts = [np.zeros((1, 2))]
    weights = []
    if K > 0:
        u = math.sqrt(K)
        cap = 2.0 * math.pi * (1.0 - math.cos(u * 0.5 * delta)) / K
    elif K < 0:
        u = math.sqrt(-K)
        cap = 2.0 * math.pi * (math.cosh(u * 0.5 * delta) - 1.0) / (-K)
    else:
        cap = math.pi * (0.5 * delta) ** 2
    weights.append(np.array([cap]))
    for k in range(1, rings + 1):
        r = k * delta
        ring = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
        pts.append(ring)
        weights.append(np.full(M, float(model_scale(K, r)) * delta * dphi))
    pts = np.vstack(pts)
    weights = np.concatenate(weights)

    def pid(k, i):
        return 1 + (k - 1) * M + (i % M)

    ei, ej, w = [], [], []
    # center to first ring
    w_rad0 = float(model_scale(K, 0.5 * delta)) * dphi / delta
    for i in range(M):
        ei.append(0)
        ej.append(pid(1, i))
        w.append(w_rad0)
    for k in range(1, rings + 1):
        r = k * delta
        w_lat = delta / (float(model_scale(K, r)) * dphi)
        for i in range(M):
            a, b = pid(k, i), pid(k, i + 1)
            ei.append(min(a, b))
            ej.append(max(a, b))
            w.append(w_lat)
        if k < rings:
            w_rad = float(model_scale(K, r + 0.5 * delta)) * dphi / delta
            for i in range(M):
                ei.append(pid(k, i))
                ej.append(pid(k + 1, i))
                w.append(w_rad)
    edges = (np.asarray(ei), np.asarray(ej), np.asarray(w))
    st = {"kind": "disk", "K": K, "radius": float(r_out), "delta": delta,
          "m_angular": M, "rings": rings, "h": float(h)}
    return FiniteMMS(pts, weights, h, PolarModelMetric(K), structure=st, edges=edges,
                     name="disk_K%g_%g" % (K, delta))


def build_cycle_graph(n, h=1.0):
    """Cycle graph C_n: unit masses, unit-length arcs, unit conductances."""
    n = int(n)
    R = n / (2.0 * math.pi)
    ang = 2.0 * math.pi * np.arange(n) / n
    pts = R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    weights = np.ones(n)
    ei = np.arange(n)
    ej = (ei + 1) % n
    lo = np.minimum(ei, ej)
    hi = np.maximum(ei, ej)
    edges = (lo, hi, np.ones(n))
    st = {"kind": "cycle", "n": n, "h": float(h)}
    return FiniteMMS(pts, weights, h, CircleMetric(R), structure=st, edges=edges,
                     name="cycle%d" % n)


def from_distance_matrix(D, weights=None, h=None, edges=None, name=""):
    """Space from an explicit distance matrix (validated lazily)."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if weights is None:
        weights = np.ones(n)
    if h is None:
        pos = D[D > 0]
        h = 1.5 * float(np.min(pos)) if len(pos) else 1.0
    return FiniteMMS(None, weights, h, ExplicitMetric(D), structure={"kind": "explicit"},
                     edges=edges, name=name)


def restrict_space(space, mask):
    """Subspace on the masked points; configured edges keep both endpoints."""
    mask = np.asarray(mask)
    if mask.dtype != bool:
        m = np.zeros(space.n, dtype=bool)
        m[mask] = True
        mask = m
    idx = np.flatnonzero(mask)
    remap = -np.ones(space.n, dtype=np.int64)
    remap[idx] = np.arange(len(idx))
    pts = None if space.points is None else space.points[idx]
    metric = space.metric
    if isinstance(metric, ExplicitMetric):
        metric = ExplicitMetric(metric.D[np.ix_(idx, idx)])
    edges = None
    if space.edges is not None:
        ei, ej, w = space.edges
        keep = mask[ei] & mask[ej]
        edges = (remap[ei[keep]], remap[ej[keep]], w[keep])
    st = {"kind": "restricted", "parent": space.structure.get("kind")}
    return FiniteMMS(pts, space.weights[idx], space.h, metric, structure=st, edges=edges,
                     name=space.name + "|restricted")


# ---------------------------------------------------------------------------
# checks and balls
# ---------------------------------------------------------------------------

def validate_metric(space, tol=1e-12, sample_triples=2_000_000, seed=0):
    """Symmetry, vanishing diagonal, and triangle inequality.

    Small spaces get the full triple scan; larger ones are checked on a
    seeded random sample of triples plus full symmetry.  Returns a report
    dict with the worst violations; passes iff all are within tol.
    """
    n = space.n
    report = {"n": n, "mode": "full", "sym_max": 0.0, "diag_max": 0.0,
              "neg_min": 0.0, "tri_min": 0.0, "checked_triples": 0}
    if n <= 600 or isinstance(space.metric, ExplicitMetric) and n <= 1500:
        D = space.dense_dist() if n <= DENSE_CAP else None
    else:
        D = None
    if D is not None and n <= 600:
        report["sym_max"] = float(np.max(np.abs(D - D.T))) if n else 0.0
        report["diag_max"] = float(np.max(np.abs(np.diag(D))))
        report["neg_min"] = float(min(0.0, np.min(D)))
        worst = 0.0
        for i in range(n):
            slack = D[i][:, None] + D - D[i][None, :]
            worst = min(worst, float(np.min(slack)))
        report["tri_min"] = worst
        report["checked_triples"] = n * n * n
    else:
        report["mode"] = "sampled"
        rng = np.random.default_rng(seed)
        batch = 200000
        done = 0
        worst = 0.0
        sym = 0.0
        diag = 0.0
        neg = 0.0
        while done < sample_triples:
            k = min(batch, sample_triples - done)
            I = rng.integers(0, n, k)
            J = rng.integers(0, n, k)
            L = rng.integers(0, n, k)
            dij = _space_pair(space, I, J)
            dji = _space_pair(space, J, I)
            dil = _space_pair(space, I, L)
            dlj = _space_pair(space, L, J)
            sym = max(sym, float(np.max(np.abs(dij - dji))))
            neg = min(neg, float(np.min(dij)))
            worst = min(worst, float(np.min(dil + dlj - dij)))
            dii = _space_pair(space, I, I)
            diag = max(diag, float(np.max(np.abs(dii))))
            done += k
        report.update(sym_max=sym, diag_max=diag, neg_min=neg, tri_min=worst,
                      checked_triples=done)
    report["ok"] = (report["sym_max"] <= tol and report["diag_max"] <= tol
                    and report["neg_min"] >= -tol and report["tri_min"] >= -tol)
    return report


def _space_pair(space, I, J):
    if isinstance(space.metric, ExplicitMetric):
        return space.metric.D[I, J]
    return _paired_dist(space, I, J)


def ball_volume(space, x, r):
    """Mass of the open ball around point index x: sum of w over d(x, .) < r."""
    row = space.dist_rows([int(x)])[0]
    return float(np.sum(space.weights[row < r]))


# ---------------------------------------------------------------------------
# snapping and geodesics
# ---------------------------------------------------------------------------

def snap_points(space, pts):
    """Indices of the nearest space points to the given coordinates.

    Lattices and polar disks snap analytically; other spaces use the
    metric's KD plan for nearest neighbors in the exact metric ordering.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    kind = space.structure.get("kind")
    if kind == "grid":
        dims = np.asarray(space.structure["dims"])
        s = space.structure["spacing"]
        lo = space.points.min(axis=0)
        cell = np.clip(np.round((pts - lo) / s).astype(np.int64), 0, dims - 1)
        stride = np.concatenate([np.cumprod(dims[::-1])[::-1][1:], [1]])
        return cell @ stride
    if kind == "disk":
        delta = space.structure["delta"]
        M = space.structure["m_angular"]
        rings = space.structure["rings"]
        r = np.hypot(pts[:, 0], pts[:, 1])
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        k = np.clip(np.round(r / delta).astype(np.int64), 0, rings)
        i = np.round(phi / (2.0 * math.pi / M)).astype(np.int64) % M
        out = 1 + (k - 1) * M + i
        out[k == 0] = 0
        return out
    # exact nearest by metric: KD candidates then refine
    if space.points is not None and hasattr(space.metric, "kd_plan"):
        planned, _, p = space.metric.kd_plan(space.points, space.h)
        qplan, _, _ = space.metric.kd_plan(pts, space.h)
        tree = cKDTree(planned)
        _, cand = tree.query(qplan, k=min(8, space.n), p=p)
        cand = np.atleast_2d(cand)
        best = np.empty(len(pts), dtype=np.int64)
        for row in range(len(pts)):
            ds = space.metric.pairwise(pts[[row]], space.points[cand[row]])[0]
            best[row] = cand[row][int(np.argmin(ds))]
        return best
    raise ValueError("cannot snap onto a coordinate-free space")


def geodesic_points(space, i, j, t_grid):
    """Constant-speed geodesic samples between two space points."""
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if space.points is None:
        raise ValueError("geodesics need coordinates")
    return space.metric.geodesic(space.points[int(i)], space.points[int(j)], t)


def space_curve_length(space, coords):
    """Metric length of a polygonal chain of coordinates."""
    coords = np.atleast_2d(coords)
    if len(coords) < 2:
        return 0.0
    seg = space.metric.pairwise(coords[:-1], coords[1:])
    return float(np.sum(np.diagonal(seg)))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt_float(x):
    return repr(float(x))


def save_space(space, path):
    """Plain-text space file: meta, recipe, and data sections.

    Spaces built by a recorded recipe skip the dense distance payload and
    rebuild from the recipe on load; explicit or small spaces embed their
    points, weights, and (if no recipe and n <= 1024) distances.
    """
    buf = io.StringIO()
    buf.write("[meta]\n")
    buf.write("version = %s\n" % FORMAT_VERSION)
    buf.write("n = %d\n" % space.n)
    buf.write("h = %s\n" % _fmt_float(space.h))
    buf.write("metric = %s\n" % space.metric.tag())
    buf.write("name = %s\n" % (space.name or "-"))
    if space.structure:
        buf.write("[structure]\n")
        for key in sorted(space.structure):
            buf.write("%s = %r\n" % (key, space.structure[key]))
    if space.points is not None:
        buf.write("[points]\n")
        for row in space.points:
            buf.write(" ".join(_fmt_float(v) for v in row) + "\n")
    buf.write("[weights]\n")
    for wv in space.weights:
        buf.write(_fmt_float(wv) + "\n")
    if isinstance(space.metric, ExplicitMetric):
        if space.n > 1024:
            raise ValueError("explicit-metric spaces over 1024 points cannot be saved densely")
        buf.write("[dist]\n")
        for row in space.metric.D:
            buf.write(" ".join(_fmt_float(v) for v in row) + "\n")
    if space.edges is not None:
        buf.write("[edges]\n")
        ei, ej, w = space.edges
        for a, b, wv in zip(ei, ej, w):
            buf.write("%d %d %s\n" % (a, b, _fmt_float(wv)))
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_space(path):
    sections = {}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
            else:
                sections[current].append(line)
    meta = {}
    for line in sections.get("meta", []):
        key, _, val = line.partition("=")
        meta[key.strip()] = val.strip()
    n = int(meta["n"])
    h = float(meta["h"])
    structure = {}
    for line in sections.get("structure", []):
        key, _, val = line.partition("=")
        structure[key.strip()] = ast.literal_eval(val.strip())
    points = None
    if "points" in sections:
        points = np.array([[float(v) for v in line.split()] for line in sections["points"]])
    weights = np.array([float(line) for line in sections.get("weights", [])])
    tag = meta["metric"]
    if tag == "explicit":
        D = np.array([[float(v) for v in line.split()] for line in sections["dist"]])
        metric = ExplicitMetric(D)
    else:
        dim = points.shape[1] if points is not None else 2
        metric = _metric_from_tag(tag, dim)
    edges = None
    if "edges" in sections:
        ei, ej, w = [], [], []
        for line in sections["edges"]:
            a, b, wv = line.split()
            ei.append(int(a))
            ej.append(int(b))
            w.append(float(wv))
        edges = (np.array(ei), np.array(ej), np.array(w))
    name = meta.get("name", "")
    if name == "-":
        name = ""
    out = FiniteMMS(points, weights, h, metric, structure=structure, edges=edges, name=name)
    if out.n != n:
        raise ValueError("point count mismatch while loading space")
    return out
