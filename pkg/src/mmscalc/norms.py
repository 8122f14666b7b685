"""Exact calculus on flat normed spaces.

A norm on R^d is either an l^p norm (p in [1, inf]) or a symmetric polygon
given by the vertices of its unit ball (dimension 2).  For a covector
omega = Dg the (possibly multivalued) inverse duality map returns the set
of gradients of g: vectors v with omega(v) = |omega|_*^2 and |v| = |omega|_*.
The one-sided pairings

    dplus  = max over the gradient set of Df(v)
    dminus = min over the gradient set of Df(v)

are computed two independent ways: directly from the gradient-set vertices,
and as the limit of difference quotients of the squared dual norm.  The
quotient route uses cancellation-free expansions so that agreement at
eps = 2^-40 is meaningful to well below 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NormSpec",
    "GradientSet",
    "lp_norm",
    "polygon_norm",
    "norm_from_string",
    "norm_to_string",
    "primal_norm",
    "dual_norm",
    "duality_map_inverse",
    "young_gap",
    "d_pm_via_gradient_set",
    "d_pm_via_difference_quotient",
    "d_pm_batch",
    "quotient_sequence",
    "laplacian_interval_normed",
    "DEFAULT_EPS_GRID",
    "TIE_RTOL",
]

# Relative slack for active-vertex / active-coordinate detection.
TIE_RTOL = 1e-12

# Dyadic grid 2^-1 .. 2^-40; convexity makes the quotients monotone along it,
# so the last entry is a certified one-sided bound.
DEFAULT_EPS_GRID = 0.5 ** np.arange(1, 41)


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^d: kind is "p" (with exponent) or "poly" (vertex list)."""

    kind: str
    d: int
    p: float = 2.0
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("p", "poly"):
            raise ValueError("kind must be 'p' or 'poly'")
        if self.kind == "p" and not (1.0 <= self.p):
            raise ValueError("p-norm exponent must satisfy p >= 1")

    @property
    def q(self):
        """Conjugate exponent of the dual norm."""
        if self.kind != "p":
            raise AttributeError("conjugate exponent only defined for p-norms")
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    def vertex_array(self):
        return np.asarray(self.vertices, dtype=float)


def lp_norm(p, d=2):
    return NormSpec(kind="p", d=int(d), p=float(p))


def polygon_norm(vertices):
    """Symmetric polygon norm in the plane from its unit-ball vertices.

    The list must be closed under v -> -v.  Vertices are sorted by angle so
    the facet structure is deterministic.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2:
        raise ValueError("polygon vertices must be an (m, 2) array")
    if len(V) < 4:
        raise ValueError("need at least 4 vertices for a symmetric polygon")
    norms = np.hypot(V[:, 0], V[:, 1])
    if np.min(norms) <= 0:
        raise ValueError("polygon vertices must be nonzero")
    # Symmetry check: every -v present.
    for v in V:
        if np.min(np.max(np.abs(V + v), axis=1)) > 1e-9 * np.max(norms):
            raise ValueError("vertex list is not symmetric under v -> -v")
    order = np.argsort(np.arctan2(V[:, 1], V[:, 0]), kind="stable")
    V = V[order]
    return NormSpec(kind="poly", d=2, vertices=tuple((float(a), float(b)) for a, b in V))


def norm_to_string(norm):
    if norm.kind == "p":
        ptag = "inf" if math.isinf(norm.p) else repr(norm.p)
        return "p:%s" % ptag
    parts = ";".join("(%r,%r)" % (v[0], v[1]) for v in norm.vertices)
    return "poly:%s" % parts


def norm_from_string(text, d=2):
    text = text.strip()
    if text.startswith("p:"):
        body = text[2:]
        p = math.inf if body in ("inf", "Inf", "INF") else float(body)
        return lp_norm(p, d)
    if text.startswith("poly:"):
        verts = []
        for chunk in text[5:].split(";"):
            chunk = chunk.strip().strip("()")
            a, b = chunk.split(",")
            verts.append((float(a), float(b)))
        return polygon_norm(verts)
    raise ValueError("unrecognized norm spec %r" % text)


# ---------------------------------------------------------------------------
# norm evaluation
# ---------------------------------------------------------------------------

def _poly_facets(norm):
    """Outward facet functionals a_e with the polygon = {v : max <a_e, v> <= 1}."""
    V = norm.vertex_array()
    m = len(V)
    facets = []
    for i in range(m):
        v0, v1 = V[i], V[(i + 1) % m]
        n = np.array([v1[1] - v0[1], v0[0] - v1[0]])  # normal to the edge
        s = n @ v0
        if abs(s) < 1e-15:
            continue
        facets.append(n / s)
    return np.asarray(facets)


def primal_norm(norm, v):
    """|v| in the given norm; v may be a vector or an (n, d) batch."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if norm.kind == "p":
        if math.isinf(norm.p):
            out = np.max(np.abs(v), axis=1)
        else:
            out = np.sum(np.abs(v) ** norm.p, axis=1) ** (1.0 / norm.p)
    else:
        A = _poly_facets(norm)
        out = np.max(v @ A.T, axis=1)
    return out if out.size > 1 else float(out[0])


def dual_norm(norm, omega):
    """Dual norm |omega|_* = sup over the unit ball of omega(v)."""
    w = np.atleast_2d(np.asarray(omega, dtype=float))
    if norm.kind == "p":
        q = norm.q
        if math.isinf(q):
            out = np.max(np.abs(w), axis=1)
        elif q == 1.0:
            out = np.sum(np.abs(w), axis=1)
        else:
            out = np.sum(np.abs(w) ** q, axis=1) ** (1.0 / q)
    else:
        V = norm.vertex_array()
        out = np.max(w @ V.T, axis=1)
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# inverse duality map and gradient sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientSet:
    """Vertex representation of Dual^-1(omega).

    For strictly convex norms this is a single vector; otherwise the set is
    the convex hull of the listed vertices (a face of a scaled ball).  Every
    vertex v satisfies omega(v) = |omega|_*^2 and |v| = |omega|_*.
    """

    vertices: tuple
    dual_value: float

    @property
    def is_singleton(self):
        return len(self.vertices) == 1

    def vertex_array(self):
        return np.asarray(self.vertices, dtype=float)


def _sign_patterns(k):
    """All k-vectors with entries +-1, in deterministic order."""
    if k == 0:
        return np.zeros((1, 0))
    grid = np.indices((2,) * k).reshape(k, -1).T
    return 1.0 - 2.0 * grid


def duality_map_inverse(norm, omega):
    """The set of vectors v with Dual(v) containing omega.

    Returns a GradientSet; {0} when omega = 0.  Polygonal and non-strictly
    convex p-norms produce faces, enumerated by their vertices.
    """
    w = np.asarray(omega, dtype=float).ravel()
    ns = dual_norm(norm, w)
    if ns <= 0.0:
        return GradientSet(vertices=(tuple(np.zeros(norm.d)),), dual_value=0.0)
    if norm.kind == "p":
        p = norm.p
        if 1.0 < p < math.inf:
            q = norm.q
            v = ns ** (2.0 - q) * np.abs(w) ** (q - 1.0) * np.sign(w)
            return GradientSet(vertices=(tuple(v),), dual_value=ns)
        if math.isinf(p):
            # Dual is l^1; the face fixes sign(w_i) where w_i != 0 and leaves
            # zero coordinates free in [-1, 1], all scaled by |w|_1.
            zero = np.abs(w) <= TIE_RTOL * np.max(np.abs(w))
            base = np.sign(w) * ~zero
            patterns = _sign_patterns(int(np.sum(zero)))
            verts = []
            for pat in patterns:
                v = base.copy()
                v[zero] = pat
                verts.append(tuple(ns * v))
            return GradientSet(vertices=tuple(verts), dual_value=ns)
        # p = 1: dual is l^inf; face spanned by the argmax coordinates.
        amax = np.max(np.abs(w))
        active = np.abs(w) >= amax * (1.0 - TIE_RTOL)
        verts = []
        for j in np.flatnonzero(active):
            v = np.zeros(norm.d)
            v[j] = ns * np.sign(w[j])
            verts.append(tuple(v))
        return GradientSet(vertices=tuple(verts), dual_value=ns)
    # Polygon: active vertices of the unit ball, scaled by |w|_*.
    V = norm.vertex_array()
    scores = V @ w
    active = scores >= ns * (1.0 - TIE_RTOL)
    verts = tuple(tuple(ns * v) for v in V[active])
    return GradientSet(vertices=verts, dual_value=ns)


def young_gap(norm, omega, v):
    """Slack of the Young inequality |omega|_*^2/2 + |v|^2/2 - omega(v) >= 0."""
    w = np.asarray(omega, dtype=float).ravel()
    vv = np.asarray(v, dtype=float).ravel()
    return 0.5 * dual_norm(norm, w) ** 2 + 0.5 * primal_norm(norm, vv) ** 2 - float(w @ vv)


def d_pm_via_gradient_set(norm, Df, Dg, sign=+1):
    """Extreme pairing of Df against the gradient set of g.

    sign +1 gives the maximum over Dual^-1(Dg), sign -1 the minimum.
    """
    gs = duality_map_inverse(norm, Dg)
    vals = gs.vertex_array() @ np.asarray(Df, dtype=float).ravel()
    return float(np.max(vals) if sign > 0 else np.min(vals))


# ---------------------------------------------------------------------------
# difference-quotient route (cancellation-free)
# ---------------------------------------------------------------------------

def _dual_sq_diff(norm, w, b, eps):
    """|w + eps b|_*^2 - |w|_*^2 without catastrophic cancellation.

    w, b are (n, d) batches; eps is a signed scalar.  Each norm family gets
    its own expansion; all of them keep the difference assembled from terms
    that are exactly zero at eps = 0.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if norm.kind == "p":
        q = norm.q
        if q == 2.0:
            return 2.0 * eps * np.sum(w * b, axis=1) + eps * eps * np.sum(b * b, axis=1)
        if q == 1.0:
            return _abs_sum_sq_diff(w, b, eps)
        if math.isinf(q):
            return _max_abs_sq_diff(w, b, eps)
        return _power_sum_sq_diff(w, b, eps, q)
    V = norm.vertex_array()
    scores = w @ V.T
    rates = b @ V.T
    return _max_affine_sq_diff(scores, rates, eps)


def _signed_abs_diff(r, s, b, eps):
    """|w + eps b| - |w| per entry, with r = |w| and s = sign(w).

    Away from a sign crossing the difference is eps*b*s exactly; if the
    perturbed entry crosses zero it becomes -2r - eps*b*s.
    """
    step = eps * b * s
    out = np.where(r + step < 0.0, -2.0 * r - step, step)
    return np.where(r == 0.0, np.abs(eps * b), out)


def _abs_sum_sq_diff(w, b, eps):
    """Dual l^1: N = sum |w_i|; returns N(eps)^2 - N^2 stably."""
    r = np.abs(w)
    s = np.sign(w)
    n0 = np.sum(r, axis=1)
    dn = np.sum(_signed_abs_diff(r, s, b, eps), axis=1)
    return dn * (dn + 2.0 * n0)


def _max_abs_sq_diff(w, b, eps):
    """Dual l^inf: N = max |w_i|."""
    r = np.abs(w)
    s = np.sign(w)
    n0 = np.max(r, axis=1)
    # term_i = |w_i + eps b_i| - n0, exact at the argmax when eps = 0
    c = r - n0[:, None]
    t = np.where(r > 0.0, eps * b * s, np.abs(eps * b))
    term = c + t
    shifted = r + eps * b * s
    crossed = (r > 0.0) & (shifted < 0.0)
    term = np.where(crossed, -shifted - n0[:, None], term)
    dn = np.max(term, axis=1)
    return dn * (dn + 2.0 * n0)


def _power_sum_sq_diff(w, b, eps, q):
    """Dual l^q, 1 < q < inf: N^2 = (sum |w_i|^q)^(2/q)."""
    r = np.abs(w)
    s = np.sign(w)
    S0 = np.sum(r**q, axis=1)
    out = np.empty(len(w))
    degenerate = S0 == 0.0
    # per-entry |w_i + eps b_i|^q - |w_i|^q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = eps * b * s / r
    safe = (r > 0.0) & (ratio > -0.5)
    terms = np.where(
        safe,
        r**q * np.expm1(q * np.log1p(np.where(safe, ratio, 0.0))),
        np.abs(w + eps * b) ** q - r**q,
    )
    dS = np.sum(terms, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = dS / S0
    ok = ~degenerate & (rel > -0.5)
    out[ok] = S0[ok] ** (2.0 / q) * np.expm1((2.0 / q) * np.log1p(rel[ok]))
    rest = ~degenerate & ~ok
    if np.any(rest):
        out[rest] = (S0[rest] + dS[rest]) ** (2.0 / q) - S0[rest] ** (2.0 / q)
    if np.any(degenerate):
        nb = np.sum(np.abs(eps * b[degenerate]) ** q, axis=1) ** (2.0 / q)
        out[degenerate] = nb
    return out


def _max_affine_sq_diff(scores, rates, eps):
    """Polygon dual: N(eps) = max_v (scores_v + eps rates_v)."""
    n0 = np.max(scores, axis=1)
    c = scores - n0[:, None]
    dn = np.max(c + eps * rates, axis=1)
    return dn * (dn + 2.0 * n0)


def quotient_sequence(norm, Df, Dg, sign=+1, eps_grid=None):
    """Difference quotients of the squared dual norm along the eps grid.

    For sign +1 the sequence (|D(g + eps f)|_*^2 - |Dg|_*^2) / (2 eps) is
    nonincreasing as eps decreases (convexity) and tends to dplus; for
    sign -1 the quotients at -eps are nondecreasing and tend to dminus.
    """
    if eps_grid is None:
        eps_grid = DEFAULT_EPS_GRID
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0 or np.any(eps_grid <= 0) or np.any(np.diff(eps_grid) >= 0):
        raise ValueError("eps grid must be positive and strictly decreasing")
    w = np.asarray(Dg, dtype=float).ravel()[None, :]
    bvec = np.asarray(Df, dtype=float).ravel()[None, :]
    out = np.empty(eps_grid.size)
    for k, eps in enumerate(eps_grid):
        e = sign * float(eps)
        out[k] = _dual_sq_diff(norm, w, bvec, e)[0] / (2.0 * e)
    return out


def d_pm_via_difference_quotient(norm, Df, Dg, sign=+1, eps_grid=None, check_tol=1e-10):
    """One-sided pairing as the monotone limit of dual-norm quotients.

    Returns the final (certified one-sided) quotient.  A monotonicity
    violation beyond check_tol indicates a dual-norm bug and raises.
    """
    seq = quotient_sequence(norm, Df, Dg, sign=sign, eps_grid=eps_grid)
    scale = max(1.0, float(np.max(np.abs(seq))))
    diffs = np.diff(seq)
    if sign > 0:
        worst = float(np.max(diffs)) if diffs.size else 0.0
    else:
        worst = float(np.max(-diffs)) if diffs.size else 0.0
    if worst > check_tol * scale:
        raise RuntimeError(
            "difference quotients not monotone (violation %.3e); dual norm suspect" % worst
        )
    return float(seq[-1])


def d_pm_batch(norm, Df, Dg):
    """Vectorized gradient-set pairings for (n, d) batches.

    Returns (dplus, dminus) arrays.  Mirrors d_pm_via_gradient_set but
    avoids per-sample vertex enumeration for the common families.
    """
    Df = np.atleast_2d(np.asarray(Df, dtype=float))
    Dg = np.atleast_2d(np.asarray(Dg, dtype=float))
    n = len(Df)
    ns = np.atleast_1d(dual_norm(norm, Dg))
    if norm.kind == "p" and 1.0 < norm.p < math.inf:
        q = norm.q
        with np.errstate(divide="ignore", invalid="ignore"):
            v = ns[:, None] ** (2.0 - q) * np.abs(Dg) ** (q - 1.0) * np.sign(Dg)
        v = np.where(ns[:, None] > 0.0, v, 0.0)
        val = np.sum(Df * v, axis=1)
        return val, val.copy()
    if norm.kind == "p" and math.isinf(norm.p):
        amax = np.max(np.abs(Dg), axis=1)
        zero = np.abs(Dg) <= TIE_RTOL * np.where(amax > 0, amax, 1.0)[:, None]
        fixed = np.sum(Df * np.sign(Dg) * ~zero, axis=1)
        free = np.sum(np.abs(Df) * zero, axis=1)
        dplus = ns * (fixed + free)
        dminus = ns * (fixed - free)
        dplus[ns == 0.0] = 0.0
        dminus[ns == 0.0] = 0.0
        return dplus, dminus
    if norm.kind == "p":  # p = 1
        r = np.abs(Dg)
        amax = np.max(r, axis=1)
        active = r >= (amax * (1.0 - TIE_RTOL))[:, None]
        cand = ns[:, None] * np.sign(Dg) * Df
        dplus = np.max(np.where(active, cand, -np.inf), axis=1)
        dminus = np.min(np.where(active, cand, np.inf), axis=1)
        dplus[amax == 0.0] = 0.0
        dminus[amax == 0.0] = 0.0
        return dplus, dminus
    V = norm.vertex_array()
    scores = Dg @ V.T
    pair = Df @ V.T
    active = scores >= (ns * (1.0 - TIE_RTOL))[:, None]
    dplus = ns * np.max(np.where(active, pair, -np.inf), axis=1)
    dminus = ns * np.min(np.where(active, pair, np.inf), axis=1)
    dplus[ns == 0.0] = 0.0
    dminus[ns == 0.0] = 0.0
    return dplus, dminus


# ---------------------------------------------------------------------------
# interval-valued Laplacian by quadrature
# ---------------------------------------------------------------------------

def laplacian_interval_normed(norm, g_field, f_field, lo, hi, cells):
    """Quadrature realization of the interval pairing on a flat box.

    Midpoint rule on a cells^d grid over the box [lo, hi]^d:

        lower = - sum D+f(grad g)(x_c) vol_c,
        upper = - sum D-f(grad g)(x_c) vol_c.

    The test field f must vanish within one cell of the box boundary;
    a support leak raises ValueError.
    """
    d = norm.d
    lo = float(lo)
    hi = float(hi)
    cells = int(cells)
    step = (hi - lo) / cells
    axis = lo + step * (np.arange(cells) + 0.5)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    fvals = np.asarray(f_field(pts), dtype=float)
    margin = np.min(np.minimum(pts - lo, hi - pts), axis=1)
    leak = np.abs(fvals) > 1e-14 * max(1.0, np.max(np.abs(fvals)))
    if np.any(leak & (margin < 1.5 * step)):
        raise ValueError("test field support leaks to the quadrature boundary")
    Df = np.asarray(f_field.grad(pts), dtype=float)
    Dg = np.asarray(g_field.grad(pts), dtype=float)
    dplus, dminus = d_pm_batch(norm, Df, Dg)
    vol = step**d
    lower = -float(np.sum(dplus)) * vol
    upper = -float(np.sum(dminus)) * vol
    return lower, upper
