"""Independent reference implementations used to check the package.

Everything in this module is deliberately written from first principles and
shares no code with ``mmscalc``: exact rational min-cost flow for transport,
high-precision distortion coefficients through mpmath, dense double-loop
versions of slopes and Laplacians, and exact rational difference quotients
for the one-sided directional derivatives. Slow is fine here; these run on
tiny instances only.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath as mp
import numpy as np

__all__ = [
    "exact_transport",
    "w_q_1d",
    "tau_hp",
    "sigma_hp",
    "tau_tilde_fd",
    "sigma_tilde_fd",
    "slope_dense",
    "cheeger_dense",
    "dirichlet_dense",
    "graph_laplacian_dense",
    "gamma_dense",
    "gamma2_dense",
    "c_transform_dense",
    "dpm_exact_rational",
    "HAND_VALUES",
]

# Hand-derived constants frozen before the corresponding implementations were
# written.  Each entry records the instance it belongs to.
HAND_VALUES = {
    # Two-node graph, unit edge weight, unit masses, implicit Euler step
    # tau = 1 from f = (1, 0): solve [[2, -1], [-1, 2]] x = (1, 0).
    "heat_step_two_node": (2.0 / 3.0, 1.0 / 3.0),
    # Three evenly spaced points 0, 1, 2; mu = delta_0, nu = (delta_1 + delta_2)/2,
    # quadratic cost: the plan is forced, value = 0.5 * 1 + 0.5 * 4.
    "w2_squared_three_point_line": 2.5,
    # Unit-weight path on {0, 1, 2}, masses 1, g = (0, 1, 4):
    # (Lg)(1) = (0 - 1) + (4 - 1).
    "graph_laplacian_path_midpoint": 2.0,
    # Unit edge, f = g = (0, 1): E(f, g) with each unordered edge counted once,
    # fixed by <f, Lg>_m = -E(f, g) against the stencil above.
    "dirichlet_two_node": 1.0,
    # Sup-norm plane, covector (1, 0): the gradient set is the segment between
    # these two vertices.
    "linf_gradient_set_x1": ((1.0, 1.0), (1.0, -1.0)),
    # Sup-norm plane, Dg = (1, 0), Df = (a, b): one-sided values a + |b|, a - |b|.
    "linf_dpm": lambda a, b: (a + abs(b), a - abs(b)),
}


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

def exact_transport(cost, mu, nu):
    """Exact optimal transport on a tiny bipartite instance.

    Successive shortest augmenting paths on the residual network, all
    arithmetic in ``Fraction`` (floats convert exactly), so the returned
    optimum is the exact optimum of the given float data.

    Parameters
    ----------
    cost : (m, k) array-like
        Transport cost per unit mass.
    mu, nu : array-like
        Nonnegative marginals with equal totals.

    Returns
    -------
    value : Fraction
        Minimal total cost.
    plan : dict
        Sparse plan ``{(i, j): Fraction mass}``.
    """
    cost = [[Fraction(float(c)) for c in row] for row in np.atleast_2d(cost)]
    supply = [Fraction(float(x)) for x in np.asarray(mu).ravel()]
    demand = [Fraction(float(x)) for x in np.asarray(nu).ravel()]
    m, k = len(supply), len(demand)
    if sum(supply) != sum(demand):
        raise ValueError("marginal totals differ")
    flow = {}

    def residual_arcs():
        # (source_node, target_node, cost); nodes are ("s", i) / ("t", j)
        arcs = []
        for i in range(m):
            for j in range(k):
                arcs.append((("s", i), ("t", j), cost[i][j]))
                if flow.get((i, j), 0) > 0:
                    arcs.append((("t", j), ("s", i), -cost[i][j]))
        return arcs

    while True:
        seeds = [i for i in range(m) if supply[i] > 0]
        if not seeds:
            break
        # Bellman-Ford from every unsaturated source.
        dist = {("s", i): Fraction(0) for i in seeds}
        pred = {}
        arcs = residual_arcs()
        for _ in range(2 * (m + k)):
            improved = False
            for u, v, c in arcs:
                if u in dist and (v not in dist or dist[u] + c < dist[v]):
                    dist[v] = dist[u] + c
                    pred[v] = u
                    improved = True
            if not improved:
                break
        sinks = [j for j in range(k) if demand[j] > 0 and ("t", j) in dist]
        if not sinks:
            raise RuntimeError("no augmenting path; inconsistent marginals")
        j_best = min(sinks, key=lambda j: dist[("t", j)])
        # Trace the path back and find the bottleneck.
        path = []
        node = ("t", j_best)
        while node in pred:
            path.append((pred[node], node))
            node = pred[node]
        path.reverse()
        delta = min(supply[path[0][0][1]], demand[j_best])
        for u, v in path:
            if u[0] == "t":  # backward arc, limited by current flow
                delta = min(delta, flow[(v[1], u[1])])
        if delta <= 0:
            raise RuntimeError("degenerate augmentation")
        for u, v in path:
            if u[0] == "s":
                key = (u[1], v[1])
                flow[key] = flow.get(key, Fraction(0)) + delta
            else:
                key = (v[1], u[1])
                flow[key] = flow[key] - delta
        supply[path[0][0][1]] -= delta
        demand[j_best] -= delta
        flow = {key: val for key, val in flow.items() if val != 0}

    value = sum(cost[i][j] * val for (i, j), val in flow.items())
    return value, flow


def w_q_1d(x, mu, nu, q):
    """Exact q-cost transport on the line through the monotone coupling.

    The monotone (quantile) coupling is optimal for strictly convex costs,
    which covers ``|x - y|^q`` with q > 1. Exact in rational arithmetic.
    """
    order = np.argsort(np.asarray(x, dtype=float), kind="stable")
    xs = [Fraction(float(x[i])) for i in order]
    a = [Fraction(float(mu[i])) for i in order]
    b = [Fraction(float(nu[i])) for i in order]
    if sum(a) != sum(b):
        raise ValueError("marginal totals differ")
    cost = Fraction(0)
    i = j = 0
    ra, rb = a[0], b[0]
    while True:
        step = min(ra, rb)
        if step > 0:
            gap = abs(float(xs[i] - xs[j])) ** q
            cost += step * Fraction(gap)
        ra -= step
        rb -= step
        if ra == 0:
            i += 1
            if i == len(xs):
                break
            ra = a[i]
        if rb == 0:
            j += 1
            rb = b[j]
    return cost


# ---------------------------------------------------------------------------
# distortion coefficients
# ---------------------------------------------------------------------------

def _sin_ratio(kappa, t, theta):
    """sin(t theta sqrt(kappa)) / sin(theta sqrt(kappa)) for signed kappa."""
    if kappa > 0:
        root = mp.sqrt(kappa)
        return mp.sin(t * theta * root) / mp.sin(theta * root)
    if kappa < 0:
        root = mp.sqrt(-kappa)
        return mp.sinh(t * theta * root) / mp.sinh(theta * root)
    return mp.mpf(t)


def sigma_hp(K, N, t, theta, dps=40):
    """High-precision sigma coefficient (no volume prefactor, modulus K/N)."""
    with mp.workdps(dps):
        K, N, t, theta = mp.mpf(K), mp.mpf(N), mp.mpf(t), mp.mpf(theta)
        if theta == 0:
            return mp.mpf(t)
        if K > 0 and K * theta**2 >= N * mp.pi**2:
            return mp.inf if 0 < t < 1 else mp.mpf(t)
        return _sin_ratio(K / N, t, theta)


def tau_hp(K, N, t, theta, dps=40):
    """High-precision tau coefficient (volume prefactor, modulus K/(N-1))."""
    with mp.workdps(dps):
        K, N, t, theta = mp.mpf(K), mp.mpf(N), mp.mpf(t), mp.mpf(theta)
        if N == 1:
            if K > 0:
                raise ValueError("tau undefined for N = 1, K > 0")
            return mp.mpf(t)
        if theta == 0:
            return mp.mpf(t)
        if K > 0 and K * theta**2 >= (N - 1) * mp.pi**2:
            return mp.inf if 0 < t < 1 else mp.mpf(t)
        ratio = _sin_ratio(K / (N - 1), t, theta)
        return t ** (1 / N) * ratio ** (1 - 1 / N)


def tau_tilde_fd(K, N, theta, step=mp.mpf("1e-12"), dps=60):
    """Finite-difference oracle for the derivative coefficient of tau.

    Evaluates (tau^(1) - tau^(1-s))/s at tiny s in high precision; this is
    the defining limit, independent of any closed form.
    """
    with mp.workdps(dps):
        s = mp.mpf(step)
        return (tau_hp(K, N, 1, theta, dps=dps) - tau_hp(K, N, 1 - s, theta, dps=dps)) / s


def sigma_tilde_fd(K, N, theta, step=mp.mpf("1e-12"), dps=60):
    with mp.workdps(dps):
        s = mp.mpf(step)
        return (sigma_hp(K, N, 1, theta, dps=dps) - sigma_hp(K, N, 1 - s, theta, dps=dps)) / s


# ---------------------------------------------------------------------------
# dense slope / Laplacian references
# ---------------------------------------------------------------------------

def slope_dense(dist, h, f, kind="full"):
    """Scale-h slope by a direct double loop over the distance matrix."""
    dist = np.asarray(dist, dtype=float)
    f = np.asarray(f, dtype=float)
    n = len(f)
    out = np.zeros(n)
    for i in range(n):
        best = 0.0
        for j in range(n):
            d = dist[i, j]
            if d <= 0.0 or d > h:
                continue
            df = f[j] - f[i]
            if kind == "full":
                val = abs(df) / d
            elif kind == "asc":
                val = max(df, 0.0) / d
            elif kind == "desc":
                val = max(-df, 0.0) / d
            else:
                raise ValueError(kind)
            best = max(best, val)
        out[i] = best
    return out


def cheeger_dense(dist, h, weight, f, p):
    s = slope_dense(dist, h, f, "full")
    return float(np.sum(s**p * np.asarray(weight)) / p)


def dirichlet_dense(edges, edge_weight, f, g):
    """Edge Dirichlet form, each unordered edge once."""
    total = 0.0
    for (a, b), w in zip(edges, edge_weight):
        total += w * (f[a] - f[b]) * (g[a] - g[b])
    return total


def graph_laplacian_dense(n, edges, edge_weight, mass):
    L = np.zeros((n, n))
    for (a, b), w in zip(edges, edge_weight):
        L[a, a] -= w
        L[a, b] += w
        L[b, b] -= w
        L[b, a] += w
    return L / np.asarray(mass, dtype=float)[:, None]


def gamma_dense(L, f, g):
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    return 0.5 * (L @ (f * g) - f * (L @ g) - g * (L @ f))


def gamma2_dense(L, f):
    f = np.asarray(f, dtype=float)
    gff = gamma_dense(L, f, f)
    return 0.5 * (L @ gff - 2.0 * gamma_dense(L, f, L @ f))


def c_transform_dense(dist, phi):
    """phi^c(y) = min_x d(x, y)^2 / 2 - phi(x), direct double loop."""
    dist = np.asarray(dist, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = dist.shape[0]
    out = np.empty(n)
    for j in range(n):
        out[j] = min(0.5 * dist[i, j] ** 2 - phi[i] for i in range(n))
    return out


# ---------------------------------------------------------------------------
# exact one-sided directional derivatives
# ---------------------------------------------------------------------------

def dpm_exact_rational(dist, h, f, g, index):
    """One-sided derivatives of the local slope, from the definition.

    Computes slope(g + eps f) at the given point exactly in rational
    arithmetic for two tiny eps of either sign; since the slope is a maximum
    of absolute-value-affine functions of eps, the difference quotient is
    exactly linear below the smallest breakpoint, which the two evaluations
    certify. Returns ``(d_plus, d_minus)`` in the ratio normalization
    slope * (one-sided slope derivative); both are Fractions.
    """
    dist = np.asarray(dist, dtype=float)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    nbrs = [
        j
        for j in range(len(f))
        if 0.0 < dist[index, j] <= h
    ]
    if not nbrs:
        return Fraction(0), Fraction(0)
    a = [Fraction(float(g[j])) - Fraction(float(g[index])) for j in nbrs]
    b = [Fraction(float(f[j])) - Fraction(float(f[index])) for j in nbrs]
    d = [Fraction(float(dist[index, j])) for j in nbrs]

    def slope(eps):
        return max(abs(ai + eps * bi) / di for ai, bi, di in zip(a, b, d))

    s0 = slope(Fraction(0))
    if s0 == 0:
        return Fraction(0), Fraction(0)

    out = []
    for sign in (1, -1):
        e1 = Fraction(sign, 2**60)
        e2 = Fraction(sign, 2**80)
        q1 = (slope(e1) - s0) / e1
        q2 = (slope(e2) - s0) / e2
        if q1 != q2:
            # still above a breakpoint; go smaller
            e1, e2 = e2, Fraction(sign, 2**120)
            q1 = (slope(e1) - s0) / e1
            q2 = (slope(e2) - s0) / e2
            if q1 != q2:
                raise RuntimeError("breakpoint below 2^-120; data degenerate")
        out.append(s0 * q1)
    return out[0], out[1]
