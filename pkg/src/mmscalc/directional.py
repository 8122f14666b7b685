"""One-sided derivatives of f along the gradient of g.

At each point the slope of g is a maximum of finitely many difference
quotients.  Perturbing g by eps f moves each quotient at a linear rate,
so eps -> slope(g + eps f) is piecewise affine and convex; its one-sided
derivatives at 0 are attained on the active quotients:

    dplus  = slope(g) * max over active neighbors of the signed rate
    dminus = slope(g) * min over active neighbors of the signed rate

with the signed rate sign(g(y) - g(x)) (f(y) - f(x)) / d(x, y), read as
+-|f(y) - f(x)| / d on neighbors where g(y) = g(x).  The exponent p
enters only through the factor slope^(p-2).

The same quantities are recovered independently as monotone limits of
difference quotients of slope(g + eps f)^p / p along a dyadic eps grid;
the quotient arithmetic is cancellation-free, so the two routes can be
compared at eps = 2^-40 to full precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .slopes import pair_arrays, row_max

__all__ = [
    "DirectionalField",
    "d_pm_exact",
    "d_pm_sweep",
    "chain_rule_check",
    "leibniz_check",
    "strict_convexity_probe",
    "linearity_check",
    "SLOPE_FLOOR",
    "ACTIVE_RTOL",
]

# Points with slope(g) at or below this are reported as 0 on both sides.
SLOPE_FLOOR = 1e-12

# Relative tie tolerance for the active quotient set.
ACTIVE_RTOL = 1e-12

SWEEP_EPS_GRID = 0.5 ** np.arange(1, 41)


@dataclass
class DirectionalField:
    """One-sided derivative pair with the slope field they scale with."""

    dplus: np.ndarray
    dminus: np.ndarray
    slope: np.ndarray
    p: float = 2.0

    @property
    def gap(self):
        return self.dplus - self.dminus


def _pair_data(space, f, g):
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    G = space.graph()
    ii, jj, dd = pair_arrays(space)
    a = g[jj] - g[ii]
    b = f[jj] - f[ii]
    return G, ii, a, b, dd


def _one_sided_core(indptr, ii, a, b, d, p=2.0):
    """Active-set evaluation of (dplus, dminus, slope) from pair increments.

    a and b are the per-pair increments of g and f; arbitrary b (such as
    products of increments) are allowed, which the product rule uses.
    """
    r = np.abs(a) / d
    s0 = row_max(r, indptr)
    active = r >= (s0 * (1.0 - ACTIVE_RTOL))[ii]
    sa = np.sign(a)
    base = b / d
    zero_a = a == 0.0
    t_right = np.where(zero_a, np.abs(base), sa * base)
    t_left = np.where(zero_a, -np.abs(base), sa * base)
    rate_plus = row_max(np.where(active, t_right, -np.inf), indptr, fill=-np.inf)
    rate_minus = -row_max(np.where(active, -t_left, -np.inf), indptr, fill=-np.inf)
    live = s0 > SLOPE_FLOOR
    scale = np.where(live, s0, 1.0) ** (p - 1.0)
    dplus = np.where(live, scale * rate_plus, 0.0)
    dminus = np.where(live, scale * rate_minus, 0.0)
    return dplus, dminus, s0


def d_pm_exact(space, f, g, p=2.0):
    """Active-set route: exact one-sided derivatives at every point."""
    G, ii, a, b, dd = _pair_data(space, f, g)
    dplus, dminus, s0 = _one_sided_core(G.indptr, ii, a, b, dd, p=p)
    return DirectionalField(dplus=dplus, dminus=dminus, slope=s0, p=p)


def _slope_shift(indptr, ii, a, b, d, s0, eps):
    """slope(g + eps f) - slope(g) per point, assembled from exact terms.

    Per pair the shifted quotient minus s0 is c + eps * t away from a sign
    crossing (c = |a|/d - s0, zero at the active pairs) and collapses to
    -(|a|/d + eps * t) - s0 when a + eps b crosses zero.
    """
    r = np.abs(a) / d
    c = r - s0[ii]
    sa = np.sign(a)
    t = sa * b / d
    zero_a = a == 0.0
    t = np.where(zero_a, np.sign(eps) * np.abs(b) / d, t)
    delta = c + eps * t
    crossed = ~zero_a & ((a + eps * b) * sa < 0.0)
    if np.any(crossed):
        delta = np.where(crossed, -(r + eps * t) - s0[ii], delta)
    return row_max(delta, indptr, fill=0.0)


def _power_quotient(s0, delta, p, eps_signed):
    """((s0 + delta)^p - s0^p) / (p * eps) without cancellation."""
    if p == 2.0:
        return delta * (2.0 * s0 + delta) / (2.0 * eps_signed)
    out = np.empty_like(s0)
    pos = s0 > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(pos, delta / np.where(pos, s0, 1.0), 0.0)
    safe = pos & (rel > -0.5)
    out[safe] = s0[safe] ** p * np.expm1(p * np.log1p(rel[safe])) / (p * eps_signed)
    rest = pos & ~safe
    if np.any(rest):
        out[rest] = ((s0[rest] + delta[rest]) ** p - s0[rest] ** p) / (p * eps_signed)
    zero = ~pos
    if np.any(zero):
        out[zero] = np.maximum(delta[zero], 0.0) ** p / (p * eps_signed)
    return out


def d_pm_sweep(space, f, g, p=2.0, eps_grid=None, check_tol=1e-10, keep_sequences=False):
    """Difference-quotient route with a certified monotone enclosure.

    Sweeps slope(g + eps f)^p / p quotients over the eps grid in both
    directions.  Convexity makes the forward quotients nonincreasing and
    the backward ones nondecreasing as eps shrinks; the last terms bound
    [dminus, dplus] from outside.  A monotonicity violation beyond
    check_tol (relative) raises, since it can only come from a defective
    slope evaluation.
    """
    if eps_grid is None:
        eps_grid = SWEEP_EPS_GRID
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0 or np.any(eps_grid <= 0) or np.any(np.diff(eps_grid) >= 0):
        raise ValueError("eps grid must be positive and strictly decreasing")
    G, ii, a, b, dd = _pair_data(space, f, g)
    r = np.abs(a) / dd
    s0 = row_max(r, G.indptr)
    q_plus = np.empty((eps_grid.size, space.n))
    q_minus = np.empty((eps_grid.size, space.n))
    for k, eps in enumerate(eps_grid):
        dp = _slope_shift(G.indptr, ii, a, b, dd, s0, float(eps))
        dm = _slope_shift(G.indptr, ii, a, b, dd, s0, -float(eps))
        q_plus[k] = _power_quotient(s0, dp, p, float(eps))
        q_minus[k] = _power_quotient(s0, dm, p, -float(eps))
    scale = max(1.0, float(np.max(np.abs(q_plus))), float(np.max(np.abs(q_minus))))
    viol_plus = float(np.max(np.diff(q_plus, axis=0))) if eps_grid.size > 1 else 0.0
    viol_minus = float(np.max(-np.diff(q_minus, axis=0))) if eps_grid.size > 1 else 0.0
    worst = max(viol_plus, viol_minus)
    if worst > check_tol * scale:
        raise RuntimeError(
            "quotient sweep lost monotonicity (violation %.3e); slope evaluation suspect" % worst)
    dead = s0 <= SLOPE_FLOOR
    dplus = np.where(dead, 0.0, q_plus[-1])
    dminus = np.where(dead, 0.0, q_minus[-1])
    out = {
        "dplus": dplus,
        "dminus": dminus,
        "slope": s0,
        "eps_grid": eps_grid,
        "monotone_violation": worst,
        "enclosure_width": float(np.max(q_plus[-1] - q_minus[-1])),
    }
    if keep_sequences:
        out["q_plus"] = q_plus
        out["q_minus"] = q_minus
    return out


# ---------------------------------------------------------------------------
# calculus identities
# ---------------------------------------------------------------------------

def _straddle_mask(space, values, phi, margin=1e-9):
    """Points whose h-neighborhood meets a kink of the piecewise map."""
    G = space.graph()
    ii, jj, _ = pair_arrays(space)
    piece = phi.piece(values)
    mismatch = piece[ii] != piece[jj]
    bad = np.zeros(space.n, dtype=bool)
    np.logical_or.at(bad, ii, mismatch)
    breaks = np.asarray(phi.breaks, dtype=float)
    if breaks.size:
        near = np.min(np.abs(values[:, None] - breaks[None, :]), axis=1) < margin
        bad |= near
        near_pair = near[jj]
        np.logical_or.at(bad, ii, near_pair)
    return bad


def chain_rule_check(space, f, g, phi, side="inner", p=2.0, tol=1e-9):
    """Exactness of the one-sided chain rule away from kink points.

    side "inner" compares D(phi o f) along grad g with phi' D f, the side
    of D chosen by the sign of phi'; side "outer" rescales the gradient:
    D f along grad(phi o g) equals |phi'|^(p-2) phi' D f along grad g.
    Piecewise-affine phi makes both exact off the straddling set, which is
    excluded and reported; smooth phi downgrades to a residual report.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    base = d_pm_exact(space, f, g, p=p)
    exact_mode = hasattr(phi, "breaks")
    inner = side == "inner"
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    values = f if inner else g
    if exact_mode:
        mask = ~_straddle_mask(space, values, phi)
        deriv = phi.deriv(values, side=1)
    else:
        mask = np.ones(space.n, dtype=bool)
        deriv = phi.deriv(values)
    if inner:
        composed = d_pm_exact(space, phi(values), g, p=p)
        pred_plus = np.where(deriv >= 0, deriv * base.dplus, deriv * base.dminus)
        pred_minus = np.where(deriv >= 0, deriv * base.dminus, deriv * base.dplus)
    else:
        composed = d_pm_exact(space, f, phi(values), p=p)
        coef = np.abs(deriv) ** (p - 2.0) * deriv if p != 2.0 else deriv
        pred_plus = np.where(deriv >= 0, coef * base.dplus, coef * base.dminus)
        pred_minus = np.where(deriv >= 0, coef * base.dminus, coef * base.dplus)
    err_plus = np.abs(composed.dplus - pred_plus)
    err_minus = np.abs(composed.dminus - pred_minus)
    scale = max(1.0, float(np.max(np.abs(pred_plus[mask]))) if np.any(mask) else 1.0)
    report = {
        "side": side,
        "mode": "exact" if exact_mode else "residual",
        "checked_points": int(np.sum(mask)),
        "excluded_points": int(np.sum(~mask)),
        "max_err_plus": float(np.max(err_plus[mask])) if np.any(mask) else 0.0,
        "max_err_minus": float(np.max(err_minus[mask])) if np.any(mask) else 0.0,
        "scale": scale,
    }
    report["ok"] = (report["max_err_plus"] <= tol * scale
                    and report["max_err_minus"] <= tol * scale) if exact_mode else None
    return report


def leibniz_check(space, f1, f2, g, p=2.0, tol=1e-10):
    """Product rule with the exact discrete correction term.

    Per pair, the increment of f1 f2 splits as f1(x) db2 + f2(x) db1 +
    db1 db2.  Taking one-sided envelopes over the shared active set gives

        dplus(f1 f2)  <=  f1 d(s1) f2 + f2 d(s2) f1 + dplus(q)
        dminus(f1 f2) >=  f1 d(-s1) f2 + f2 d(-s2) f1 + dminus(q)

    where s_i is the sign of f_i(x) and q carries the product increments.
    Both hold to rounding error; the report also records the residual of
    the correction-free form, which decays linearly with the scale h.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    g = np.asarray(g, dtype=float)
    G, ii, a, b1, dd = _pair_data(space, f1, g)
    b2 = f2[G.indices] - f2[ii]
    prod = f1 * f2
    lhs = d_pm_exact(space, prod, g, p=p)
    base1 = d_pm_exact(space, f1, g, p=p)
    base2 = d_pm_exact(space, f2, g, p=p)
    cross_p, cross_m, _ = _one_sided_core(G.indptr, ii, a, b1 * b2, dd, p=p)
    t1 = np.where(f1 >= 0, f1 * base2.dplus, f1 * base2.dminus)
    t1_low = np.where(f1 >= 0, f1 * base2.dminus, f1 * base2.dplus)
    t2 = np.where(f2 >= 0, f2 * base1.dplus, f2 * base1.dminus)
    t2_low = np.where(f2 >= 0, f2 * base1.dminus, f2 * base1.dplus)
    upper = t1 + t2 + cross_p
    lower = t1_low + t2_low + cross_m
    scale = max(1.0, float(np.max(np.abs(upper))))
    slack_up = upper - lhs.dplus
    slack_lo = lhs.dminus - lower
    residual = np.maximum(np.abs(lhs.dplus - (t1 + t2)), np.abs(lhs.dminus - (t1_low + t2_low)))
    return {
        "min_slack_upper": float(np.min(slack_up)),
        "min_slack_lower": float(np.min(slack_lo)),
        "ok": bool(np.min(slack_up) >= -tol * scale and np.min(slack_lo) >= -tol * scale),
        "correction_free_residual": float(np.max(residual)),
        "max_correction": float(np.max(np.maximum(np.abs(cross_p), np.abs(cross_m)))),
        "scale": scale,
    }


def strict_convexity_probe(space, sample_count=20, seed=0, p=2.0, tol=1e-10):
    """Frequency of genuinely one-sided points under random data.

    Draws random field pairs and measures the gap dplus - dminus.  Spaces
    whose slope maxima are generically unique (generic data) report a
    small multivalued fraction; tie-rich geometries keep a positive one.
    """
    rng = np.random.default_rng(seed)
    gaps = []
    fractions = []
    for _ in range(int(sample_count)):
        if space.points is not None:
            from .fields import random_trig_field
            d = space.points.shape[1]
            ffield = random_trig_field(rng, d)
            gfield = random_trig_field(rng, d)
            f = ffield(space.points)
            g = gfield(space.points)
        else:
            f = rng.standard_normal(space.n)
            g = rng.standard_normal(space.n)
        res = d_pm_exact(space, f, g, p=p)
        gap = res.gap
        neg = float(np.min(gap))
        if neg < -tol * max(1.0, float(np.max(np.abs(res.dplus)))):
            raise RuntimeError("negative one-sided gap %.3e" % neg)
        gaps.append(float(np.max(gap)))
        scale = max(1.0, float(np.max(np.abs(res.dplus))))
        fractions.append(float(np.mean(gap > 1e-9 * scale)))
    return {
        "samples": int(sample_count),
        "max_gap": float(np.max(gaps)),
        "mean_gap": float(np.mean(gaps)),
        "multi_fraction_mean": float(np.mean(fractions)),
        "multi_fraction_max": float(np.max(fractions)),
    }


def linearity_check(space, f1, f2, g, alpha, beta, p=2.0, tol=1e-10):
    """Homogeneity, sub/superadditivity, and linearity on singleton sets.

    dplus is positively homogeneous and subadditive in f (dminus mirrors
    both); at points whose active quotient is unique, both sides agree and
    the map f -> dplus f is genuinely linear there.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    g = np.asarray(g, dtype=float)
    combo = d_pm_exact(space, alpha * f1 + beta * f2, g, p=p)
    r1 = d_pm_exact(space, f1, g, p=p)
    r2 = d_pm_exact(space, f2, g, p=p)

    def scaled(res, c):
        up = c * res.dplus if c >= 0 else c * res.dminus
        lo = c * res.dminus if c >= 0 else c * res.dplus
        return up, lo

    up1, lo1 = scaled(r1, alpha)
    up2, lo2 = scaled(r2, beta)
    scale = max(1.0, float(np.max(np.abs(combo.dplus))), float(np.max(np.abs(up1 + up2))))
    sub_slack = (up1 + up2) - combo.dplus
    super_slack = combo.dminus - (lo1 + lo2)
    # homogeneity, exact: dplus(alpha f1) against the scaled base values
    hom = d_pm_exact(space, alpha * f1, g, p=p)
    hom_err = float(np.max(np.abs(hom.dplus - up1)))
    # genuine linearity on the singleton-active set
    single = np.abs(r1.gap) + np.abs(r2.gap) + np.abs(combo.gap) <= 3.0 * tol * scale
    lin_err = float(np.max(np.abs(combo.dplus - (up1 + up2))[single])) if np.any(single) else 0.0
    return {
        "homogeneity_err": hom_err,
        "min_subadd_slack": float(np.min(sub_slack)),
        "min_superadd_slack": float(np.min(super_slack)),
        "singleton_fraction": float(np.mean(single)),
        "singleton_linearity_err": lin_err,
        "scale": scale,
        "ok": bool(hom_err <= tol * scale and np.min(sub_slack) >= -tol * scale
                   and np.min(super_slack) >= -tol * scale),
    }
