"""Named verification suites and their machine-readable artifacts.

Each suite builds its own spaces and inputs from a flat config mapping,
runs a batch of checks, and reports one (name, passed, residual,
tolerance) row per assertion.  The runner serializes everything
deterministically: report.json embeds the tool version and a hash of the
effective configuration, residuals.csv collects scalar diagnostics, and
plotdata/*.dat hold two-column series for external plotting.  Identical
config and seed therefore produce bit-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import (bishop_gromov_check, busemann, cd_check,
                        internal_energy, laplacian_comparison_experiment,
                        mcp_variant, tau, tau_sigma_relation_check, tau_tilde)
from .fields import random_trig_field
from .flow import (dissipation_extrapolated, entropy_dissipation_check,
                   heat_flow_p, semigroup_identities, wasserstein_speed_check)
from .laplace import gamma2, graph_laplacian, leibniz_laplacian_check
from .norms import (d_pm_via_difference_quotient, d_pm_via_gradient_set,
                    lp_norm)
from .slopes import dirichlet_form, local_slope
from .spaces import (build_cycle_graph, build_euclidean_grid,
                     build_model_disk, build_sphere, from_distance_matrix)
from .transport import kantorovich_potential, metric_brenier_check, wq_distance

try:
    from importlib.metadata import version as _dist_version
    VERSION = _dist_version("mmscalc")
except Exception:  # pragma: no cover - source tree without install
    VERSION = "0.1.0"


class ConfigError(ValueError):
    """Bad experiment name or malformed configuration value."""


@dataclass
class ExperimentResult:
    """Assertions, scalar diagnostics, and plot series of one suite run."""

    name: str
    config: dict
    assertions: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    plotdata: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(ok for _, ok, _, _ in self.assertions)

    def add(self, name, passed, residual, tolerance):
        self.assertions.append((str(name), bool(passed), float(residual),
                                float(tolerance)))

    def row(self, key, index, value):
        self.residuals.append((str(key), int(index), float(value)))


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _coerce(raw, default, key):
    """Parse a raw (usually string) config value against its default's type."""
    try:
        if isinstance(default, bool):
            if isinstance(raw, str):
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return bool(raw)
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, str):
            return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("bad value %r for key %r" % (raw, key)) from exc
    return raw


def effective_config(name, config=None, seed=None):
    """Merge user overrides into the suite defaults, with type coercion.

    Unknown keys are rejected; a runner-level seed fills the suite's
    seed slot only when the user did not pin one explicitly.
    """
    if name not in EXPERIMENTS:
        raise ConfigError("unknown experiment %r" % name)
    defaults = EXPERIMENTS[name][1]
    out = dict(defaults)
    for key, raw in (config or {}).items():
        if key not in defaults:
            raise ConfigError("unknown key %r for experiment %r" % (key, name))
        out[key] = _coerce(raw, defaults[key], key)
    if seed is not None and "seed" in defaults and "seed" not in (config or {}):
        out["seed"] = int(seed)
    return out


def _parse_grid(text):
    parts = str(text).lower().split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError("bad grid spec %r" % text) from exc
    if not dims or any(d < 2 for d in dims):
        raise ConfigError("grid dims must all be >= 2, got %r" % text)
    return dims


def _centered_dims(extent, spacing, d):
    """Odd point counts spanning [-extent, extent] in each of d axes."""
    n = 2 * int(round(extent / spacing)) + 1
    return [n] * d


def _center_index(space):
    return int(np.argmin(np.sum(space.points**2, axis=1)))


def _ring_density(space, x0, center, width, inner, outer):
    """Lipschitz radial bump supported on an annulus around x0."""
    d = space.dist_rows(x0)[0]
    rho = np.exp(-0.5 * ((d - center) / width) ** 2) * (d / (inner + 0.22)) ** 2
    rho[(d < inner) | (d > outer)] = 0.0
    rho[x0] = 0.0
    return d, rho


def _radial_bump(d, center, width):
    z = (d - center) / width
    out = np.zeros_like(d)
    mask = np.abs(z) < 1.0
    out[mask] = (1.0 - z[mask] ** 2) ** 2
    return out


# ---------------------------------------------------------------------------
# individual suites
# ---------------------------------------------------------------------------

_BG_DEFAULTS = {"model": "all", "spacing": 0.05, "N": 2.0, "tol": 0.05}


def _suite_bishop_gromov(cfg):
    res = ExperimentResult("bishop-gromov", cfg)
    models = ("euclidean", "sphere") if cfg["model"] == "all" else (cfg["model"],)
    for model in models:
        if model == "euclidean":
            sp = build_euclidean_grid(_centered_dims(2.0, cfg["spacing"], 2),
                                      cfg["spacing"])
            x0, K, r_grid, R = _center_index(sp), 0.0, [0.4, 0.8, 1.2, 1.6], 1.9
        elif model == "sphere":
            sp = build_sphere(2, cfg["spacing"])
            x0 = int(np.argmax(sp.points[:, 2]))
            K, r_grid, R = 1.0, [0.5, 1.0, 1.5, 2.0], 2.8
        else:
            raise ConfigError("bishop-gromov model must be euclidean|sphere|all")
        rep = bishop_gromov_check(sp, x0, r_grid, R, K, cfg["N"], tol=cfg["tol"])
        slack = rep.residuals["slack"]
        res.add("%s volume ratios dominate the model" % model, rep.passed,
                float(np.min(slack)), cfg["tol"])
        trivial = bishop_gromov_check(sp, x0, [R], R, K, cfg["N"], tol=0.0)
        res.add("%s r=R ratio is exactly one" % model,
                trivial.residuals["slack"][0] == 0.0,
                float(trivial.residuals["slack"][0]), 0.0)
        for i, r in enumerate(r_grid):
            res.row("%s_measured" % model, i, rep.residuals["measured"][i])
            res.row("%s_model" % model, i, rep.residuals["model"][i])
            res.row("%s_slack" % model, i, slack[i])
        rg = np.asarray(r_grid)
        res.plotdata["%s-measured" % model] = np.column_stack(
            [rg, rep.residuals["measured"]])
        res.plotdata["%s-model" % model] = np.column_stack(
            [rg, rep.residuals["model"]])
        if model == "sphere":
            try:
                bishop_gromov_check(sp, x0, [1.0], 3.3, K, cfg["N"])
                guarded = False
            except ValueError:
                guarded = True
            res.add("sphere radius beyond the diameter bound is rejected",
                    guarded, 0.0 if guarded else 1.0, 0.0)
    return res


_BOCHNER_DEFAULTS = {"fields": 100, "seed": 0}


def _suite_bochner(cfg):
    res = ExperimentResult("bochner", cfg)
    rng = np.random.default_rng(cfg["seed"])
    k2 = from_distance_matrix([[0.0, 1.0], [1.0, 0.0]],
                              edges=(np.array([0]), np.array([1]),
                                     np.array([1.0])), name="K2")
    c4 = build_cycle_graph(4)
    for space, label in ((k2, "K2"), (c4, "C4")):
        worst = np.inf
        trace = []
        for trial in range(cfg["fields"]):
            f = rng.standard_normal(space.n)
            low = float(np.min(gamma2(space, f)))
            worst = min(worst, low)
            trace.append(low)
        res.add("Gamma2 >= 0 on %s" % label, worst >= 0.0, worst, 0.0)
        res.row("%s_gamma2_min" % label, 0, worst)
        res.plotdata["%s-gamma2" % label] = np.column_stack(
            [np.arange(len(trace), dtype=float), trace])
    grid = build_euclidean_grid([21, 21], 0.1)
    f_lin = 0.7 * grid.points[:, 0] - 0.4 * grid.points[:, 1]
    deep = grid.boundary_clearance() > 2.0 * grid.h
    g2 = gamma2(grid, f_lin)
    lin_err = float(np.max(np.abs(g2[deep])))
    res.add("Gamma2 of an affine field vanishes on the 2-collar interior",
            lin_err <= 1e-12, lin_err, 1e-12)
    res.row("grid_affine_gamma2_max", 0, lin_err)
    return res


_BRENIER_DEFAULTS = {"spacing": 0.02, "shift_cells": 24, "center": -0.4,
                     "width": 0.1, "tol": 0.05}


def _suite_brenier(cfg):
    res = ExperimentResult("brenier", cfg)
    sp = build_euclidean_grid(_centered_dims(2.0, cfg["spacing"], 1),
                              cfg["spacing"])
    x = sp.points[:, 0]
    prof = np.exp(-0.5 * ((x - cfg["center"]) / cfg["width"]) ** 2)
    mu = prof * sp.weights
    mu /= np.sum(mu)
    nu = np.roll(mu, cfg["shift_cells"])
    rep = metric_brenier_check(sp, mu, nu)
    res.add("slope of the potential matches the displacement",
            rep["rel_err_wmean"] <= cfg["tol"], rep["rel_err_wmean"], cfg["tol"])
    kp = rep["potential"]
    w2 = wq_distance(sp, mu, nu, q=2.0)
    dual_value = float(np.sum(kp.phi * mu) + np.sum(kp.psi * nu))
    ident = abs(0.5 * w2.distance**2 - dual_value)
    res.add("duality identity W2^2/2 = dual value", ident <= 1e-9, ident, 1e-9)
    res.add("duality gap closes", abs(w2.gap) <= 1e-9, abs(w2.gap), 1e-9)
    res.row("rel_err_max", 0, rep["rel_err_max"])
    res.row("rel_err_wmean", 0, rep["rel_err_wmean"])
    res.row("moved_fraction", 0, rep["moved_fraction"])
    res.row("duality_gap", 0, w2.gap)
    sl = local_slope(sp, kp.phi, "desc")
    res.plotdata["potential"] = np.column_stack([x, kp.phi])
    res.plotdata["slope"] = np.column_stack([x, sl])
    return res


_BUSEMANN_DEFAULTS = {"grid": "101x101", "spacing": 0.04}


def _suite_busemann(cfg):
    res = ExperimentResult("busemann", cfg)
    dims = _parse_grid(cfg["grid"])
    if len(dims) != 2:
        raise ConfigError("busemann needs a 2-D grid spec, got %r" % cfg["grid"])
    sp = build_euclidean_grid(dims, cfg["spacing"])
    pts = sp.points
    r1 = np.sum((pts - [0.0, 0.0]) ** 2, axis=1)
    r2 = np.sum((pts - [0.5, -0.3]) ** 2, axis=1)
    bumps = [np.maximum(1.0 - r1 / 0.8**2, 0.0) ** 2,
             np.maximum(1.0 - r2 / 0.6**2, 0.0) ** 2]
    fields, b, rep = busemann(sp, {"axis": 0, "sign": 1.0, "base": None},
                              bump_fields=bumps)
    rr = rep.residuals
    res.add("b_t nonincreasing in t", rr["monotone_slack"] <= 1e-12,
            rr["monotone_slack"], 1e-12)
    res.add("b is 1-Lipschitz", rr["lip_excess"] <= 1e-9, rr["lip_excess"], 1e-9)
    res.add("descending slope is 1 on the interior", rr["desc_err"] <= 1e-9,
            rr["desc_err"], 1e-9)
    res.add("double c-transform fixes b on its window", rr["cc_err"] <= 1e-6,
            rr["cc_err"], 1e-6)
    worst_up = max(rr["upper_pairings"]) if rr["upper_pairings"] else 0.0
    res.add("upper Laplacian pairings are nonpositive up to 1e-8",
            worst_up <= 1e-8, worst_up, 1e-8)
    lin_err = float(np.max(np.abs((b - b[0]) - (-(pts[:, 0] - pts[0, 0])))))
    res.add("b equals -x1 + const", lin_err <= 1e-8, lin_err, 1e-8)
    for key in ("monotone_slack", "lip_excess", "desc_err", "cc_err",
                "stabilization"):
        res.row(key, 0, rr[key])
    for i, up in enumerate(rr["upper_pairings"]):
        res.row("upper_pairing", i, up)
    res.row("linearity_err", 0, lin_err)
    mid = np.abs(pts[:, 1]) < 0.5 * cfg["spacing"]
    order = np.argsort(pts[mid, 0])
    res.plotdata["profile"] = np.column_stack([pts[mid, 0][order],
                                               b[mid][order]])
    return res


_CD_DEFAULTS = {"spacing": 0.02, "K": 0.0, "N": 3.0, "shift_cells": 24,
                "center": -0.4, "width": 0.1}


def _suite_cd_check(cfg):
    res = ExperimentResult("cd-check", cfg)
    sp = build_euclidean_grid(_centered_dims(2.0, cfg["spacing"], 1),
                              cfg["spacing"])
    x = sp.points[:, 0]
    prof = np.exp(-0.5 * ((x - cfg["center"]) / cfg["width"]) ** 2)
    mu = prof * sp.weights
    mu /= np.sum(mu)
    nu = np.roll(mu, cfg["shift_cells"])
    t_grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    rep = cd_check(sp, mu, nu, cfg["K"], cfg["N"], t_grid)
    slack = rep.residuals["slack"]
    lhs = rep.residuals["lhs"]
    endpoint = float(np.max(np.abs(slack[[0, -1], :])))
    res.add("endpoint slack is exactly zero", endpoint == 0.0, endpoint, 0.0)
    norm_slack = slack / np.maximum(1.0, np.abs(lhs))
    interior = float(np.min(norm_slack[1:-1, :]))
    res.add("interior convexity slack within tolerance", rep.passed, interior,
            rep.tolerances["tol"])
    n_primes = rep.meta["N_primes"]
    for j, npr in enumerate(n_primes):
        for i in range(len(t_grid)):
            res.row("slack_N%g" % npr, i, slack[i, j])
        res.plotdata["slack-N%g" % npr] = np.column_stack(
            [np.asarray(t_grid), slack[:, j]])
    res.row("duality_gap", 0, rep.meta["duality_gap"])
    return res


_COMPARISON_DEFAULTS = {"model": "all", "K": "auto", "spacing": 0.01,
                        "radius": 0.7, "N": 2.0, "t_max": 0.25,
                        "tol_rel": 0.02}

_MODEL_K = {"euclidean": 0.0, "sphere": 1.0, "hyperbolic": -1.0}


def _continuum_distance_laplacian(K, r):
    if K > 0.0:
        return math.sqrt(K) / math.tan(math.sqrt(K) * r)
    if K < 0.0:
        return math.sqrt(-K) / math.tanh(math.sqrt(-K) * r)
    return 1.0 / r


def _suite_comparison(cfg):
    res = ExperimentResult("comparison", cfg)
    if cfg["model"] == "all":
        models = ("euclidean", "sphere", "hyperbolic")
        if cfg["K"] != "auto":
            raise ConfigError("explicit K needs a single comparison model")
    else:
        models = (cfg["model"],)
    N = cfg["N"]
    for model in models:
        if model not in _MODEL_K:
            raise ConfigError(
                "comparison model must be euclidean|sphere|hyperbolic|all")
        if cfg["K"] == "auto":
            K = _MODEL_K[model]
        else:
            try:
                K = float(cfg["K"])
            except ValueError as exc:
                raise ConfigError("bad K value %r" % cfg["K"]) from exc
        sp = build_model_disk(K, cfg["radius"], cfg["spacing"])
        d, rho0 = _ring_density(sp, 0, 0.35, 0.09, 0.08,
                                cfg["radius"] - 0.04)
        bumps = [_radial_bump(d, 0.35, 0.2), _radial_bump(d, 0.45, 0.15)]
        rep = laplacian_comparison_experiment(sp, 0, K, N, rho0,
                                              t_max=cfg["t_max"],
                                              tol_rel=cfg["tol_rel"],
                                              bump_fields=bumps)
        rr = rep.residuals
        a, bb, c = rr["route_a"], rr["route_b"], rr["route_c"]
        res.add("%s chain (a) <= (b) <= (c) within tolerance" % model,
                rep.meta["chain_ok"], min(bb - a, c - bb), rep.tolerances["tol"])
        worst_bump = 0.0
        for pair, bound in rr["distq_pairs"] + rr["dist_pairs"]:
            worst_bump = max(worst_bump,
                             (pair - bound) / max(1.0, abs(bound)))
        res.add("%s distance-Laplacian bounds on bumps" % model,
                rep.meta["bumps_ok"], worst_bump, rep.tolerances["bump_tol"])
        res.row("%s_route_a" % model, 0, a)
        res.row("%s_route_b" % model, 0, bb)
        res.row("%s_route_c" % model, 0, c)
        res.row("%s_fit_curvature" % model, 0, rr["fit_curvature"])
        for i, (pair, bound) in enumerate(rr["distq_pairs"]):
            res.row("%s_distq_pair" % model, i, pair)
            res.row("%s_distq_bound" % model, i, bound)
        for i, (pair, bound) in enumerate(rr["dist_pairs"]):
            res.row("%s_dist_pair" % model, i, pair)
            res.row("%s_dist_bound" % model, i, bound)
        r_line = np.linspace(0.1, cfg["radius"] - 0.05, 56)
        bound_line = np.array([(N * tau_tilde(K, N, r) - 1.0) / r
                               for r in r_line])
        exact_line = np.array([_continuum_distance_laplacian(K, r)
                               for r in r_line])
        res.plotdata["%s-bound" % model] = np.column_stack([r_line, bound_line])
        res.plotdata["%s-continuum" % model] = np.column_stack(
            [r_line, exact_line])
    return res


_HEATFLOW_DEFAULTS = {"spacing": 0.05, "tau": 1e-3, "steps": 5, "seed": 0,
                      "speed_spacing": 0.01, "speed_tau": 0.04,
                      "speed_steps": 3}


def _suite_heatflow(cfg):
    res = ExperimentResult("heatflow", cfg)
    rng = np.random.default_rng(cfg["seed"])
    sp = build_euclidean_grid(_centered_dims(1.0, cfg["spacing"], 2),
                              cfg["spacing"])
    f0 = 1.0 + random_trig_field(rng, 2, terms=4, freq=2.0, amp=0.3)(sp.points)
    traj = heat_flow_p(sp, f0, p=2.0, tau=cfg["tau"], steps=cfg["steps"])
    masses = traj.states @ sp.weights
    drift = float(np.max(np.abs(masses - masses[0])) / abs(masses[0]))
    res.add("mass is conserved", drift <= 1e-12, drift, 1e-12)
    mins = np.min(traj.states, axis=1)
    maxs = np.max(traj.states, axis=1)
    mp_viol = max(float(np.max(-np.diff(mins))), float(np.max(np.diff(maxs))))
    res.add("maximum principle per step", mp_viol <= 1e-12, mp_viol, 1e-12)
    dis = entropy_dissipation_check(sp, traj)
    res.add("extrapolated energy production matches the form",
            dis["rel_err"] <= 1e-6, dis["rel_err"], 1e-6)
    sg = semigroup_identities(sp, [0.05, 0.1], probes=2, seed=cfg["seed"])
    sg_worst = max(sg[k] for k in ("identity", "composition", "mass",
                                   "max_principle", "selfadjoint",
                                   "commutation"))
    res.add("semigroup identities to 1e-9", sg_worst <= 1e-9, sg_worst, 1e-9)
    line = build_euclidean_grid(_centered_dims(1.0, cfg["speed_spacing"], 1),
                                cfg["speed_spacing"])
    xs = line.points[:, 0]
    rho0 = 0.05 + np.exp(-0.5 * (xs / 0.25) ** 2)
    # the speed bound compares normalized measures, so feed it a
    # probability density against the normalized weights
    rho0 /= float(rho0 @ line.weights) / float(np.sum(line.weights))
    traj1 = heat_flow_p(line, rho0, p=2.0, tau=cfg["speed_tau"],
                        steps=cfg["speed_steps"])
    sc = wasserstein_speed_check(line, traj1)
    res.add("transport speed below the slope bound",
            sc["min_rel_slack"] >= -0.02, sc["min_rel_slack"], 0.02)
    res.row("mass_drift", 0, drift)
    res.row("max_principle_violation", 0, mp_viol)
    res.row("dissipation_rel_err", 0, dis["rel_err"])
    for i, key in enumerate(("identity", "composition", "mass",
                             "max_principle", "selfadjoint", "commutation")):
        res.row("semigroup_%s" % key, 0, sg[key])
    for k in range(len(sc["speed_q"])):
        res.row("speed_q", k, sc["speed_q"][k])
        res.row("speed_bound", k, sc["bound"][k])
    energy = 0.5 * np.sum(sp.weights * traj.states**2, axis=1)
    res.plotdata["energy"] = np.column_stack([traj.times, energy])
    forms = np.array([dirichlet_form(sp, s) for s in traj.states])
    res.plotdata["dirichlet"] = np.column_stack([traj.times, forms])
    return res


_MCP_DEFAULTS = {"spacing": 0.01, "radius": 0.7, "K": 0.0, "N": 2.0}


def _suite_mcp(cfg):
    res = ExperimentResult("mcp", cfg)
    sp = build_model_disk(cfg["K"], cfg["radius"], cfg["spacing"])
    _, rho0 = _ring_density(sp, 0, 0.35, 0.09, 0.08, cfg["radius"] - 0.04)
    mu = rho0 * sp.weights
    mu /= np.sum(mu)
    t_grid = [0.0, 0.2, 0.4, 0.6, 0.8, 0.95]
    rep = mcp_variant(sp, mu, 0, cfg["K"], cfg["N"], t_grid)
    slack = rep.residuals["slack"]
    lhs = rep.residuals["lhs"]
    res.add("t=0 slack is exactly zero", slack[0] == 0.0, float(slack[0]), 0.0)
    kept = [i for i in range(len(t_grid))
            if i not in rep.meta["excluded"] and t_grid[i] > 0.0]
    norm_slack = min(slack[i] / max(1.0, abs(lhs[i])) for i in kept)
    res.add("contraction inequality up to t_cut", rep.passed, norm_slack,
            rep.tolerances["tol"])
    for i in range(len(t_grid)):
        res.row("slack", i, slack[i])
        res.row("lhs", i, lhs[i])
    res.plotdata["energy"] = np.column_stack([np.asarray(t_grid), lhs])
    res.plotdata["slack"] = np.column_stack([np.asarray(t_grid), slack])
    return res


_NORMED_DEFAULTS = {"samples": 200, "seed": 0, "tol": 1e-9}


def _suite_normed_oracle(cfg):
    res = ExperimentResult("normed-oracle", cfg)
    rng = np.random.default_rng(cfg["seed"])
    trace = None
    for p in (1.0, 2.0, 4.0, math.inf):
        for d in (2, 3):
            norm = lp_norm(p, d)
            worst = 0.0
            errs = []
            for _ in range(cfg["samples"]):
                Df = rng.standard_normal(d)
                Dg = rng.standard_normal(d)
                for sign in (+1, -1):
                    a = d_pm_via_gradient_set(norm, Df, Dg, sign=sign)
                    b = d_pm_via_difference_quotient(norm, Df, Dg, sign=sign)
                    err = abs(a - b)
                    worst = max(worst, err)
                    errs.append(err)
            label = "inf" if p == math.inf else "%g" % p
            res.add("l%s %d-D extreme pairing equals quotient limit"
                    % (label, d), worst <= cfg["tol"], worst, cfg["tol"])
            res.row("l%s_%dd_worst" % (label, d), 0, worst)
            if p == math.inf and d == 2:
                trace = np.asarray(errs)
    if trace is not None:
        res.plotdata["linf-2d-errors"] = np.column_stack(
            [np.arange(len(trace), dtype=float), trace])
    return res


_SELFTEST_DEFAULTS = {"seed": 0}


def _suite_selftest(cfg):
    res = ExperimentResult("selftest", cfg)
    rng = np.random.default_rng(cfg["seed"])

    err = max(abs(tau(0.7, 3.0, 1.0, 0.9) - 1.0), abs(tau(0.7, 3.0, 0.0, 0.9)),
              abs(tau(-1.2, 2.5, 1.0, 1.3) - 1.0))
    res.add("distortion endpoints tau(0)=0, tau(1)=1", err <= 1e-12, err, 1e-12)
    rel = tau_sigma_relation_check([0.8], [3.0], [0.3, 0.7], [0.5, 1.1])
    res.add("tau-sigma factorization", rel["max_rel_residual"] <= 1e-12,
            rel["max_rel_residual"], 1e-12)
    small = max(abs(tau_tilde(K, 2.5, 1e-8) - 1.0) for K in (-2.0, 0.0, 2.0))
    res.add("tau_tilde tends to one at zero distance", small <= 1e-6,
            small, 1e-6)

    grid = build_euclidean_grid([11, 11], 0.1)
    g1 = random_trig_field(rng, 2, terms=3, freq=1.5, amp=1.0)(grid.points)
    g2 = random_trig_field(rng, 2, terms=3, freq=1.5, amp=1.0)(grid.points)
    lb = leibniz_laplacian_check(grid, g1, g2)
    res.add("Leibniz identity for the graph Laplacian",
            lb["max_err"] <= 1e-12 * lb["scale"], lb["max_err"],
            1e-12 * lb["scale"])

    line = build_euclidean_grid([41], 0.05)
    x = line.points[:, 0]
    mu = np.exp(-x**2) * line.weights
    mu /= np.sum(mu)
    nu = np.roll(mu, 6)
    self_d = wq_distance(line, mu, mu, q=2.0).distance
    res.add("transport distance of a measure to itself is zero",
            self_d <= 1e-12, self_d, 1e-12)
    kp = kantorovich_potential(line, mu, nu)
    res.add("Kantorovich potentials certify optimality",
            abs(kp.duality_gap) <= 1e-9, abs(kp.duality_gap), 1e-9)
    cd = cd_check(line, mu, nu, 0.0, 2.0, [0.0, 0.5, 1.0])
    ends = float(np.max(np.abs(cd.residuals["slack"][[0, -1], :])))
    res.add("convexity slack vanishes at the endpoints", ends == 0.0, ends, 0.0)

    traj = heat_flow_p(line, 1.0 + 0.3 * np.sin(3.0 * x), p=2.0, tau=1e-3,
                       steps=3)
    masses = traj.states @ line.weights
    drift = float(np.max(np.abs(masses - masses[0])) / abs(masses[0]))
    res.add("heat step conserves mass", drift <= 1e-12, drift, 1e-12)

    k2 = from_distance_matrix([[0.0, 1.0], [1.0, 0.0]],
                              edges=(np.array([0]), np.array([1]),
                                     np.array([1.0])), name="K2")
    f = rng.standard_normal(2)
    jump = f[1] - f[0]
    g2_err = float(np.max(np.abs(gamma2(k2, f) - jump**2)))
    res.add("Gamma2 on two points is the squared jump", g2_err == 0.0,
            g2_err, 0.0)

    v = rng.standard_normal(3)
    l2 = lp_norm(2.0, 3)
    pair = d_pm_via_gradient_set(l2, v, v, sign=+1)
    dual_err = abs(pair - float(v @ v))
    res.add("self-duality of the Euclidean pairing", dual_err <= 1e-12,
            dual_err, 1e-12)

    ratio = internal_energy(line, mu, 2.0)
    res.add("internal energy of a density is negative", ratio < 0.0, ratio, 0.0)
    return res


# ---------------------------------------------------------------------------
# registry and artifact writer
# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "bishop-gromov": (_suite_bishop_gromov, _BG_DEFAULTS),
    "bochner": (_suite_bochner, _BOCHNER_DEFAULTS),
    "brenier": (_suite_brenier, _BRENIER_DEFAULTS),
    "busemann": (_suite_busemann, _BUSEMANN_DEFAULTS),
    "cd-check": (_suite_cd_check, _CD_DEFAULTS),
    "comparison": (_suite_comparison, _COMPARISON_DEFAULTS),
    "heatflow": (_suite_heatflow, _HEATFLOW_DEFAULTS),
    "mcp": (_suite_mcp, _MCP_DEFAULTS),
    "normed-oracle": (_suite_normed_oracle, _NORMED_DEFAULTS),
    "selftest": (_suite_selftest, _SELFTEST_DEFAULTS),
}


def list_experiments():
    """Registered suite names in stable alphabetical order."""
    return sorted(EXPERIMENTS)


def run_experiment(name, config=None, seed=0):
    """Run one suite with merged configuration; returns ExperimentResult."""
    eff = effective_config(name, config, seed)
    return EXPERIMENTS[name][0](eff)


def run_suite(names, config=None, seed=0, jobs=1, strict=True):
    """Run several suites, optionally in parallel, in the given order.

    All configurations are validated before any suite starts, so a
    config error cannot leave partial work behind.  Results come back
    in input order regardless of the worker count, which keeps the
    serialized artifacts deterministic.  With strict=False, config keys
    a suite does not declare are silently dropped for that suite; this
    lets one flag set drive a mixed batch.
    """
    tasks = []
    for name in names:
        if name not in EXPERIMENTS:
            raise ConfigError("unknown experiment %r" % name)
        local = config or {}
        if not strict:
            local = {k: v for k, v in local.items()
                     if k in EXPERIMENTS[name][1]}
        eff = effective_config(name, local, seed)
        tasks.append((name, EXPERIMENTS[name][0], eff))
    jobs = max(1, int(jobs))
    if jobs == 1 or len(tasks) <= 1:
        return [fn(eff) for _, fn, eff in tasks]
    with ThreadPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(lambda t: t[1](t[2]), tasks))


def config_hash(results, seed):
    """sha256 over the canonical JSON of every effective configuration."""
    payload = {"seed": int(seed),
               "experiments": {r.name: r.config for r in results}}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_artifacts(results, out_dir, seed=0):
    """Serialize report.json, residuals.csv, and plotdata/*.dat.

    No timestamps or machine identifiers enter the files; floats are
    serialized through repr, so rerunning the same config and seed on
    the same platform reproduces the bytes exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    plot_dir = os.path.join(out_dir, "plotdata")
    os.makedirs(plot_dir, exist_ok=True)

    report = {
        "version": VERSION,
        "config_hash": config_hash(results, seed),
        "seed": int(seed),
        "passed": all(r.passed for r in results),
        "experiments": {},
    }
    for r in results:
        report["experiments"][r.name] = {
            "passed": r.passed,
            "config": r.config,
            "assertions": [
                {"name": n, "passed": ok, "residual": val, "tolerance": tol}
                for n, ok, val, tol in r.assertions
            ],
        }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")

    with open(os.path.join(out_dir, "residuals.csv"), "w") as fh:
        fh.write("experiment,key,index,value\n")
        for r in results:
            for key, idx, val in r.residuals:
                fh.write("%s,%s,%d,%r\n" % (r.name, key, idx, val))

    for r in results:
        for series in sorted(r.plotdata):
            arr = np.asarray(r.plotdata[series], dtype=float)
            path = os.path.join(plot_dir, "%s_%s.dat" % (r.name, series))
            with open(path, "w") as fh:
                for xv, yv in arr:
                    fh.write("%r %r\n" % (float(xv), float(yv)))
    return report


__all__ = [
    "ConfigError",
    "ExperimentResult",
    "EXPERIMENTS",
    "VERSION",
    "config_hash",
    "effective_config",
    "list_experiments",
    "run_experiment",
    "run_suite",
    "write_artifacts",
]
