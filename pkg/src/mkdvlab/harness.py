"""Experiment orchestration: seeded data families, verification suites,
tolerance registry, and CSV/JSON/plot-data emission with provenance headers.

Each suite returns a list of :class:`ResultRow`; the command line wraps them
and fixes exit codes, and the acceptance tests assert on the same rows.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from . import __version__
from .spectral import (CIRCLE, LINE_APPROX, Field, Geometry, apply_multiplier,
                       constant_field, cosine_field, derivative,
                       field_from_coeffs, field_from_function, h_norm,
                       helmholtz, l1_norm, l2_inner, l2_norm, make_grid,
                       product, shift, sobolev_norm, zero_field)
from .lax import (ball_parameter, gamma_order2, greens_diagnostics, p_order1,
                  p_order3)
from . import functionals as fal
from . import flows as flw
from . import inverse as inv

# Acceptance tolerances; a global scale factor is threaded through the CLI.
TOLERANCES = {
    "identity_residual": 1e-8,
    "crossval_h1": 1e-8,
    "variational": 1e-7,          # times (1 + |pairing|)
    "bracket": 1e-10,             # times ||r(k)|| ||r(vk)||
    "bracket_antisymmetry": 1e-12,
    "expansion_slope": -4.5,
    "gamma_remainder_slope": -2.5,
    "p_remainder_slope": -1.5,
    "alpha_tail_slope": -1.5,
    "conservation_drift": 1e-6,   # times (1 + |value|)
    "soliton_l2": 1e-4,
    "r_evolution": 1e-6,          # times ||r(vk)||
    "composition_l2": 1e-5,
    "gauge_l2": 1e-6,
    "roundtrip": 1e-9,
    "equivariance": 1e-10,
    "rho2w": 1e-10,
    "w_forms": 1e-14,
    "sandwich_spread": 0.5,
}

# Grids used by the corpus suites; the line grid needs a wide frequency band
# so that the resolvent truncation sits far above the probed kappa values.
CIRCLE_GRID = dict(kind=CIRCLE, period=1.0, n_modes=256, cutoff=64, band=8)
LINE_GRID = dict(kind=LINE_APPROX, period=16.0, n_modes=512, cutoff=256, band=8)


@dataclass
class ResultRow:
    experiment: str
    params: str
    metric: str
    value: float
    tolerance: float | None
    passed: bool | None
    code_version: str = __version__
    config_hash: str = ""


def row_leq(experiment: str, params: str, metric: str, value: float,
            tolerance: float) -> ResultRow:
    return ResultRow(experiment, params, metric, float(value), float(tolerance),
                     bool(value <= tolerance))


def row_info(experiment: str, params: str, metric: str, value: float) -> ResultRow:
    return ResultRow(experiment, params, metric, float(value), None, None)


def all_passed(rows) -> bool:
    return all(r.passed for r in rows if r.passed is not None)


def fit_loglog_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.maximum(np.asarray(ys, dtype=float), 1e-300)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# seeded data families


def random_smooth_field(geometry: Geometry, rng: np.random.Generator,
                        decay: float = 4.0, band: int | None = None,
                        include_mean: bool = False) -> Field:
    """Gaussian coefficient draws damped by ``(1+|k|)^{-decay}``, unit L2 norm."""
    if band is None:
        band = geometry.n_modes // 2 - 1
    band = min(band, geometry.n_modes // 2 - 1)
    c = np.zeros(geometry.n_modes, dtype=complex)
    for j in range(1, band + 1):
        z = rng.normal() + 1j * rng.normal()
        c[j] = z * (1.0 + j) ** (-decay)
        c[-j] = np.conj(c[j])
    if include_mean:
        c[0] = 0.3 * rng.normal()
    f = field_from_coeffs(geometry, c)
    return f * (1.0 / l2_norm(f))


def corpus_shapes(geometry: Geometry, count: int, seed: int,
                  decay: float = 4.0, band: int = 8) -> list:
    """Reproducible list of unit-norm smooth shapes."""
    rng = np.random.default_rng(seed)
    return [random_smooth_field(geometry, rng, decay, band,
                                include_mean=(geometry.kind == CIRCLE))
            for _ in range(count)]


def scaled_to_ball(shape: Field, ball: float, kappa: float) -> Field:
    """Rescale a unit-norm shape so that ``kappa**-1/2 ||q|| = ball``."""
    return shape * (ball * math.sqrt(kappa))


def soliton_field(geometry: Geometry, speed: float, center: float) -> Field:
    root = math.sqrt(speed)
    return field_from_function(geometry,
                               lambda x: root / np.cosh(root * (x - center)))


def make_initial_field(geometry: Geometry, family: str, params: dict,
                       rng: np.random.Generator) -> Field:
    """Dispatch for the named initial-data families used by configurations."""
    if family == "zero":
        return zero_field(geometry)
    if family == "constant":
        return constant_field(geometry, float(params.get("value", 0.1)))
    if family == "cosine":
        return cosine_field(geometry, float(params.get("amplitude", 0.1)),
                            int(params.get("mode", 1)))
    if family == "soliton":
        return soliton_field(geometry, float(params.get("speed", 1.0)),
                             float(params.get("center", geometry.period / 2.0)))
    if family == "random-smooth":
        f = random_smooth_field(geometry, rng,
                                decay=float(params.get("decay", 4.0)),
                                band=int(params.get("band", 8)),
                                include_mean=geometry.kind == CIRCLE)
        if "ball" in params:
            return scaled_to_ball(f, float(params["ball"]),
                                  float(params.get("ball_kappa", 1.0)))
        return f * float(params.get("norm", 0.1))
    raise ValueError(f"unknown initial-data family {family!r}")


# ---------------------------------------------------------------------------
# identity and cross-validation suites


def identity_residuals(q: Field, kappa: float, mu: int,
                       cutoff: int | None = None) -> dict:
    """Relative residuals of the three derivative identities and the
    second-order reconstruction of r from gamma."""
    d = greens_diagnostics(q, kappa, mu, cutoff=cutoff)
    one = constant_field(q.geometry, 1.0)

    def rel(lhs: Field, rhs: Field) -> float:
        return l2_norm(lhs - rhs) / max(l2_norm(lhs), l2_norm(rhs), 1e-300)

    out = {}
    out["gamma_prime"] = rel(derivative(d.gamma), 2.0 * product(q, d.p))
    out["p_prime"] = rel(derivative(d.p),
                         -2.0 * kappa * d.r + 2.0 * mu * product(q, d.gamma + one))
    out["r_prime"] = rel(derivative(d.r), -2.0 * kappa * d.p)
    lhs = (mu / (4.0 * kappa)) * d.r
    rhs = apply_multiplier(q + product(d.gamma, q), helmholtz(q.geometry, kappa))
    out["r_reconstruction"] = rel(lhs, rhs)
    return out


def _suite_grids():
    for label, grid in (("circle", CIRCLE_GRID), ("line", LINE_GRID)):
        geometry = make_grid(grid["kind"], grid["period"], grid["n_modes"])
        yield label, geometry, grid["cutoff"], grid["band"]


def run_identity_suite(count: int = 20, seed: int = 2025, ball: float = 0.05,
                       kappas=(2.0, 4.0, 8.0), mus=(1, -1),
                       tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["identity_residual"] * tol_scale
    rows = []
    for label, geometry, cutoff, band in _suite_grids():
        shapes = corpus_shapes(geometry, count, seed, band=band)
        for kappa in kappas:
            for mu in mus:
                worst = {}
                for shape in shapes:
                    q = scaled_to_ball(shape, ball, kappa)
                    res = identity_residuals(q, kappa, mu, cutoff)
                    for key, val in res.items():
                        worst[key] = max(worst.get(key, 0.0), val)
                params = f"{label},kappa={kappa:g},mu={mu:+d}"
                for key, val in worst.items():
                    rows.append(row_leq("identities", params, key, val, tol))
    return rows


def run_crossval_suite(count: int = 20, seed: int = 2025, ball: float = 0.05,
                       kappas=(2.0, 4.0, 8.0), divergence_ball: float = 0.5,
                       tol_scale: float = 1.0) -> list:
    """Series vs direct agreement in H1, plus the out-of-ball divergence report."""
    tol = TOLERANCES["crossval_h1"] * tol_scale
    rows = []
    for label, geometry, cutoff, band in _suite_grids():
        # method agreement is a property of the shared truncation, so the
        # moderate circle-sized cutoff keeps the series path affordable
        cutoff = min(cutoff, 64)
        shapes = corpus_shapes(geometry, count, seed, band=band)
        for kappa in kappas:
            worst = 0.0
            for shape in shapes:
                q = scaled_to_ball(shape, ball, kappa)
                direct = greens_diagnostics(q, kappa, 1, "direct", cutoff)
                series = greens_diagnostics(q, kappa, 1, "series", cutoff)
                if not series.series.converged:
                    raise RuntimeError("series unexpectedly divergent in ball")
                for a, b in ((direct.gamma, series.gamma), (direct.p, series.p),
                             (direct.r, series.r)):
                    worst = max(worst, h_norm(a - b, 1.0) / max(h_norm(b, 1.0), 1e-300))
            rows.append(row_leq("crossval", f"{label},kappa={kappa:g}",
                                "series_vs_direct_h1", worst, tol))

    # far outside the ball the series must report divergence without raising
    geometry = make_grid(**{k: CIRCLE_GRID[k] for k in ("kind", "period", "n_modes")})
    shape = corpus_shapes(geometry, 1, seed, band=CIRCLE_GRID["band"])[0]
    q = scaled_to_ball(shape, divergence_ball, 2.0)
    report = greens_diagnostics(q, 2.0, 1, "series", CIRCLE_GRID["cutoff"]).series
    rows.append(ResultRow("crossval", f"circle,ball={divergence_ball:g}",
                          "series_divergence_reported",
                          0.0 if report.converged else 1.0, 1.0,
                          not report.converged))
    return rows


def run_variational_suite(count: int = 8, seed: int = 2025, ball: float = 0.05,
                          kappa: float = 4.0, mu: int = 1,
                          tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["variational"] * tol_scale
    geometry = make_grid(CIRCLE, 1.0, 256)
    cutoff = CIRCLE_GRID["cutoff"]
    shapes = corpus_shapes(geometry, count + 1, seed, band=8)
    f = shapes[-1] * 0.05
    rows = []
    worst = 0.0
    for shape in shapes[:count]:
        q = scaled_to_ball(shape, ball, kappa)
        pairing, fd = fal.variational_check(q, kappa, mu, f, h=1e-5, cutoff=cutoff)
        worst = max(worst, abs(pairing - fd) / (1.0 + abs(pairing)))
    rows.append(row_leq("variational", f"kappa={kappa:g},h=1e-5",
                        "pairing_vs_fd", worst, tol))

    # second-order refinement, measured where truncation dominates rounding
    q = scaled_to_ball(shapes[0], ball, kappa)
    errors = []
    for h in (4e-3, 2e-3, 1e-3):
        pairing, fd = fal.variational_check(q, kappa, mu, f, h=h, cutoff=cutoff)
        errors.append(abs(pairing - fd))
    ratios = [errors[i] / max(errors[i + 1], 1e-300) for i in range(2)]
    value = min(ratios)
    rows.append(ResultRow("variational", "h=4e-3..1e-3", "fd_refinement_ratio",
                          float(value), 3.0, bool(2.5 <= min(ratios) and
                                                  max(ratios) <= 6.0)))
    return rows


def run_bracket_suite(count: int = 20, seed: int = 2025, ball: float = 0.05,
                      pairs=((4.0, 6.0), (8.0, 3.0), (16.0, 5.0)),
                      mus=(1, -1), tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["bracket"] * tol_scale
    anti_tol = TOLERANCES["bracket_antisymmetry"] * tol_scale
    rows = []
    for label, geometry, cutoff, band in _suite_grids():
        shapes = corpus_shapes(geometry, count, seed, band=band)
        for kappa, varkappa in pairs:
            for mu in mus:
                worst = 0.0
                worst_anti = 0.0
                for shape in shapes:
                    q = scaled_to_ball(shape, ball, max(kappa, varkappa))
                    rk = greens_diagnostics(q, kappa, mu, cutoff=cutoff).r
                    rv = greens_diagnostics(q, varkappa, mu, cutoff=cutoff).r
                    scale = max(l2_norm(rk) * l2_norm(rv), 1e-300)
                    b1 = l2_inner(rk, derivative(rv))
                    b2 = l2_inner(rv, derivative(rk))
                    worst = max(worst, abs(b1) / scale)
                    worst_anti = max(worst_anti, abs(b1 + b2) / scale)
                params = f"{label},kappa={kappa:g},varkappa={varkappa:g},mu={mu:+d}"
                rows.append(row_leq("bracket", params, "poisson_bracket",
                                    worst, tol))
                rows.append(row_leq("bracket", params, "antisymmetry",
                                    worst_anti, anti_tol))
    return rows


# ---------------------------------------------------------------------------
# kappa sweeps


def _expansion_point(args) -> list:
    seed, ball, kappas, mu, tol_scale = args
    geometry = make_grid(CIRCLE, 1.0, 256)
    cutoff = CIRCLE_GRID["cutoff"]
    target = TOLERANCES["expansion_slope"]
    shape = corpus_shapes(geometry, 1, seed, band=6)[0]
    q = scaled_to_ball(shape, ball, kappas[0])
    residuals = [fal.alpha_expansion_residual(q, k, mu, cutoff=cutoff)
                 for k in kappas]
    slope = fit_loglog_slope(kappas, residuals)
    rows = [ResultRow("expansion", f"seed={seed}", "residual_slope",
                      slope, target, bool(slope <= target))]
    return rows


def expansion_ratio_rows(mu: int = 1, tol_scale: float = 1.0) -> list:
    """Residual-to-value ratios for the single-cosine datum.

    The two-term expansion leaves a remainder around 2% of alpha at
    kappa = 8; the thousandfold separation holds from kappa = 32 on.
    """
    geometry = make_grid(CIRCLE, 1.0, 256)
    cutoff = CIRCLE_GRID["cutoff"]
    q = cosine_field(geometry, 0.1, 1)
    rows = []
    for kappa, tol in ((8.0, None), (32.0, 1e-3 * tol_scale)):
        ratio = (fal.alpha_expansion_residual(q, kappa, mu, cutoff=cutoff)
                 / max(abs(fal.alpha(q, kappa, mu, cutoff=cutoff).alpha), 1e-300))
        if tol is None:
            rows.append(row_info("expansion", f"cosine,kappa={kappa:g}",
                                 "residual_over_alpha", ratio))
        else:
            rows.append(row_leq("expansion", f"cosine,kappa={kappa:g}",
                                "residual_over_alpha", ratio, tol))
    return rows


def run_expansion_sweep(seeds=(11, 12, 13), ball: float = 0.05,
                        kappas=(8.0, 16.0, 32.0, 64.0), mu: int = 1,
                        tol_scale: float = 1.0, jobs: int = 1) -> list:
    """Fitted decay of the asymptotic-expansion remainder of alpha.

    Independent seeds may be dispatched to a process pool; output order is
    by seed regardless of completion order.
    """
    points = [(seed, ball, tuple(kappas), mu, tol_scale) for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_expansion_point, points))
    else:
        batches = [_expansion_point(p) for p in points]
    rows = [row for batch in batches for row in batch]
    return rows + expansion_ratio_rows(mu, tol_scale)


def run_remainder_sweep(seed: int = 21, ball: float = 0.1,
                        kappas=(4.0, 8.0, 16.0, 32.0), mu: int = 1,
                        tol_scale: float = 1.0) -> list:
    """Fitted decay of gamma, p and alpha remainders past their leading terms."""
    grid = LINE_GRID
    geometry = make_grid(grid["kind"], grid["period"], grid["n_modes"])
    cutoff = grid["cutoff"]
    shape = corpus_shapes(geometry, 1, seed, band=grid["band"])[0]
    q = scaled_to_ball(shape, ball, kappas[0])
    gam_tail, p_tail, alpha_tail = [], [], []
    for kappa in kappas:
        d = greens_diagnostics(q, kappa, mu, cutoff=cutoff)
        gam_tail.append(l1_norm(d.gamma - gamma_order2(q, kappa, mu)))
        p_rem = d.p - p_order1(q, kappa, mu) - p_order3(q, kappa, mu)
        p_tail.append(sobolev_norm(p_rem, 1.0, kappa))
        alpha_tail.append(abs(fal.alpha(q, kappa, mu, cutoff=cutoff).alpha_tail))
    rows = []
    for name, values, key in (("gamma_tail_l1", gam_tail, "gamma_remainder_slope"),
                              ("p_tail_h1k", p_tail, "p_remainder_slope"),
                              ("alpha_tail", alpha_tail, "alpha_tail_slope")):
        slope = fit_loglog_slope(kappas, values)
        target = TOLERANCES[key]
        rows.append(ResultRow("remainders", f"seed={seed}", name + "_slope",
                              slope, target, bool(slope <= target)))
    return rows


def run_difference_proxy(amplitude: float = 0.1, varkappa: float = 4.0,
                         kappas=(16.0, 32.0, 64.0), mu: int = 1,
                         t_final: float = 0.05, dt: float = 5e-4,
                         tol_scale: float = 1.0) -> list:
    """Decreasing freeze defect of r(varkappa) under the difference flow."""
    geometry = make_grid(CIRCLE, 1.0, 256)
    q0 = cosine_field(geometry, amplitude, 1)
    values = flw.kappa_approximation_sweep(q0, varkappa, mu, t_final,
                                           kappas, dt, cutoff=48)
    decreasing = all(values[i + 1] < values[i] for i in range(len(values) - 1))
    rows = [ResultRow("difference_proxy",
                      f"varkappa={varkappa:g},kappas={'/'.join(f'{k:g}' for k in kappas)}",
                      "strictly_decreasing", 1.0 if decreasing else 0.0, 1.0,
                      decreasing)]
    for kappa, val in zip(kappas, values):
        rows.append(row_info("difference_proxy", f"kappa={kappa:g}",
                             "sup_h2_defect", val))
    rows.append(row_info("difference_proxy", "fit", "defect_slope",
                         fit_loglog_slope(kappas, values)))
    return rows


# ---------------------------------------------------------------------------
# flow suites


def _drift_rows(experiment: str, params: str, trajectory,
                tol: float) -> list:
    rows = []
    base = trajectory.conserved_log[0]
    for key, start in base.items():
        worst = max(abs(entry[key] - start) for entry in trajectory.conserved_log)
        rows.append(row_leq(experiment, params, f"drift[{key}]",
                            worst / (1.0 + abs(start)), tol))
    return rows


def run_conservation_suite(seed: int = 31, ball: float = 0.05,
                           t_final: float = 0.1, dt: float = 1e-5,
                           mu: int = -1, kappa_flow: float = 8.0,
                           probe_kappas=(4.0, 8.0),
                           tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["conservation_drift"] * tol_scale
    geometry = make_grid(CIRCLE, 1.0, 256)
    shape = corpus_shapes(geometry, 1, seed, band=8)[0]
    q0 = scaled_to_ball(shape, ball, min(probe_kappas))
    save = max(1, int(round(t_final / dt)) // 10)

    spec = flw.FlowSpec("mkdv", mu, dt, t_final, save_every=save,
                        probe_kappas=tuple(probe_kappas), lax_cutoff=64)
    rows = _drift_rows("conservation", f"mkdv,mu={mu:+d}", flw.evolve(q0, spec), tol)

    spec = flw.FlowSpec("h_kappa", mu, dt, t_final, save_every=save,
                        kappa=kappa_flow, probe_kappas=(4.0,), lax_cutoff=48)
    rows += _drift_rows("conservation", f"h_kappa,kappa={kappa_flow:g},mu={mu:+d}",
                        flw.evolve(q0, spec), tol)
    return rows


def run_soliton_check(speed: float = 1.0, t_final: float = 1.0,
                      dt: float = 1e-4, tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["soliton_l2"] * tol_scale
    geometry = make_grid(LINE_APPROX, 64.0, 1024)
    q0 = soliton_field(geometry, speed, geometry.period / 2.0)
    spec = flw.FlowSpec("mkdv", -1, dt, t_final,
                        save_every=int(round(t_final / dt)))
    trajectory = flw.evolve(q0, spec)
    target = shift(q0, -speed * t_final)
    err = l2_norm(trajectory.final - target)
    return [row_leq("soliton", f"c={speed:g},T={t_final:g},dt={dt:g}",
                    "profile_l2_error", err, tol)]


def _bump_field(geometry: Geometry, seed: int, norm: float, band: int) -> Field:
    rng = np.random.default_rng(seed)
    f = random_smooth_field(geometry, rng, decay=4.0, band=band)
    return f * norm


def run_r_evolution_suite(seed: int = 41, dt: float = 1e-4,
                          varkappa: float = 3.0, kappa: float = 6.0,
                          mu: int = 1, tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["r_evolution"] * tol_scale
    grid = LINE_GRID
    geometry = make_grid(grid["kind"], grid["period"], grid["n_modes"])
    cutoff = grid["cutoff"]
    q = _bump_field(geometry, seed, 0.15, band=8)
    scale = l2_norm(greens_diagnostics(q, varkappa, mu, cutoff=cutoff).r)
    rows = []
    for flow in ("mkdv", "h_kappa"):
        res = flw.r_evolution_residual(q, kappa, varkappa, mu, flow, dt, cutoff)
        rows.append(row_leq("r_evolution", f"{flow},dt={dt:g}",
                            "law_residual_rel", res / scale, tol))
        half = flw.r_evolution_residual(q, kappa, varkappa, mu, flow, dt / 2.0,
                                        cutoff)
        ratio = res / max(half, 1e-300)
        rows.append(ResultRow("r_evolution", f"{flow},dt={dt:g}->half",
                              "fd_refinement_ratio", float(ratio), 3.0,
                              bool(2.5 <= ratio <= 6.0)))
    return rows


def run_commuting_suite(amplitude: float = 0.1, kappa: float = 8.0,
                        mu: int = 1, t: float = 0.05, dt: float = 1e-5,
                        tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["composition_l2"] * tol_scale
    geometry = make_grid(CIRCLE, 1.0, 64)
    q0 = cosine_field(geometry, amplitude, 1)
    dist = flw.commuting_composition_check(q0, kappa, mu, t, dt, cutoff=16)
    return [row_leq("commuting", f"kappa={kappa:g},t={t:g},dt={dt:g}",
                    "composition_l2", dist, tol)]


def run_gauge_suite(seed: int = 51, norm: float = 0.25, mu: int = 1,
                    t_final: float = 0.05, dt: float = 1e-5,
                    tol_scale: float = 1.0) -> list:
    tol = TOLERANCES["gauge_l2"] * tol_scale
    geometry = make_grid(CIRCLE, 1.0, 256)
    rng = np.random.default_rng(seed)
    q0 = random_smooth_field(geometry, rng, band=8,
                             include_mean=True) * norm
    save = max(1, int(round(t_final / dt)) // 5)
    renorm = flw.evolve(q0, flw.FlowSpec("renorm_mkdv", mu, dt, t_final,
                                         save_every=save))
    plain = flw.evolve(q0, flw.FlowSpec("mkdv", mu, dt, t_final,
                                        save_every=save))
    gauged = flw.gauge_transform(renorm, mu)
    worst = max(l2_norm(a - b) for a, b in zip(gauged.states, plain.states))
    return [row_leq("gauge", f"mu={mu:+d},T={t_final:g}", "sup_l2_distance",
                    worst, tol)]


# ---------------------------------------------------------------------------
# inversion and equicontinuity suites


def run_inversion_suite(count: int = 20, seed: int = 61, ball: float = 0.05,
                        kappas=(2.0, 6.0), mu: int = 1,
                        tol_scale: float = 1.0) -> list:
    tol_round = TOLERANCES["roundtrip"] * tol_scale
    tol_equiv = TOLERANCES["equivariance"] * tol_scale
    geometry = make_grid(CIRCLE, 1.0, 256)
    cutoff = CIRCLE_GRID["cutoff"]
    shapes = corpus_shapes(geometry, count, seed, band=8)
    rows = []
    for kappa in kappas:
        worst_q = worst_r = 0.0
        for shape in shapes:
            q = scaled_to_ball(shape, ball, kappa)
            target = inv.forward_r(q, kappa, mu, cutoff)
            report = inv.invert_r(target, kappa, mu, cutoff=cutoff)
            if not report.converged:
                worst_q = worst_r = float("inf")
                break
            worst_q = max(worst_q, l2_norm(report.q_recovered - q))
            worst_r = max(worst_r, h_norm(
                inv.forward_r(report.q_recovered, kappa, mu, cutoff) - target, 2.0))
        rows.append(row_leq("inversion", f"kappa={kappa:g}", "roundtrip_q_l2",
                            worst_q, tol_round))
        rows.append(row_leq("inversion", f"kappa={kappa:g}", "roundtrip_r_h2",
                            worst_r, tol_round))

    # translation equivariance on grid shifts
    kappa = kappas[-1]
    q = scaled_to_ball(shapes[0], ball, kappa)
    target = inv.forward_r(q, kappa, mu, cutoff)
    h = 17 * geometry.period / geometry.n_modes
    lhs = inv.invert_r(shift(target, h), kappa, mu, cutoff=cutoff).q_recovered
    rhs = shift(inv.invert_r(target, kappa, mu, cutoff=cutoff).q_recovered, h)
    rows.append(row_leq("inversion", f"kappa={kappa:g},shift=17dx",
                        "translation_equivariance", l2_norm(lhs - rhs),
                        tol_equiv))
    return rows


def sandwich_constants(qs, s: float, kappa: float) -> tuple:
    """Fitted constants of the two-sided frequency-envelope comparison."""
    upper = 0.0
    lower = 0.0
    for q in qs:
        prof = fal.equicontinuity_profile(q, s, kappa)
        hs = h_norm(q, s) ** 2
        hm1 = h_norm(q, -1.0) ** 2
        low_sum = kappa ** (2.0 - 2.0 * s) * prof.total
        upper = max(upper, prof.total / hs)
        lower = max(lower, hs / (hm1 + low_sum))
    return upper, lower


def run_equicontinuity_suite(count: int = 20, seed: int = 71,
                             s_assert: float = 0.9, s_report: float = 0.25,
                             kappas=(1.0, 2.0, 4.0, 8.0), mu: int = 1,
                             tol_scale: float = 1.0) -> list:
    rows = []
    geometry = make_grid(CIRCLE, 1.0, 256)
    xi = np.linspace(0.0, geometry.nyquist_frequency, 2001)
    worst_w = 0.0
    for kappa in kappas:
        diff = np.abs(fal.w_product_form(xi, kappa) - fal.w_difference_form(xi, kappa))
        worst_w = max(worst_w, float(diff.max()))
    rows.append(row_leq("equicontinuity", "xi-grid", "w_forms_agreement",
                        worst_w, TOLERANCES["w_forms"] * tol_scale))

    shapes = corpus_shapes(geometry, count, seed, decay=4.0, band=40)
    worst = 0.0
    for q in shapes:
        for kappa in (2.0, 4.0, 8.0):
            for m in (1, -1):
                a_hi = fal.alpha_quadratic(q, kappa, m)
                a_lo = fal.alpha_quadratic(q, kappa / 2.0, m)
                lhs = a_hi - 0.5 * a_lo
                rhs = (2.0 * m / kappa) * fal.w_pairing(q, kappa)
                worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    rows.append(row_leq("equicontinuity", "corpus", "rho2w_identity", worst,
                        TOLERANCES["rho2w"] * tol_scale))

    for s, assert_it in ((s_assert, True), (s_report, False)):
        uppers, lowers = [], []
        for kappa in kappas:
            upper, lower = sandwich_constants(shapes, s, kappa)
            uppers.append(upper)
            lowers.append(lower)
            rows.append(row_info("equicontinuity", f"s={s:g},kappa={kappa:g}",
                                 "sandwich_upper", upper))
            rows.append(row_info("equicontinuity", f"s={s:g},kappa={kappa:g}",
                                 "sandwich_lower", lower))
        for name, values in (("upper", uppers), ("lower", lowers)):
            arr = np.asarray(values)
            spread = float(max(arr.max() - arr.mean(), arr.mean() - arr.min())
                           / arr.mean())
            if assert_it:
                rows.append(row_leq("equicontinuity", f"s={s:g}",
                                    f"sandwich_{name}_spread", spread,
                                    TOLERANCES["sandwich_spread"] * tol_scale))
            else:
                rows.append(row_info("equicontinuity", f"s={s:g}",
                                     f"sandwich_{name}_spread", spread))
    return rows


# ---------------------------------------------------------------------------
# configuration and output plumbing


def parse_config(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"cannot read config {path}")
    return {section: dict(parser.items(section)) for section in parser.sections()}


def config_hash(config: dict, seed: int | None = None) -> str:
    canon = json.dumps({"config": config, "seed": seed, "version": __version__},
                       sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def provenance_lines(config: dict, extra: dict | None = None) -> list:
    items = {"code_version": __version__}
    if extra:
        items.update(extra)
    lines = [f"# {key} = {value}" for key, value in sorted(items.items())]
    for section in sorted(config):
        for key in sorted(config[section]):
            lines.append(f"# {section}.{key} = {config[section][key]}")
    return lines


CSV_FIELDS = ["experiment", "params", "metric", "value", "tolerance", "passed",
              "code_version", "config_hash"]


def write_rows_csv(path: str, rows, config: dict, extra: dict | None = None) -> None:
    with open(path, "w", newline="") as handle:
        for line in provenance_lines(config, extra):
            handle.write(line + "\n")
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            record = asdict(row)
            record["value"] = repr(row.value)
            writer.writerow(record)


def write_report_json(path: str, rows, config: dict,
                      extra: dict | None = None) -> None:
    payload = {
        "provenance": {"code_version": __version__, **(extra or {})},
        "config": config,
        "rows": [asdict(r) for r in rows],
        "all_passed": all_passed(rows),
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_xy(path: str, xs, ys, config: dict, extra: dict | None = None) -> None:
    with open(path, "w") as handle:
        for line in provenance_lines(config, extra):
            handle.write(line + "\n")
        for x, y in zip(xs, ys):
            handle.write(f"{x!r} {y!r}\n")
