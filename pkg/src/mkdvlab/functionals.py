"""Conserved functionals, Poisson brackets, and equicontinuity machinery.

The generating functional ``alpha(kappa, q)`` is evaluated as the exact
closed quadratic trace plus the order >= 4 trace tail, the latter either by
summing the trace series or through eigenvalues of the quadratic-form matrix
(``log det`` route).  Both routes share the closed quadratic term, so they
agree to rounding whenever both converge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lax as _lax
from .spectral import (Field, apply_multiplier, derivative, constant_field,
                       l2_inner, l2_norm, padded_samples, product)
from .lax import (SeriesReport, alpha_quadratic, ball_parameter, build_lax,
                  greens_diagnostics)

ALPHA_MAX_TERMS = 40
ALPHA_RTOL = 1e-14


class SeriesDivergenceError(RuntimeError):
    """The trace series failed to converge for these (q, kappa)."""

    def __init__(self, message: str, report: SeriesReport):
        super().__init__(message)
        self.report = report


class LogBranchError(RuntimeError):
    """An eigenvalue of mu*T reached (-inf, -1], so log det is off its branch."""


def mass(q: Field) -> float:
    """``M(q) = (1/2) int q^2 dx``."""
    return 0.5 * l2_norm(q) ** 2


def hamiltonian(q: Field, mu: int) -> float:
    """``H(q) = (1/2) int (q')^2 + mu q^4 dx``, quadrature-exact for band-limited q."""
    grad = 0.5 * l2_norm(derivative(q)) ** 2
    s = padded_samples(q, pad_factor=2)
    quartic = float(np.sum(s ** 4) * q.geometry.period / s.size)
    return grad + 0.5 * mu * quartic


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    h_mkdv: float
    alpha: float
    alpha2: float
    alpha_tail: float
    kappa: float
    mu: int
    series: SeriesReport


def _trace_matrix(q: Field, kappa: float, mu: int, cutoff: int | None) -> np.ndarray:
    if cutoff is None:
        cutoff = q.geometry.n_modes // 4
    sys = build_lax(q, kappa, mu, cutoff)
    return (sys.d_minus[:, None] * sys.q_toeplitz) @ (sys.d_plus[:, None] * sys.q_toeplitz)


def _alpha_tail_series(t: np.ndarray, lam: float, mu: int,
                       ball: float) -> tuple:
    """Trace series from the quartic term on, with magnitude bookkeeping."""
    power = t @ t
    total = 0.0
    magnitudes = [abs(float(np.trace(t).real))]   # quadratic term, for the record
    first = max(magnitudes[0], 1e-300)
    converged = False
    m = 2
    while m <= ALPHA_MAX_TERMS:
        term = ((-mu) ** (m - 1) / m) * float(np.trace(power).real)
        total += term
        magnitudes.append(abs(term))
        if abs(term) < ALPHA_RTOL * first:
            converged = True
            break
        if abs(term) > 1e8 * first:
            break
        power = power @ t
        m += 1
    ratio = None
    tail = [magnitudes[i + 1] / magnitudes[i]
            for i in range(max(1, len(magnitudes) - 4), len(magnitudes) - 1)
            if magnitudes[i] > 0]
    if tail:
        ratio = float(np.exp(np.mean(np.log(tail))))
    report = SeriesReport(tuple(magnitudes), m, ball, converged, ratio)
    return mu * lam * total, report


def _alpha_tail_logdet(t: np.ndarray, lam: float, mu: int) -> float:
    """``lam * tr[log(1 + mu T) - mu T]`` through eigenvalues of T."""
    eigs = np.linalg.eigvals(t)
    shifted = 1.0 + mu * eigs
    on_axis = np.abs(shifted.imag) < 1e-12 * (1.0 + np.abs(shifted.real))
    if np.any((shifted.real <= 0.0) & on_axis):
        raise LogBranchError("an eigenvalue of mu*T lies at or below -1")
    tail = np.sum(np.log(shifted) - mu * eigs)
    if abs(tail.imag) > 1e-10 * (1.0 + abs(tail.real)):
        raise LogBranchError(f"log det acquired an imaginary part {tail.imag:.3e}")
    return float(lam * tail.real)


def alpha(q: Field, kappa: float, mu: int, method: str = "series",
          cutoff: int | None = None) -> FunctionalReport:
    """Evaluate the conserved functional ``alpha(kappa, q)`` and its split.

    ``alpha2`` is the exact closed quadratic term; ``alpha_tail`` collects
    every higher term, summed per ``method``.  Raises
    :class:`SeriesDivergenceError` or :class:`LogBranchError` when the
    requested route is invalid for these data.
    """
    if method not in ("series", "logdet"):
        raise ValueError("method must be 'series' or 'logdet'")
    if kappa < 1.0:
        raise ValueError("alpha requires kappa >= 1")
    lam = _lax.lambda_factor(kappa, q.geometry)
    ball = ball_parameter(q, kappa)
    a2 = alpha_quadratic(q, kappa, mu)
    t = _trace_matrix(q, kappa, mu, cutoff)
    if method == "series":
        tail, report = _alpha_tail_series(t, lam, mu, ball)
        if not report.converged:
            raise SeriesDivergenceError(
                f"alpha series did not converge by m={report.truncated_at} "
                f"(ball parameter {ball:.3f})", report)
    else:
        tail = _alpha_tail_logdet(t, lam, mu)
        report = SeriesReport((abs(a2), abs(tail)), 0, ball, True, None)
    return FunctionalReport(mass(q), hamiltonian(q, mu), a2 + tail, a2, tail,
                            float(kappa), int(mu), report)


def alpha_expansion_residual(q: Field, kappa: float, mu: int,
                             method: str = "series",
                             cutoff: int | None = None) -> float:
    """``|alpha - mu M / kappa + mu H / (4 kappa^3)|``, the order kappa^-5 remainder."""
    rep = alpha(q, kappa, mu, method=method, cutoff=cutoff)
    return abs(rep.alpha - mu * rep.mass / kappa + mu * rep.h_mkdv / (4.0 * kappa ** 3))


def poisson_bracket_r(q: Field, kappa: float, varkappa: float, mu: int,
                      cutoff: int | None = None) -> float:
    """``int r(kappa) d_x r(varkappa) dx``; vanishes for exact diagnostics."""
    if kappa == varkappa:
        raise ValueError("the two spectral parameters must differ")
    r_k = greens_diagnostics(q, kappa, mu, cutoff=cutoff).r
    r_v = greens_diagnostics(q, varkappa, mu, cutoff=cutoff).r
    return l2_inner(r_k, derivative(r_v))


def variational_check(q: Field, kappa: float, mu: int, f: Field,
                      h: float | None = None, cutoff: int | None = None) -> tuple:
    """Pair ``<f, r(kappa)>`` against a central difference of alpha.

    Returns ``(pairing, finite_difference)``; the caller compares.  The
    default step balances truncation against rounding in double precision.
    """
    if h is None:
        h = 1e-5 * (1.0 + l2_norm(q))
    r = greens_diagnostics(q, kappa, mu, cutoff=cutoff).r
    pairing = l2_inner(f, r)
    plus = alpha(q + h * f, kappa, mu, cutoff=cutoff).alpha
    minus = alpha(q - h * f, kappa, mu, cutoff=cutoff).alpha
    return pairing, (plus - minus) / (2.0 * h)


def two_parameter_identities(q: Field, kappa: float, varkappa: float, mu: int,
                             cutoff: int | None = None) -> tuple:
    """Relative residuals of the two cross-parameter product identities.

    The first identity equates ``p(k) r(v) - r(k) p(v)`` with
    ``(1/(2(k - v))) d_x {p(k) p(v) - r(k) r(v) - mu (gamma(k)+1)(gamma(v)+1)}``;
    the second carries plus signs and ``-1/(2(k + v))``.  Residuals are
    L2 norms normalized by the larger side.
    """
    if kappa == varkappa:
        raise ValueError("the two spectral parameters must differ")
    dk = greens_diagnostics(q, kappa, mu, cutoff=cutoff)
    dv = greens_diagnostics(q, varkappa, mu, cutoff=cutoff)
    one = constant_field(q.geometry, 1.0)
    gk, gv = dk.gamma + one, dv.gamma + one
    pr = product(dk.p, dv.r)
    rp = product(dk.r, dv.p)
    pp = product(dk.p, dv.p)
    rr = product(dk.r, dv.r)
    gg = product(gk, gv)

    def _rel(lhs: Field, rhs: Field) -> float:
        scale = max(l2_norm(lhs), l2_norm(rhs), 1e-300)
        return l2_norm(lhs - rhs) / scale

    lhs1 = pr - rp
    rhs1 = (1.0 / (2.0 * (kappa - varkappa))) * derivative(pp - rr - mu * gg)
    lhs2 = pr + rp
    rhs2 = (-1.0 / (2.0 * (kappa + varkappa))) * derivative(pp + rr - mu * gg)
    return _rel(lhs1, rhs1), _rel(lhs2, rhs2)


# ---------------------------------------------------------------------------
# equicontinuity multiplier


def w_product_form(xi, kappa: float):
    """``3 k^2 xi^2 / (4 (xi^2 + k^2)(xi^2 + 4 k^2))``."""
    xi = np.asarray(xi, dtype=float)
    k2 = kappa ** 2
    return 3.0 * k2 * xi ** 2 / (4.0 * (xi ** 2 + k2) * (xi ** 2 + 4.0 * k2))


def w_difference_form(xi, kappa: float):
    """``k^2/(xi^2 + 4k^2) - (k/2)^2/(xi^2 + k^2)``, algebraically the same."""
    xi = np.asarray(xi, dtype=float)
    k2 = kappa ** 2
    return k2 / (xi ** 2 + 4.0 * k2) - 0.25 * k2 / (xi ** 2 + k2)


def w_pairing(q: Field, kappa: float) -> float:
    """``<q, w(-i d, kappa) q>`` over one period."""
    xi = q.geometry.frequencies
    return float(q.geometry.period
                 * np.sum(w_product_form(xi, kappa) * np.abs(q.coeffs) ** 2))


@dataclass(frozen=True)
class EquicontinuityProfile:
    s: float
    kappa: float
    dyadic: tuple
    terms: tuple
    total: float


def equicontinuity_profile(q: Field, s: float, kappa: float,
                           n_max: int | None = None) -> EquicontinuityProfile:
    """Dyadic profile ``(kappa N)^{2s} <q, w(-i d, kappa N) q>`` for N = 2, 4, ...

    The dyadic list stops once ``kappa * N`` passes the grid Nyquist
    frequency (or ``n_max``); the omitted terms vanish for band-limited q.
    """
    if not 0.0 <= s < 1.0:
        raise ValueError("requires 0 <= s < 1")
    if kappa < 1.0:
        raise ValueError("requires kappa >= 1")
    nyquist = q.geometry.nyquist_frequency
    dyadic = []
    terms = []
    n = 2
    while kappa * n <= nyquist and (n_max is None or n <= n_max):
        dyadic.append(n)
        terms.append((kappa * n) ** (2.0 * s) * w_pairing(q, kappa * n))
        n *= 2
    return EquicontinuityProfile(float(s), float(kappa), tuple(dyadic),
                                 tuple(terms), float(sum(terms)))
