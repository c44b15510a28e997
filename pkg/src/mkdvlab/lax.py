"""Truncated-Fourier Lax operators and Green's-function diagnostics.

The 2x2 block operator ``L_q(kappa) = diag(kappa - d, kappa + d) + [[0, q],
[-mu q, 0]]`` is represented on the frequency band ``|k| <= cutoff`` in the
orthonormal exponential basis.  The diagonal diagnostics ``gamma``, ``p``,
``r`` of its Green's function are read off from anti-diagonal sums of the
resolvent blocks.

Truncating the band converges only like ``1/cutoff`` for the low-order terms
of the resolvent expansion, whose frequency sums decay slowly.  Those terms
are therefore evaluated in closed form (they are explicit Fourier
multipliers and products), and the matrices contribute only the order >= 4
remainders, whose band sums converge like ``cutoff**-3`` or faster.  On the
circle the closed quadratic term carries a lattice correction: the double
frequency sum behind it degenerates on the stratum ``xi1 + xi2 = 0``, which
shifts the mean by ``-csch(kappa) * alpha_quadratic(q)``.  On the period-L
torus the analogous correction is ``O(exp(-kappa L))`` and is dropped, which
is the same convention as the line normalization ``lambda = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (CIRCLE, Field, Geometry, apply_multiplier, derivative,
                       field_from_coeffs, helmholtz, l2_norm, product,
                       resolvent_minus, resolvent_plus)

SERIES_MAX_TERMS = 40
SERIES_RTOL = 1e-14
CONDITION_LIMIT = 1e13


class DiagnosticsError(RuntimeError):
    """Direct resolvent computation failed (singular or ill-conditioned)."""


def lambda_factor(kappa: float, geometry: Geometry) -> float:
    """Normalization of the Green's diagonal: tanh(kappa/2) on the circle, 1 otherwise."""
    if kappa < 1.0:
        raise ValueError("lambda_factor requires kappa >= 1")
    if geometry.kind == CIRCLE:
        return float(np.tanh(kappa / 2.0))
    return 1.0


def hilbert_schmidt_norm(matrix: np.ndarray) -> float:
    """Frobenius norm, the finite-dimensional Hilbert-Schmidt norm."""
    matrix = np.asarray(matrix)
    if not np.all(np.isfinite(matrix.view(float))):
        raise ValueError("matrix has non-finite entries")
    return float(np.linalg.norm(matrix, "fro"))


def ball_parameter(q: Field, kappa: float) -> float:
    """Smallness parameter ``kappa**-1/2 * ||q||_L2`` controlling the expansions."""
    return l2_norm(q) / np.sqrt(kappa)


@dataclass(frozen=True)
class SeriesReport:
    """Per-term magnitudes and convergence verdict of a resolvent series."""

    terms: tuple
    truncated_at: int
    ball_check: float
    converged: bool
    ratio_estimate: float | None


@dataclass(frozen=True)
class LaxSystem:
    """Band-truncated matrix data of ``L_q(kappa)``."""

    q: Field
    kappa: float
    mu: int
    cutoff: int
    band: np.ndarray        # integer mode numbers -K..K
    d_minus: np.ndarray     # diagonal of (kappa - d)^{-1} on the band
    d_plus: np.ndarray      # diagonal of (kappa + d)^{-1}
    q_toeplitz: np.ndarray  # matrix of multiplication by q, entries q^(k-l)

    @property
    def size(self) -> int:
        return 2 * self.cutoff + 1

    def full_matrix(self) -> np.ndarray:
        """Assemble the 2(2K+1) square matrix of ``L_q(kappa)``."""
        n = self.size
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[:n, :n] = np.diag(1.0 / self.d_minus)
        out[n:, n:] = np.diag(1.0 / self.d_plus)
        out[:n, n:] = self.q_toeplitz
        out[n:, :n] = -self.mu * self.q_toeplitz
        return out


def build_lax(q: Field, kappa: float, mu: int, cutoff: int) -> LaxSystem:
    """Assemble the band-truncated Lax data; validates all preconditions."""
    if kappa < 1.0:
        raise ValueError("build_lax requires kappa >= 1")
    if mu not in (1, -1):
        raise ValueError("mu must be +1 or -1")
    cutoff = int(cutoff)
    n_modes = q.geometry.n_modes
    if not 1 <= cutoff <= n_modes // 2:
        raise ValueError(f"cutoff must lie in [1, {n_modes // 2}]")
    band = np.arange(-cutoff, cutoff + 1)
    xi = 2.0 * np.pi * band / q.geometry.period
    d_minus = 1.0 / (kappa - 1j * xi)
    d_plus = 1.0 / (kappa + 1j * xi)
    offsets = band[:, None] - band[None, :]
    available = np.abs(offsets) <= n_modes // 2 - 1
    toeplitz = np.where(available, q.coeffs[offsets % n_modes], 0.0)
    return LaxSystem(q, float(kappa), int(mu), cutoff, band, d_minus, d_plus,
                     toeplitz)


def alpha_quadratic(q: Field, kappa: float, mu: int) -> float:
    """Closed form of the quadratic trace ``mu lam tr{(k-d)^-1 q (k+d)^-1 q}``.

    For real-valued q this equals ``mu * sum 2 kappa |q^|^2 / (xi^2 + 4 kappa^2)``
    over the discrete frequency measure; exact in both geometries.
    """
    xi = q.geometry.frequencies
    val = np.sum(2.0 * kappa * np.abs(q.coeffs) ** 2 / (xi ** 2 + 4.0 * kappa ** 2))
    return float(mu * q.geometry.period * val)


# ---------------------------------------------------------------------------
# closed low-order terms


def gamma_order2(q: Field, kappa: float, mu: int) -> Field:
    """Quadratic term ``-2 mu (2k - d)^{-1} q * (2k + d)^{-1} q``."""
    if kappa < 1.0:
        raise ValueError("requires kappa >= 1")
    geom = q.geometry
    xi = geom.frequencies
    u_minus = apply_multiplier(q, 1.0 / (2.0 * kappa - 1j * xi))
    u_plus = apply_multiplier(q, 1.0 / (2.0 * kappa + 1j * xi))
    return -2.0 * mu * product(u_minus, u_plus)


def p_order1(q: Field, kappa: float, mu: int) -> Field:
    """Linear term ``-2 mu d (4k^2 - d^2)^{-1} q``."""
    if kappa < 1.0:
        raise ValueError("requires kappa >= 1")
    return -2.0 * mu * derivative(apply_multiplier(q, helmholtz(q.geometry, kappa)))


def p_order3(q: Field, kappa: float, mu: int) -> Field:
    """Cubic term ``-4 mu d (4k^2 - d^2)^{-1} (q * gamma_order2)``."""
    if kappa < 1.0:
        raise ValueError("requires kappa >= 1")
    qg = product(q, gamma_order2(q, kappa, mu))
    return -4.0 * mu * derivative(apply_multiplier(qg, helmholtz(q.geometry, kappa)))


def r_order1(q: Field, kappa: float, mu: int) -> Field:
    """Linear term ``4 mu kappa (4k^2 - d^2)^{-1} q``."""
    return 4.0 * mu * kappa * apply_multiplier(q, helmholtz(q.geometry, kappa))


def _gamma_quadratic_corrected(q: Field, kappa: float, mu: int) -> Field:
    """Quadratic gamma term including the circle lattice-resonance constant."""
    g2 = gamma_order2(q, kappa, mu)
    if q.geometry.kind == CIRCLE:
        corr = -alpha_quadratic(q, kappa, mu) / np.sinh(kappa)
        c = np.array(g2.coeffs, dtype=complex)
        c[0] += corr
        g2 = field_from_coeffs(q.geometry, c)
    return g2


def _cubics(q: Field, kappa: float, mu: int) -> tuple:
    """Order-3 terms of r and p, consistent with the derivative identities.

    Obtained by inserting the quadratic gamma term into
    ``(mu/4k) r = (4k^2 - d^2)^{-1} (q + gamma q)`` and ``r' = -2 kappa p``.
    """
    qg = product(q, _gamma_quadratic_corrected(q, kappa, mu))
    smooth = apply_multiplier(qg, helmholtz(q.geometry, kappa))
    r3 = 4.0 * mu * kappa * smooth
    p3 = -2.0 * mu * derivative(smooth)
    return r3, p3


# ---------------------------------------------------------------------------
# matrix machinery


def _antidiagonal_sums(block: np.ndarray, lax: LaxSystem) -> np.ndarray:
    """Coefficients of the kernel diagonal: (1/period) * anti-diagonal sums.

    The sum over entries with mode offset ``row - col = z`` is the z-th
    coefficient of the diagonal function; offsets beyond the grid band are
    discarded.
    """
    geom = lax.q.geometry
    n = lax.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]).ravel() + (n - 1)
    sums = (np.bincount(idx, weights=block.real.ravel(), minlength=2 * n - 1)
            + 1j * np.bincount(idx, weights=block.imag.ravel(), minlength=2 * n - 1))
    out = np.zeros(geom.n_modes, dtype=complex)
    zmax = min(2 * lax.cutoff, geom.n_modes // 2 - 1)
    offsets = np.arange(-zmax, zmax + 1)
    out[offsets % geom.n_modes] = sums[offsets + (n - 1)] / geom.period
    return out


def _term_matrices(lax: LaxSystem) -> dict:
    """Order 1 and order 3 term matrices of the resolvent expansion."""
    dm, dp, Q = lax.d_minus, lax.d_plus, lax.q_toeplitz
    mu = lax.mu
    dmQ = dm[:, None] * Q
    dpQ = dp[:, None] * Q
    t_minus = dmQ @ (dp[:, None] * Q)       # (k-d)^-1 q (k+d)^-1 q
    t_plus = dpQ @ (dm[:, None] * Q)
    m0_12 = -dmQ * dp[None, :]
    m0_21 = mu * dpQ * dm[None, :]
    m1_11 = -mu * t_minus * dm[None, :]
    m1_22 = -mu * t_plus * dp[None, :]
    m1_12 = mu * t_minus @ (dmQ * dp[None, :])
    m1_21 = -t_plus @ (dpQ * dm[None, :])
    return {"t_minus": t_minus, "t_plus": t_plus, "dmQ": dmQ, "dpQ": dpQ,
            "m0_12": m0_12, "m0_21": m0_21, "m1_11": m1_11, "m1_22": m1_22,
            "m1_12": m1_12, "m1_21": m1_21}


def _tail_blocks_direct(lax: LaxSystem, mats: dict) -> tuple:
    """Resolvent blocks minus the zero-potential and order <= 3 terms, via LU."""
    n = lax.size
    full = lax.full_matrix()
    try:
        resolvent = np.linalg.solve(full, np.eye(2 * n, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise DiagnosticsError(f"L_q(kappa) is numerically singular: {exc}") from exc
    condition = float(np.linalg.norm(full, 1) * np.linalg.norm(resolvent, 1))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise DiagnosticsError(
            f"L_q(kappa) too ill-conditioned (estimate {condition:.3e})")
    s11 = resolvent[:n, :n] - np.diag(lax.d_minus) - mats["m1_11"]
    s22 = resolvent[n:, n:] - np.diag(lax.d_plus) - mats["m1_22"]
    s12 = resolvent[:n, n:] - mats["m0_12"] - mats["m1_12"]
    s21 = resolvent[n:, :n] - mats["m0_21"] - mats["m1_21"]
    return (s11, s22, s12, s21), condition


def _tail_blocks_series(lax: LaxSystem, mats: dict) -> tuple:
    """Neumann-series blocks of order >= 2 iterations (q-degree >= 4)."""
    n = lax.size
    mu = lax.mu
    t_minus, t_plus = mats["t_minus"], mats["t_plus"]
    dmQdp = mats["dmQ"] * lax.d_plus[None, :]
    dpQdm = mats["dpQ"] * lax.d_minus[None, :]
    s11 = np.zeros((n, n), dtype=complex)
    s22 = np.zeros_like(s11)
    s12 = np.zeros_like(s11)
    s21 = np.zeros_like(s11)
    pow_minus = t_minus @ t_minus
    pow_plus = t_plus @ t_plus
    magnitudes = []
    first = None
    converged = False
    m = 2
    while m <= SERIES_MAX_TERMS:
        sign = (-mu) ** m
        s11 += sign * (pow_minus * lax.d_minus[None, :])
        s22 += sign * (pow_plus * lax.d_plus[None, :])
        s12 += -sign * (pow_minus @ dmQdp)
        s21 += mu * sign * (pow_plus @ dpQdm)
        size = max(np.abs(pow_minus).max(), np.abs(pow_plus).max())
        magnitudes.append(float(size))
        if first is None:
            first = max(size, 1e-300)
        if size < SERIES_RTOL * first:
            converged = True
            break
        if size > 1e8 * first:
            break
        pow_minus = pow_minus @ t_minus
        pow_plus = pow_plus @ t_plus
        m += 1
    ratio = None
    if len(magnitudes) >= 3 and magnitudes[-2] > 0:
        tail = [magnitudes[i + 1] / magnitudes[i]
                for i in range(max(0, len(magnitudes) - 4), len(magnitudes) - 1)
                if magnitudes[i] > 0]
        if tail:
            # per-term growth tracks the square of the spectral radius of
            # mu (k-d)^-1 q (k+d)^-1 q, since each term adds two q factors
            ratio = float(np.sqrt(np.exp(np.mean(np.log(tail)))))
    report = SeriesReport(tuple(magnitudes), m, ball_parameter(lax.q, lax.kappa),
                          converged, ratio)
    return (s11, s22, s12, s21), report


def r_diagnostic(q: Field, kappa: float, mu: int,
                 cutoff: int | None = None) -> Field:
    """Fast direct evaluation of r alone, for flow right-hand sides.

    Uses block elimination of the 2x2 structure: with diagonal blocks
    ``A = kappa - d`` and ``B = kappa + d``, the needed resolvent blocks are
    ``R21 = mu B^{-1} Q S^{-1}`` and ``R12 = -S^{-1} Q B^{-1}`` with the
    Schur complement ``S = A + mu Q B^{-1} Q``, so only one band-size
    inversion is required.  Agrees with :func:`greens_diagnostics` to
    rounding.
    """
    if cutoff is None:
        cutoff = q.geometry.n_modes // 4
    lax = build_lax(q, kappa, mu, cutoff)
    dm, dp, Q = lax.d_minus, lax.d_plus, lax.q_toeplitz
    dmQ = dm[:, None] * Q
    dpQ = dp[:, None] * Q
    schur = np.diag(1.0 / dm) + mu * (Q @ dpQ)
    try:
        r11 = np.linalg.inv(schur)
    except np.linalg.LinAlgError as exc:
        raise DiagnosticsError(f"L_q(kappa) is numerically singular: {exc}") from exc
    combo = mu * (dpQ @ r11 + r11 @ (Q * dp[None, :]))      # R21 - mu R12
    if not np.all(np.isfinite(combo.view(float))):
        raise DiagnosticsError("non-finite resolvent blocks")
    m0 = mu * (dpQ * dm[None, :] + dmQ * dp[None, :])
    t_minus = dmQ @ dpQ
    t_plus = dpQ @ dmQ
    m1 = -(t_plus @ (dpQ * dm[None, :]) + t_minus @ (dmQ * dp[None, :]))
    lam = lambda_factor(kappa, q.geometry)
    tail = lam * _antidiagonal_sums(combo - m0 - m1, lax)
    r3, _ = _cubics(q, kappa, mu)
    return field_from_coeffs(q.geometry,
                             r_order1(q, kappa, mu).coeffs + r3.coeffs + tail)


@dataclass(frozen=True)
class GreensDiagnostics:
    """The diagonal Green's-function triple at spectral parameter kappa."""

    gamma: Field
    p: Field
    r: Field
    kappa: float
    mu: int
    lam: float
    method: str
    series: SeriesReport | None = None
    condition: float | None = None


def greens_diagnostics(q: Field, kappa: float, mu: int,
                       method: str = "direct",
                       cutoff: int | None = None) -> GreensDiagnostics:
    """Compute (gamma, p, r) by closed low orders plus matrix remainders.

    ``method`` selects how the order >= 4 remainder blocks are obtained:
    dense inversion of the truncated Lax matrix ("direct") or the Neumann
    series ("series").  A divergent series is reported on the returned
    object, not raised; the direct method raises :class:`DiagnosticsError`
    when the truncated system is numerically singular.
    """
    if method not in ("direct", "series"):
        raise ValueError("method must be 'direct' or 'series'")
    if cutoff is None:
        cutoff = q.geometry.n_modes // 4
    lax = build_lax(q, kappa, mu, cutoff)
    mats = _term_matrices(lax)
    series = None
    condition = None
    if method == "direct":
        (s11, s22, s12, s21), condition = _tail_blocks_direct(lax, mats)
    else:
        (s11, s22, s12, s21), series = _tail_blocks_series(lax, mats)

    lam = lambda_factor(kappa, q.geometry)
    geom = q.geometry
    gamma_tail = lam * _antidiagonal_sums(s11 + s22, lax)
    r_tail = lam * _antidiagonal_sums(s21 - mu * s12, lax)
    p_tail = lam * _antidiagonal_sums(s21 + mu * s12, lax)

    g2 = _gamma_quadratic_corrected(q, kappa, mu)
    r3, p3 = _cubics(q, kappa, mu)
    gamma = field_from_coeffs(geom, g2.coeffs + gamma_tail)
    r = field_from_coeffs(geom,
                          r_order1(q, kappa, mu).coeffs + r3.coeffs + r_tail)
    p = field_from_coeffs(geom,
                          p_order1(q, kappa, mu).coeffs + p3.coeffs + p_tail)
    return GreensDiagnostics(gamma, p, r, float(kappa), int(mu), lam, method,
                             series, condition)
