"""Volumes, isotropy constants and boundary measures of Schatten balls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, SingularityError, UnsupportedError
from .special_fn import (
    LOG_PI,
    LogValue,
    check_beta,
    euclidean_ball_log_volume,
    lp_ball_log_volume,
    multivariate_log_gamma,
    stiefel_log_volume,
)

INF = math.inf
SPHERE_TOL = 1e-8


@dataclass(frozen=True)
class MatShape:
    """Dimensions (m, n) of the matrix space; m <= n is enforced."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError(f"shape entries must be positive, got ({self.m}, {self.n})")
        if self.m > self.n:
            raise DomainError(f"need m <= n (transpose first), got ({self.m}, {self.n})")

    def real_dim(self, beta: int) -> int:
        return check_beta(beta) * self.m * self.n


def as_shape(shape) -> MatShape:
    if isinstance(shape, MatShape):
        return shape
    m, n = shape
    return MatShape(int(m), int(n))


def check_p(p) -> float:
    """Validate a Schatten index; accepts floats, math.inf and the string 'inf'."""
    if isinstance(p, str):
        p = INF if p.strip().lower() in ("inf", "infinity") else float(p)
    p = float(p)
    if not p > 0:
        raise DomainError(f"Schatten index must be positive, got {p}")
    return p


def _entries(x) -> np.ndarray:
    return np.asarray(getattr(x, "entries", x))


def _half_gamma_sum(count, beta):
    # sum_{k<count} ln Gamma(1 + beta k / 2)
    return math.fsum(gammaln(1 + beta * np.arange(count) / 2))


def schatten_inf_log_volume(shape, beta) -> LogValue:
    """Lebesgue volume of the operator-norm unit ball in K^{m x n}."""
    s = as_shape(shape)
    beta = check_beta(beta)
    m, n = s.m, s.n
    log_v = (_half_gamma_sum(m, beta) + _half_gamma_sum(n, beta) - _half_gamma_sum(m + n, beta)
             + beta * m * n / 2 * LOG_PI)
    return LogValue.from_log(log_v)


def schatten_inf_log_volume_gamma_form(shape, beta) -> LogValue:
    """Same volume, written with multivariate gamma functions."""
    s = as_shape(shape)
    beta = check_beta(beta)
    m, n = s.m, s.n

    def mg(k):
        return multivariate_log_gamma(k, beta, 1 + beta * (k - 1) / 2)

    return LogValue.from_log(mg(m) + mg(n) - mg(m + n) + beta * m * n * LOG_PI)


def volume_radius(shape, beta) -> float:
    """Finite-size normalized radius (beta n)^{1/2} V^{1/(beta m n)}."""
    s = as_shape(shape)
    d = s.real_dim(beta)
    return math.sqrt(beta * s.n) * math.exp(schatten_inf_log_volume(s, beta).log_mag / d)


def volume_radius_limit_inf(c: float, beta=1) -> float:
    """Limit of (beta n)^{1/2} V^{1/(beta m n)} as m/n -> c; independent of beta."""
    check_beta(beta)
    if not 0 <= c <= 1:
        raise DomainError(f"c must lie in [0, 1], got {c}")
    base = math.sqrt(2 * math.pi * math.exp(1.5) / (1 + c))
    if c == 0:
        # (1+c)^{1/c} -> e and (1+1/c)^c -> 1
        return base * math.exp(-0.25)
    return base * (1 + c) ** (-1 / (4 * c)) * (1 + 1 / c) ** (-c / 4)


def second_moment_ratio(shape, beta) -> Fraction:
    """Exact ratio of the integral of <x,x> over the ball to its volume."""
    s = as_shape(shape)
    beta = check_beta(beta)
    return Fraction(s.m * s.n) / (s.m + s.n - 1 + Fraction(2, beta))


def isotropy_constant_sq(shape, beta) -> float:
    """Squared isotropy constant L^2 of the Schatten-inf ball."""
    s = as_shape(shape)
    d = s.real_dim(beta)
    log_v = schatten_inf_log_volume(s, beta).log_mag
    return float(second_moment_ratio(s, beta)) / d * math.exp(-2 * log_v / d)


def isotropy_constant_sq_limit(c: float) -> float:
    """Limit of L^2 when m/n -> c in (0, 1]."""
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    return (1 + c) ** (1 / (2 * c)) * (1 + 1 / c) ** (c / 2) / (2 * math.pi * math.exp(1.5))


def cone_to_hausdorff_density(x, p) -> float:
    """<nu(x), x> at a point x of the unit Schatten-p sphere.

    The density of the cone measure relative to normalized Hausdorff measure
    is proportional to this inner product of the outer normal with x.
    """
    p = check_p(p)
    a = _entries(x)
    if not np.all(np.isfinite(a)):
        raise DomainError("non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    norm = s[0] if p == INF else np.sum(s ** p) ** (1 / p)
    if abs(norm - 1) > SPHERE_TOL:
        raise DomainError(f"x is not on the unit S_p sphere (norm {norm!r})")
    if p == INF:
        return 1.0
    m = min(a.shape)
    if p <= 1 and np.any(s[:m] <= 1e-14 * s[0]):
        raise SingularityError("the S_p norm is not differentiable at rank-deficient x for p <= 1")
    return float(np.sum(s[:m] ** (2 * p - 2)) ** -0.5)


def sphere_hausdorff_measure(shape, beta, p, ball_log_volume: float | None = None) -> LogValue:
    """Hausdorff measure of the unit Schatten-p sphere for p in {1, 2, inf}."""
    s = as_shape(shape)
    beta = check_beta(beta)
    p = check_p(p)
    d = s.real_dim(beta)
    if p == INF:
        log_v = schatten_inf_log_volume(s, beta).log_mag
        return LogValue.from_log(math.log(d) + log_v)
    if p == 2:
        return LogValue.from_log(math.log(d) + euclidean_ball_log_volume(d))
    if p == 1:
        if ball_log_volume is None:
            raise UnsupportedError("the S_1 ball volume has no closed form; pass ball_log_volume")
        return LogValue.from_log(math.log(beta * s.m ** 1.5 * s.n) + ball_log_volume)
    raise UnsupportedError("cone and Hausdorff measures differ by a non-constant density unless p in {1, 2, inf}")


def _check_radii(r_singular_values, m):
    r = np.asarray(r_singular_values, dtype=float)
    if r.shape != (m,):
        raise DomainError(f"expected {m} singular values, got shape {r.shape}")
    if np.any(r <= 0):
        raise DomainError("r must be regular (all singular values > 0)")
    return r


def scaled_ball_log_volume(r_singular_values: Sequence[float], shape, beta) -> LogValue:
    """Volume of r B, where B is the Schatten-inf ball and r an m x m matrix."""
    s = as_shape(shape)
    beta = check_beta(beta)
    r = _check_radii(r_singular_values, s.m)
    return LogValue.from_log(schatten_inf_log_volume(s, beta).log_mag + beta * s.n * math.fsum(np.log(r)))


def stiefel_hausdorff_dim(shape, beta) -> int:
    s = as_shape(shape)
    beta = check_beta(beta)
    return beta * s.m * (2 * s.n - s.m + 1) // 2 - s.m


def scaled_stiefel_log_measure(r_singular_values: Sequence[float], shape, beta) -> LogValue:
    """Hausdorff measure of r S, S the set of m x n matrices with orthonormal rows."""
    s = as_shape(shape)
    beta = check_beta(beta)
    m, n = s.m, s.n
    r = _check_radii(r_singular_values, m)
    sq = r ** 2
    iu = np.triu_indices(m, 1)
    log_h = (-beta * m * (m - 1) / 4 * math.log(2)
             + (beta * (n - m + 1) - 1) * math.fsum(np.log(r))
             + beta / 2 * math.fsum(np.log(sq[iu[0]] + sq[iu[1]]))
             + stiefel_log_volume(n, m, beta))
    return LogValue.from_log(log_h)


def cone_measure_moment(m: int, q: float, alpha: float) -> LogValue:
    """Integral of prod theta_i^alpha over the positive orthant under the l_q cone measure."""
    if m < 1 or not q > 0:
        raise DomainError("need m >= 1 and q > 0")
    if not alpha > -1:
        raise DomainError(f"alpha must exceed -1, got {alpha}")
    t = (alpha + 1) / q
    log_val = (m * gammaln(t) - math.log(m) - lp_ball_log_volume(m, q)
               - (m - 1) * math.log(q) - gammaln(m * t))
    return LogValue.from_log(float(log_val))


def schatten_p_volume_radius_asymptotic(c: float, p: float, B: float, beta=1) -> float:
    """Limit of (beta n)^{1/2+1/p} V_p^{1/(beta m n)} for the Schatten-p ball.

    ``B`` is the constant B_{c,p}. The factor (e beta p / c)^{1/p} carries beta;
    for beta = 1 it is (e p / c)^{1/p}.
    """
    beta = check_beta(beta)
    p = check_p(p)
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    if p == INF:
        raise DomainError("use volume_radius_limit_inf for p = inf")
    edge = 1.0 if c == 1 else (1 - c) ** ((1 - c) ** 2 / (4 * c))
    return (math.sqrt(2 * math.pi * math.exp(1.5)) * (math.e * beta * p / c) ** (1 / p)
            * math.exp(B) * edge * c ** (-c / 4))
