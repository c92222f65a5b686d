"""Log-space special functions: gamma, multivariate gamma, Stiefel volumes, Selberg."""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

FieldParam = Literal[1, 2]

# Constant term of the gamma-product expansion, fixed numerically (see
# estimate_gamma_product_constant). A_2 coincides with zeta'(-1).
GAMMA_PRODUCT_CONSTANT = {
    1: -0.284878499513621,
    2: -0.165421143700451,
}

LOG_PI = math.log(math.pi)
LOG_2 = math.log(2.0)


def check_beta(beta) -> int:
    """Validate the field parameter; 1 is the real case, 2 the complex one."""
    if isinstance(beta, bool) or beta not in (1, 2):
        raise DomainError(f"beta must be 1 or 2, got {beta!r}")
    return int(beta)


# ln 2 split for Cody-Waite reduction: LN2_HI has trailing zero bits so k*LN2_HI is exact
LN2_HI = 6.93147180369123816490e-01
LN2_LO = 1.90821492927058770002e-10


class LogValue:
    """Signed number stored in log space as (sign, log|x|).

    Internally log|x| is kept as ``k ln 2 + r`` with integer ``k`` and
    ``|r| <= ln 2 / 2``, so converting back with ``ldexp`` does not lose the
    ~1e-13 relative accuracy that a plain ``exp(log_mag)`` loses near 1e300.
    """

    __slots__ = ("sign", "_k", "_r")

    def __init__(self, sign: int, log_mag: float = 0.0):
        if sign not in (-1, 0, 1):
            raise DomainError(f"sign must be -1, 0 or 1, got {sign!r}")
        self.sign = int(sign)
        if self.sign == 0:
            self._k, self._r = 0, -math.inf
            return
        log_mag = float(log_mag)
        if math.isnan(log_mag):
            raise DomainError("log_mag is NaN")
        if math.isinf(log_mag):
            self._k, self._r = 0, log_mag
            return
        self._k, self._r = _reduce(0, log_mag)

    @property
    def log_mag(self) -> float:
        if self.sign == 0:
            return -math.inf
        return self._k * LN2_HI + (self._k * LN2_LO + self._r)

    @classmethod
    def _from_parts(cls, sign, k, r):
        out = cls.__new__(cls)
        out.sign = sign
        out._k, out._r = _reduce(k, r)
        return out

    @classmethod
    def from_real(cls, x: float) -> "LogValue":
        x = float(x)
        if x == 0:
            return cls(0)
        if not math.isfinite(x):
            raise DomainError(f"cannot represent {x!r}")
        frac, e = math.frexp(abs(x))
        return cls._from_parts(1 if x > 0 else -1, e, math.log(frac))

    @classmethod
    def from_log(cls, log_mag: float) -> "LogValue":
        return cls(1, log_mag)

    def to_real(self) -> float:
        """Convert back to a float; overflows to +-inf beyond the double range."""
        if self.sign == 0 or self._r == -math.inf:
            return 0.0
        if self._r == math.inf:
            return self.sign * math.inf
        try:
            return self.sign * math.ldexp(math.exp(self._r), self._k)
        except OverflowError:
            return self.sign * math.inf

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue(0)
        return LogValue._from_parts(self.sign * other.sign, self._k + other._k, self._r + other._r)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.sign == 0:
            return LogValue(0)
        return LogValue._from_parts(self.sign * other.sign, self._k - other._k, self._r - other._r)

    def __pow__(self, k: float) -> "LogValue":
        if self.sign == 0:
            return LogValue(0) if k > 0 else LogValue(1, 0.0)
        if self.sign < 0 and float(k) != int(k):
            raise DomainError("non-integer power of a negative LogValue")
        sign = 1 if self.sign > 0 or int(k) % 2 == 0 else -1
        if float(k) == int(k):
            return LogValue._from_parts(sign, self._k * int(k), self._r * int(k))
        return LogValue(sign, self.log_mag * k)

    def __eq__(self, other):
        if not isinstance(other, LogValue):
            return NotImplemented
        return self.sign == other.sign and (self.sign == 0 or (self._k, self._r) == (other._k, other._r))

    def __hash__(self):
        return hash((self.sign, self._k, self._r))

    def __repr__(self):
        return f"LogValue(sign={self.sign}, log_mag={self.log_mag!r})"


def _reduce(k, r):
    if math.isinf(r):
        return k, r
    j = round(r / math.log(2.0))
    if j:
        r = (r - j * LN2_HI) - j * LN2_LO
        k += j
    return int(k), r


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return float(gammaln(x))


def multivariate_log_gamma(m: int, beta: FieldParam, z: float) -> float:
    r"""ln Gamma_{m,beta}(z) = (beta m(m-1)/4) ln(pi) + \sum_k ln Gamma(z - beta k/2)."""
    beta = check_beta(beta)
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    if not z > beta * (m - 1) / 2:
        raise DomainError(f"z={z} is at or below the pole threshold {beta * (m - 1) / 2}")
    k = np.arange(m)
    return beta * m * (m - 1) / 4 * LOG_PI + math.fsum(gammaln(z - beta * k / 2))


def stiefel_log_volume(n: int, m: int, beta: FieldParam) -> float:
    """Log of the Riemannian volume omega_{n,m;beta} of the Stiefel manifold.

    ``m = 0`` is accepted and gives 0 (the empty frame), which keeps the
    quotient identity valid at ``m = n``.
    """
    beta = check_beta(beta)
    if m == 0 and n >= 0:
        return 0.0
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    return ((m + beta * m * (m - 1) / 4) * LOG_2
            + beta * m * n / 2 * LOG_PI
            - multivariate_log_gamma(m, beta, beta * n / 2))


def selberg_log_integral(m: int, a: float, b: float, g: float) -> float:
    """Log of the Selberg integral S_m(a, b, g).

    Integral over [0,1]^m of prod x_i^(a-1) (1-x_i)^(b-1) prod_{i<j} |x_i-x_j|^(2g).
    """
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    if not (a > 0 and b > 0):
        raise DomainError("Selberg integral needs a > 0 and b > 0")
    bound = 1 / m if m == 1 else min(1 / m, a / (m - 1), b / (m - 1))
    if not g > -bound:
        raise DomainError(f"g={g} outside the convergence region g > {-bound}")
    k = np.arange(m)
    terms = (gammaln(a + k * g) + gammaln(b + k * g) + gammaln(g + 1 + k * g)
             - gammaln(a + b + (m - 1) * g + k * g) - gammaln(g + 1))
    return math.fsum(terms)


def _gamma_product_smooth_part(n, beta):
    # Every term of the expansion except the constant A_beta.
    L = math.log(beta * n / 2)
    return (beta * n * n / 4 * L
            - 3 * beta * n * n / 8
            + (beta - 2) * n / 4 * L
            + n / 4 * math.log(4 * math.pi ** 2 * math.exp(2 - beta))
            + (beta * beta - 6 * beta + 4) / (24 * beta) * L)


def gamma_product_log(n: int, beta: FieldParam, mode: str = "exact") -> float:
    """ln prod_{k=1}^n Gamma(beta k/2), exactly or via its large-n expansion."""
    beta = check_beta(beta)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if mode == "exact":
        return math.fsum(gammaln(beta * np.arange(1, n + 1) / 2))
    if mode == "asymptotic":
        return _gamma_product_smooth_part(n, beta) + GAMMA_PRODUCT_CONSTANT[beta]
    raise DomainError(f"mode must be 'exact' or 'asymptotic', got {mode!r}")


def estimate_gamma_product_constant(beta: FieldParam, n_values=(2500, 5000, 10000), dps: int = 40) -> float:
    """Recompute A_beta by Richardson extrapolation in 1/n.

    Uses mpmath so the large cancellations do not eat the digits. The default
    ``n_values`` must form a geometric progression with ratio 2.
    """
    import mpmath

    beta = check_beta(beta)
    n1, n2, n4 = n_values
    if not (n2 == 2 * n1 and n4 == 2 * n2):
        raise DomainError("n_values must be (N, 2N, 4N)")
    with mpmath.workdps(dps):
        b = mpmath.mpf(beta)

        def residual(n):
            exact = mpmath.fsum(mpmath.loggamma(b * k / 2) for k in range(1, n + 1))
            L = mpmath.log(b * n / 2)
            smooth = (b * n * n / 4 * L - 3 * b * n * n / 8 + (b - 2) * n / 4 * L
                      + n / 4 * mpmath.log(4 * mpmath.pi ** 2 * mpmath.e ** (2 - b))
                      + (b * b - 6 * b + 4) / (24 * b) * L)
            return exact - smooth

        # eliminates the C/n and D/n^2 terms
        value = (8 * residual(n4) - 6 * residual(n2) + residual(n1)) / 3
        return float(value)


def lp_ball_log_volume(m: int, q: float) -> float:
    """Log-volume of the real l_q^m unit ball."""
    if m < 1 or not q > 0:
        raise DomainError("need m >= 1 and q > 0")
    return m * LOG_2 + m * float(gammaln(1 + 1 / q)) - float(gammaln(1 + m / q))


def euclidean_ball_log_volume(d: int) -> float:
    """Log-volume of the unit Euclidean ball in R^d."""
    if d < 1:
        raise DomainError(f"dimension must be positive, got {d}")
    return d / 2 * LOG_PI - float(gammaln(d / 2 + 1))
