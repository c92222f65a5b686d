"""Limiting singular-value densities, the constants B_{c,p} and the rate functions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, UnsupportedError
from .geometry import INF, check_p

FAMILIES = ("nu_c2", "mu_c2_sq", "mu_c2", "nu_c_inf", "mu_c_inf")

_GL_T, _GL_W = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class LimitDensity:
    """One of the closed-form minimizers, parametrized by c = lim m/n.

    All of them have at most inverse-square-root endpoint singularities, so
    after x = mid - half*cos(theta) the integrand on [0, pi] is smooth.
    """

    family: str
    c: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not 0 < self.c <= 1:
            raise DomainError(f"c must lie in (0, 1], got {self.c}")

    @property
    def support(self) -> tuple[float, float]:
        c = self.c
        r = math.sqrt(c)
        if self.family == "nu_c2":
            return (1 - r) ** 2 / 2, (1 + r) ** 2 / 2
        if self.family == "mu_c2_sq":
            return (1 - r) ** 2, (1 + r) ** 2
        if self.family == "mu_c2":
            return 1 - r, 1 + r
        t = (1 - c) / (1 + c)
        if self.family == "nu_c_inf":
            return t * t, 1.0
        return t, 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        c = self.c
        inside = (x >= lo) & (x <= hi)
        xs = np.where(inside, x, (lo + hi) / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "nu_c2":
                val = np.sqrt((hi - xs) * (xs - lo)) / (c * math.pi * xs)
            elif self.family == "mu_c2_sq":
                val = np.sqrt((hi - xs) * (xs - lo)) / (2 * math.pi * c * xs)
            elif self.family == "mu_c2":
                val = np.sqrt((hi * hi - xs * xs) * (xs * xs - lo * lo)) / (math.pi * c * xs)
            elif self.family == "nu_c_inf":
                val = (1 + c) / (2 * c * math.pi * xs) * np.sqrt(xs - lo) / np.sqrt(1 - xs)
            else:
                val = (1 + c) / (c * math.pi * xs) * np.sqrt(xs * xs - lo * lo) / np.sqrt(1 - xs * xs)
        if self.c == 1 and xs.size and np.any(xs == 0):
            # at c = 1 the left edge is 0: removable 0/0 for the quarter-circle
            # and absolute arcsine laws, an inverse-square-root pole otherwise
            edge = 2 / math.pi if self.family in ("mu_c2", "mu_c_inf") else math.inf
            val = np.where(xs == 0, edge, val)
        return np.where(inside, val, 0.0)

    def _x_of(self, theta):
        lo, hi = self.support
        return (lo + hi) / 2 - (hi - lo) / 2 * np.cos(theta)

    def _g(self, theta):
        lo, hi = self.support
        sin = np.sin(theta)
        with np.errstate(invalid="ignore"):
            out = self.pdf(self._x_of(theta)) * (hi - lo) / 2 * sin
        # an endpoint pole times sin(0) = 0 only occurs on zero-length pieces
        return np.where(sin == 0, 0.0, out)

    def _theta_of(self, x):
        lo, hi = self.support
        u = (lo + hi - 2 * np.asarray(x, dtype=float)) / (hi - lo)
        return np.arccos(np.clip(u, -1.0, 1.0))

    def cdf(self, x):
        """CDF via 64-point Gauss-Legendre in theta on [0, theta(x)]."""
        th = np.atleast_1d(self._theta_of(x))
        nodes = th[:, None] * (_GL_T[None, :] + 1) / 2
        vals = self._g(nodes) @ _GL_W * th / 2
        out = np.clip(vals, 0.0, 1.0)
        return out if np.ndim(x) else float(out[0])

    def mass(self, theta_edges):
        """Masses of the cells between consecutive theta edges."""
        a, b = theta_edges[:-1], theta_edges[1:]
        nodes = a[:, None] + (b - a)[:, None] * (_GL_T[None, :] + 1) / 2
        g = self._g(nodes)
        mass = g @ _GL_W * (b - a) / 2
        first = (g * self._x_of(nodes)) @ _GL_W * (b - a) / 2
        return mass, first


def density_eval(d: LimitDensity, x):
    """Pointwise density; 0 outside the support, possibly inf at an endpoint."""
    out = d.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def density_moment(d: LimitDensity, k: float) -> float:
    """Integral of x^k against the density (adaptive quadrature in theta)."""
    if k < 0:
        raise DomainError("moment order must be non-negative")
    val, _ = integrate.quad(lambda t: d._x_of(t) ** k * d._g(t), 0.0, math.pi,
                            epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(val)


def density_curve(d: LimitDensity, points: int = 1000):
    lo, hi = d.support
    x = np.linspace(lo, hi, points)
    return x, d.pdf(x)


def density_curve_csv(d: LimitDensity, points: int = 1000) -> str:
    x, y = density_curve(d, points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "density"])
    for a, b in zip(x, y):
        w.writerow([format(a, ".17g"), format(b, ".17g")])
    return buf.getvalue()


def _xlogx_over_c(c):
    # ((1-c)^2 / (4c)) log(1-c), with the c = 1 limit 0
    return 0.0 if c == 1 else (1 - c) ** 2 / (4 * c) * math.log(1 - c)


def b_constant(c: float, p) -> float:
    """Closed-form B_{c,p} for p in {2, inf}."""
    p = check_p(p)
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    if p == 2:
        return -0.75 - math.log(2) / 2 + c / 4 * math.log(c) - _xlogx_over_c(c)
    if p == INF:
        return c / 2 * math.log(c) - _xlogx_over_c(c) - (1 + c) ** 2 / (4 * c) * math.log(1 + c)
    raise UnsupportedError("B_{c,p} has no closed form for p outside {2, inf}; use equilibrium.b_numeric")


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Discrete probability measure on a strictly increasing grid in [0, inf).

    Nodes given in any order are sorted together with their weights.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.shape != w.shape or x.size == 0:
            raise DomainError("nodes and weights must be non-empty and of equal length")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        if np.any(np.diff(x) <= 0):
            raise DomainError("nodes must be distinct")
        if x[0] < 0:
            raise DomainError("nodes must be non-negative")
        total = w.sum()
        if np.any(w < 0) or abs(total - 1) > 1e-9:
            raise DomainError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w / total)

    def moment(self, k: float) -> float:
        return float(np.sum(self.weights * self.nodes ** k))

    def cell_widths(self) -> np.ndarray:
        """Voronoi cell widths, the end cells mirrored (and clipped at 0)."""
        x = self.nodes
        if x.size == 1:
            return np.zeros(1)
        mid = (x[1:] + x[:-1]) / 2
        left = max(0.0, x[0] - (x[1] - x[0]) / 2)
        right = x[-1] + (x[-1] - x[-2]) / 2
        return np.diff(np.concatenate([[left], mid, [right]]))


def discretize(d: LimitDensity, n_nodes: int = 400) -> GridMeasure:
    """Cell masses of ``d`` on a cosine-spaced grid, atoms at the cell centroids.

    Centroids keep the first moment exact and, by Jensen, never push a
    convex moment such as m_p above its true value.
    """
    edges = np.linspace(0.0, math.pi, n_nodes + 1)
    mass, first = d.mass(edges)
    keep = mass > 0
    return GridMeasure(first[keep] / mass[keep], mass[keep] / mass[keep].sum())


def log_energy_sq(mu: GridMeasure) -> float:
    """Discretized double integral of log|x^2 - y^2| d mu d mu.

    Off-diagonal pairs use the atoms directly; each self-pair is replaced by
    the average of log|x - y| + log(x + y) over a uniform spread of the atom
    across its cell of width D: log D - 3/2 + log(2x).
    """
    x, w = mu.nodes, mu.weights
    width = mu.cell_widths()
    with np.errstate(divide="ignore"):
        diff = np.abs(x[:, None] ** 2 - x[None, :] ** 2)
        np.fill_diagonal(diff, 1.0)
        off = w @ np.log(diff) @ w
        plus = np.log(np.where(x > 0, 2 * x, width / 2))
        self_term = np.log(width) - 1.5 + plus
    return float(off + np.sum(w * w * self_term))


def rate_function(mu: GridMeasure, c: float, p, B: float) -> float:
    """I_{c,p}(mu) for a discrete measure, +inf when the constraint fails."""
    p = check_p(p)
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    x, w = mu.nodes, mu.weights
    charged = w > 0
    if p == INF:
        if np.any(x[charged] > 1):
            return math.inf
    elif mu.moment(p) > 1 + 1e-12:
        return math.inf
    if c < 1 and np.any(x[charged] == 0):
        return math.inf
    energy = log_energy_sq(mu)
    if not math.isfinite(energy):
        return math.inf
    single = 0.0 if c == 1 else float(np.sum(w[charged] * np.log(x[charged])))
    value = -c / 2 * energy - (1 - c) * single + B
    if p != INF:
        value += math.log(math.e * p) / p
    return value
