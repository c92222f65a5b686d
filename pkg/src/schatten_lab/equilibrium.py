"""Numerical minimization of the log-gas energy J_{c,p} over probability measures.

J0(nu) = -(c/2) int int log|x - y| dnu dnu + int V dnu, where
V(x) = x^{p/2} - ((1-c)/2) log x on [0, inf) for finite p, and
V(x) = -((1-c)/2) log x on [0, 1] for p = inf. B_{c,p} = -min J0.

The measure is discretized as a piecewise-constant density on a Chebyshev
grid. Cell-averaged kernel and field are computed exactly, so the discrete
energy is the true energy of the piecewise-constant density, and the
resulting convex QP on the simplex is solved by a primal active-set method.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DomainError
from .geometry import INF, check_p
from .limit_laws import GridMeasure

MAX_ITERATIONS = 10_000
TOLERANCE = 1e-6

_TH, _TW = np.polynomial.legendre.leggauss(200)
_TH = (_TH + 1) * math.pi / 2
_TW = _TW * math.pi / 2


@dataclass(frozen=True)
class EqProblem:
    c: float
    p: float
    grid_size: int = 400
    domain_cap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", check_p(self.p))
        if not 0 < self.c <= 1:
            raise DomainError(f"c must lie in (0, 1], got {self.c}")
        if self.grid_size < 50:
            raise DomainError("grid_size must be at least 50")
        if self.domain_cap is not None and not self.domain_cap > 0:
            raise DomainError("domain_cap must be positive")


@dataclass(frozen=True, eq=False)
class EqSolution:
    measure: GridMeasure
    energy: float
    endpoints: tuple
    iterations: int
    residual: float
    edges: np.ndarray = field(repr=False)
    problem: EqProblem = None

    @property
    def B(self) -> float:
        return -self.energy

    @property
    def cell_weights(self) -> np.ndarray:
        """Weights on every grid cell, including the zero ones."""
        mids = (self.edges[:-1] + self.edges[1:]) / 2
        out = np.zeros(mids.size)
        out[np.searchsorted(mids, self.measure.nodes)] = self.measure.weights
        return out

    def density(self) -> np.ndarray:
        return self.cell_weights / np.diff(self.edges)

    def cdf(self, x):
        """CDF of the piecewise-constant density (linear inside each cell)."""
        cum = np.concatenate([[0.0], np.cumsum(self.cell_weights)])
        return np.interp(x, self.edges, cum)

    def to_json(self) -> str:
        prob = self.problem
        p = prob.p if prob is not None else math.nan
        payload = {
            "c": prob.c if prob is not None else None,
            "p": "inf" if p == INF else p,
            "grid": self.measure.nodes.tolist(),
            "weights": self.measure.weights.tolist(),
            "energy": self.energy,
            "B": self.B,
            "endpoints": list(self.endpoints),
            "residual": self.residual,
            "iterations": self.iterations,
        }
        return json.dumps(payload, sort_keys=True)


def _phi(t):
    # second antiderivative of log|t|
    t = np.asarray(t, dtype=float)
    out = -0.75 * t * t
    nz = t != 0
    out[nz] += t[nz] ** 2 / 2 * np.log(np.abs(t[nz]))
    return out


def log_kernel_cells(edges) -> np.ndarray:
    """Average of log|x - y| over each pair of cells."""
    a, b = edges[:-1], edges[1:]
    h = b - a
    mid = (a + b) / 2
    dist = np.abs(mid[:, None] - mid[None, :])
    hmax = np.maximum(h[:, None], h[None, :])
    near = dist <= 6 * hmax
    with np.errstate(divide="ignore", invalid="ignore"):
        # two-term expansion of the cell average for well separated cells
        far = np.log(dist) - (h[:, None] ** 2 + h[None, :] ** 2) / (24 * dist ** 2)
    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    exact = (_phi(B - C) - _phi(A - C) - _phi(B - D) + _phi(A - D)) / (h[:, None] * h[None, :])
    return np.where(near, exact, far)


def _xlogx_minus_x(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos]) - x[pos]
    return out


def external_field_cells(edges, c, p) -> np.ndarray:
    """Average of V over each cell."""
    a, b = edges[:-1], edges[1:]
    h = b - a
    f = -(1 - c) / 2 * (_xlogx_minus_x(b) - _xlogx_minus_x(a)) / h
    if p != INF:
        s = p / 2 + 1
        with np.errstate(over="ignore"):
            f = f + (b ** s - a ** s) / (s * h)
    return np.minimum(f, 1e300)


def chebyshev_edges(cap, cells) -> np.ndarray:
    k = np.arange(cells + 1)
    e = cap * (1 - np.cos(math.pi * k / cells)) / 2
    e[0], e[-1] = 0.0, cap
    return e


def _kkt_residual(H, g, w, free):
    grad = H @ w + g
    support = free & (w > 0)
    lam = float(np.mean(grad[support])) if support.any() else float(np.min(grad))
    r_free = np.max(np.abs(grad[free] - lam)) if free.any() else 0.0
    bound = ~free
    r_bound = np.max(np.maximum(0.0, lam - grad[bound])) if bound.any() else 0.0
    return float(max(r_free, r_bound)), lam


def simplex_qp(H, g, w0=None, tol=TOLERANCE, max_iterations=MAX_ITERATIONS):
    """min 1/2 w'Hw + g'w subject to w >= 0, sum w = 1 (primal active set).

    H only needs to be positive definite on the zero-sum directions.
    Returns (w, iterations, residual).
    """
    n = g.size
    w = np.full(n, 1.0 / n) if w0 is None else np.asarray(w0, dtype=float).copy()
    free = w > 0
    w[~free] = 0.0
    w /= w.sum()
    for it in range(1, max_iterations + 1):
        F = np.flatnonzero(free)
        k = F.size
        grad = H @ w + g
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = H[np.ix_(F, F)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([-grad[F], [0.0]])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            res, _ = _kkt_residual(H, g, w, free)
            raise ConvergenceError("singular KKT system", res, it) from exc
        step = sol[:k]
        if np.max(np.abs(step)) <= 1e-14:
            res, lam = _kkt_residual(H, g, w, free)
            mult = grad - lam
            bound = np.flatnonzero(~free)
            if bound.size == 0 or mult[bound].min() >= -tol:
                return w, it, res
            free[bound[np.argmin(mult[bound])]] = True
            continue
        alpha, block = 1.0, -1
        shrinking = step < 0
        if shrinking.any():
            ratios = -w[F][shrinking] / step[shrinking]
            j = int(np.argmin(ratios))
            if ratios[j] < 1.0:
                alpha = float(ratios[j])
                block = int(F[np.flatnonzero(shrinking)[j]])
        w[F] += alpha * step
        if block >= 0:
            w[block] = 0.0
            free[block] = False
        np.maximum(w, 0.0, out=w)
    res, _ = _kkt_residual(H, g, w, free)
    raise ConvergenceError(f"active-set solver hit {max_iterations} iterations", res, max_iterations)


def _field_derivative(x, c, p):
    return p * x ** (p / 2 - 1) / (2 * c) - (1 - c) / (2 * c * x)


def _endpoint_equations(a, b, c, p):
    # both integrals after x = (a+b)/2 - (b-a)/2 cos(theta); the square-root
    # weights become (1 -+ cos theta) (b-a)/2
    x = (a + b) / 2 - (b - a) / 2 * np.cos(_TH)
    q = _field_derivative(x, c, p) * (b - a) / 2
    lower = np.sum(_TW * q * (1 + np.cos(_TH))) + math.pi
    upper = np.sum(_TW * q * (1 - np.cos(_TH))) - math.pi
    return np.array([lower, upper])


def _c1_right_endpoint(p):
    # (p/2) b^{p/2} B((p+1)/2, 1/2) = pi
    return (2 * math.pi / (p * special.beta((p + 1) / 2, 0.5))) ** (2 / p)


def support_endpoints(c: float, p) -> tuple[float, float]:
    """Support [a, b] of the minimizer for finite p.

    For c = 1 the left endpoint is the hard edge 0 and the right one solves
    the single soft-edge equation in closed form; otherwise both equations
    are solved with a 2-d root finder in log coordinates.
    """
    p = check_p(p)
    if p == INF:
        raise DomainError("support_endpoints needs a finite p")
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    b1 = _c1_right_endpoint(p)
    if c == 1:
        return 0.0, b1
    r = math.sqrt(c)
    base = np.log([(1 - r) ** 2 / 2, (1 + r) ** 2 / 2])
    tried = []
    for shift in (math.log(b1 / 2), 0.0, math.log(b1 / 2) / 2, math.log(b1 / 2) * 1.5):
        guess = base + shift
        sol = optimize.root(lambda z: _endpoint_equations(math.exp(z[0]), math.exp(z[1]), c, p),
                            guess, method="hybr", options={"xtol": 1e-14})
        a, b = (float(v) for v in np.exp(sol.x))
        res = float(np.max(np.abs(_endpoint_equations(a, b, c, p))))
        tried.append((tuple(np.exp(guess)), (a, b), res))
        if a < b and res <= 1e-6:
            return a, b
    raise ConvergenceError(f"endpoint equations did not converge; attempts (guess, result, residual): {tried}",
                           min(t[2] for t in tried), len(tried))


def default_cap(c, p) -> float:
    if p == INF:
        return 1.0
    try:
        return 2 * support_endpoints(c, p)[1]
    except ConvergenceError:
        return 4 / c


def solve_equilibrium(prob: EqProblem) -> EqSolution:
    """Minimize the discretized B-free energy J0 over the probability simplex."""
    c, p = prob.c, prob.p
    cap = prob.domain_cap if prob.domain_cap is not None else default_cap(c, p)
    if p == INF:
        cap = min(cap, 1.0)
    edges = chebyshev_edges(cap, prob.grid_size)
    H = -c * log_kernel_cells(edges)
    g = external_field_cells(edges, c, p)

    # start uniform on the cells inside the predicted support when available
    w0 = None
    try:
        lo, hi = (((1 - c) / (1 + c)) ** 2, 1.0) if p == INF else support_endpoints(c, p)
        mids = (edges[:-1] + edges[1:]) / 2
        inside = (mids >= lo) & (mids <= hi)
        if inside.sum() >= 2:
            w0 = inside.astype(float)
    except ConvergenceError:
        pass
    w, iterations, residual = simplex_qp(H, g, w0)
    if residual > TOLERANCE:
        raise ConvergenceError(f"KKT residual {residual:.3e} above tolerance", residual, iterations)
    energy = float(0.5 * w @ H @ w + g @ w)
    mids = (edges[:-1] + edges[1:]) / 2
    keep = w > 0
    measure = GridMeasure(mids[keep], w[keep])
    charged = np.flatnonzero(w > 1e-6 / prob.grid_size)
    endpoints = (float(mids[charged[0]]), float(mids[charged[-1]]))
    return EqSolution(measure, energy, endpoints, iterations, residual, edges, prob)


def b_numeric(c: float, p, grid_size: int = 400) -> float:
    """B_{c,p} = -min J0 from the discretized problem."""
    return solve_equilibrium(EqProblem(c, p, grid_size)).B


def b_numeric_error(c: float, p, grid_size: int = 400) -> float:
    """Discretization error estimate for b_numeric: Richardson gap to the half grid."""
    fine = b_numeric(c, p, grid_size)
    coarse = b_numeric(c, p, max(50, grid_size // 2))
    return abs(fine - coarse) / 3
