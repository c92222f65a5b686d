"""Singular values, Schatten norms and empirical spectral measures."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .geometry import INF, check_p


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise DomainError("singular values must be non-negative and non-increasing")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finite-atom probability measure on [0, inf)."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.shape != w.shape or x.size == 0:
            raise DomainError("locations and weights must be non-empty and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("weights must be non-negative and sum to 1")
        order = np.argsort(x, kind="stable")
        object.__setattr__(self, "locations", x[order])
        object.__setattr__(self, "weights", w[order])

    @classmethod
    def uniform(cls, locations) -> "EmpiricalMeasure":
        x = np.asarray(locations, dtype=float).ravel()
        return cls(x, np.full(x.size, 1.0 / x.size))

    def moment(self, k: float) -> float:
        return float(np.sum(self.weights * self.locations ** k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["location", "weight"])
        for x, w in zip(self.locations, self.weights):
            writer.writerow([format(x, ".17g"), format(w, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EmpiricalMeasure":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([float(r["location"]) for r in rows], [float(r["weight"]) for r in rows])


def _entries(x):
    a = np.asarray(getattr(x, "entries", x))
    if not np.all(np.isfinite(a)):
        raise DomainError("non-finite entries")
    return a


def singular_values(x) -> SingularSpectrum:
    s = np.linalg.svd(_entries(x), compute_uv=False)
    # LAPACK already returns descending order; sort again so ties stay deterministic
    return SingularSpectrum(np.sort(s, kind="stable")[::-1])


def schatten_norm(x, p) -> float:
    p = check_p(p)
    s = singular_values(x).values
    if p == INF:
        return float(s[0])
    if s[0] == 0:
        return 0.0
    # scale by s_1 to avoid overflow for large p
    return float(s[0] * np.sum((s / s[0]) ** p) ** (1 / p))


def empirical_spectrum_measure(x, p=INF, scaling: str = "none") -> EmpiricalMeasure:
    """(1/m) sum of point masses at s_i(x) or at m^{1/p} s_i(x)."""
    s = singular_values(x).values
    if scaling == "m_pow":
        p = check_p(p)
        if p == INF:
            raise DomainError("m_pow scaling needs a finite p")
        s = s * s.size ** (1 / p)
    elif scaling != "none":
        raise DomainError(f"scaling must be 'none' or 'm_pow', got {scaling!r}")
    return EmpiricalMeasure.uniform(s)


def _as_measure(emp):
    if isinstance(emp, EmpiricalMeasure):
        return emp
    return EmpiricalMeasure.uniform(emp)


def ks_distance(emp, cdf: Callable) -> float:
    """sup |F_emp - F| checked on both sides of every atom.

    Left limits of ``cdf`` are taken one ulp below the atom, so CDFs with
    jumps (point masses) are handled.
    """
    emp = _as_measure(emp)
    x, w = emp.locations, emp.weights
    ux, idx = np.unique(x, return_index=True)
    cum = np.cumsum(w)
    right = np.append(cum[idx[1:] - 1], cum[-1]) if ux.size > 1 else np.array([cum[-1]])
    left = np.concatenate([[0.0], right[:-1]])
    f_at = np.asarray(cdf(ux), dtype=float)
    f_before = np.asarray(cdf(np.nextafter(ux, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(right - f_at)), np.max(np.abs(left - f_before))))


def ks_two_sample(a, b) -> float:
    """Two-sample KS statistic between finite-atom measures (or raw samples)."""
    ma, mb = _as_measure(a), _as_measure(b)
    grid = np.union1d(ma.locations, mb.locations)
    fa = np.concatenate([[0.0], np.cumsum(ma.weights)])[np.searchsorted(ma.locations, grid, side="right")]
    fb = np.concatenate([[0.0], np.cumsum(mb.weights)])[np.searchsorted(mb.locations, grid, side="right")]
    return float(np.max(np.abs(fa - fb)))


def wasserstein1(emp_a, emp_b) -> float:
    """Exact W1 between finite-atom measures: integral of |F_a - F_b|."""
    ma, mb = _as_measure(emp_a), _as_measure(emp_b)
    grid = np.union1d(ma.locations, mb.locations)
    if grid.size < 2:
        return 0.0
    fa = np.concatenate([[0.0], np.cumsum(ma.weights)])[np.searchsorted(ma.locations, grid[:-1], side="right")]
    fb = np.concatenate([[0.0], np.cumsum(mb.weights)])[np.searchsorted(mb.locations, grid[:-1], side="right")]
    return float(math.fsum(np.abs(fa - fb) * np.diff(grid)))


def wasserstein1_cdf(cdf_a: Callable, cdf_b: Callable, lo: float, hi: float, points: int = 20001) -> float:
    """W1 between two laws on [lo, hi] given by CDFs, via the trapezoid rule."""
    t = np.linspace(lo, hi, points)
    return float(np.trapezoid(np.abs(np.asarray(cdf_a(t)) - np.asarray(cdf_b(t))), t))
