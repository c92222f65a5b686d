"""Monte Carlo checks of the weak limit theorems and of polar independence.

Every check takes an RngStream (or an integer seed) and derives one child
stream per entry of ``n_list``; the entries run in a thread pool, and the
report does not depend on the number of workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .equilibrium import EqSolution
from .errors import DomainError
from .geometry import INF, as_shape, check_p
from .limit_laws import LimitDensity
from .sampling import (
    McmcConfig,
    RngStream,
    _adjoint,
    _herm_power,
    gaussian_matrix_batch,
    schatten_inf_ball_batch,
    schatten_p_sample_batch,
    stiefel_uniform_batch,
)
from .special_fn import check_beta
from .spectral import EmpiricalMeasure, ks_distance

SIGNIFICANCE = 0.01
BOOTSTRAP_REPS = 50
DISTS = ("ball", "sphere", "stiefel")


@dataclass
class CheckReport:
    name: str
    sample_count: int
    statistic: float
    threshold: float
    passed: bool
    seed: int | None
    details: dict = field(default_factory=dict)
    threshold_source: str = ""

    def to_json_line(self) -> str:
        return json.dumps(_plain(asdict(self)), sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise DomainError("checks need an RngStream or an integer seed for reproducible child streams")


def _map(fn: Callable, items: Sequence, threads: int | None):
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(i, x) for i, x in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(items)), items))


def dkw_bound(count: int, alpha: float = SIGNIFICANCE) -> float:
    return math.sqrt(math.log(2 / alpha) / (2 * count))


def _real_coords(z, beta):
    """Flatten entries to real coordinates of unit variance for N_beta."""
    z = np.asarray(z)
    if beta == 1:
        return np.real(z).ravel()
    return math.sqrt(2) * np.concatenate([z.real.ravel(), z.imag.ravel()])


def _ks_normal(values) -> float:
    return ks_distance(EmpiricalMeasure.uniform(values), stats.norm.cdf)


def _bootstrap_se(values, statistic: Callable, rng: RngStream, reps: int = BOOTSTRAP_REPS) -> float:
    gen = rng.generator
    values = np.asarray(values)
    boot = [statistic(values[gen.integers(0, values.size, values.size)]) for _ in range(reps)]
    return float(np.std(boot, ddof=1))


def _monotone(dist, se) -> tuple[bool, list]:
    """Non-increase across consecutive n, within twice the combined MC error."""
    slack = []
    ok = True
    for i in range(1, len(dist)):
        allowed = 2 * math.hypot(se[i - 1], se[i])
        slack.append(dist[i - 1] + allowed - dist[i])
        ok &= dist[i] <= dist[i - 1] + allowed
    return bool(ok), slack


def _draw(dist, m, n, beta, count, rng):
    if dist == "stiefel":
        return stiefel_uniform_batch(n, m, beta, count, rng)
    x = schatten_inf_ball_batch((m, n), beta, count, rng)
    if dist == "sphere":
        # the cone measure of the operator-norm sphere is the ball law divided by s_1
        s1 = np.linalg.norm(x, ord=2, axis=(1, 2))
        x = x / s1[:, None, None]
    return x


def _check_dist(dist):
    if dist not in DISTS:
        raise DomainError(f"dist must be one of {DISTS}, got {dist!r}")


def pmb_check(m: int, k: int, n_list: Sequence[int], beta, dist: str, samples: int, rng,
              threshold: float = 0.03, threads: int | None = None) -> CheckReport:
    """sqrt(n) times the first k columns of X_n against i.i.d. N_beta entries."""
    beta = check_beta(beta)
    _check_dist(dist)
    rng = _stream(rng)
    n_list = [int(n) for n in n_list]
    if k < 1 or k > min(n_list) or m < 1 or any(n < m for n in n_list):
        raise DomainError("need 1 <= k <= min(n_list) and m <= n")

    def one(i, n):
        x = _draw(dist, m, n, beta, samples, rng.child(i))
        vals = _real_coords(math.sqrt(n) * x[:, :, :k], beta)
        d = _ks_normal(vals)
        return d, _bootstrap_se(vals, _ks_normal, rng.child(1000 + i)), vals.size

    out = _map(one, n_list, threads)
    dist_n = [o[0] for o in out]
    se = [o[1] for o in out]
    mono, slack = _monotone(dist_n, se)
    final = dist_n[-1]
    return CheckReport(
        name="pmb", sample_count=samples, statistic=final, threshold=threshold,
        passed=bool(mono and final <= threshold), seed=rng.seed,
        details={"m": m, "k": k, "beta": beta, "dist": dist, "n_list": n_list, "ks": dist_n,
                 "bootstrap_se": se, "monotone": mono, "monotone_slack": slack,
                 "pooled_values": out[-1][2], "dkw_0.01": dkw_bound(out[-1][2])},
        threshold_source="DKW bound at the pooled sample size (alpha 0.01) plus finite-n allowance",
    )


def clt_inner_product_check(m: int, n_list: Sequence[int], beta, dist: str, samples: int, rng,
                            threshold: float = 0.03, threads: int | None = None) -> CheckReport:
    """(beta n/m)^{1/2} <X_n, Y_n> and sqrt(n) X_n Y_n* for independent pairs."""
    beta = check_beta(beta)
    _check_dist(dist)
    rng = _stream(rng)
    n_list = [int(n) for n in n_list]

    def one(i, n):
        sub = rng.child(i)
        x = _draw(dist, m, n, beta, samples, sub)
        y = _draw(dist, m, n, beta, samples, sub)
        inner = np.real(np.sum(x * np.conj(y), axis=(1, 2))) * math.sqrt(beta * n / m)
        matrix = _real_coords(math.sqrt(n) * (x @ _adjoint(y)), beta)
        return _ks_normal(inner), _ks_normal(matrix), float(inner.mean()), float(inner.std(ddof=1))

    out = _map(one, n_list, threads)
    ks_inner, ks_matrix, mean, sd = out[-1]
    mean_ok = abs(mean) <= 3 * sd / math.sqrt(samples)
    statistic = max(ks_inner, ks_matrix)
    return CheckReport(
        name="clt_inner_product", sample_count=samples, statistic=statistic, threshold=threshold,
        passed=bool(statistic <= threshold and mean_ok), seed=rng.seed,
        details={"m": m, "beta": beta, "dist": dist, "n_list": n_list,
                 "ks_inner": [o[0] for o in out], "ks_matrix": [o[1] for o in out],
                 "mean": mean, "sd": sd, "mean_within_3se": mean_ok},
        threshold_source="DKW bound at the sample size (alpha 0.01) plus finite-n allowance",
    )


def _limit_cdf(c, p, eq_solution: EqSolution | None):
    if eq_solution is not None:
        prob = eq_solution.problem
        if prob is not None and (abs(prob.c - c) > 1e-12 or prob.p != p):
            raise DomainError("eq_solution was computed for different (c, p)")
        if p == INF:
            return lambda x: eq_solution.cdf(np.asarray(x) ** 2)
        # s = sqrt(y) / m_{p/2}(nu)^{1/p} turns the minimizer nu of the y-scale
        # energy into the law of m^{1/p} s_i
        scale = eq_solution.measure.moment(p / 2) ** (2 / p)
        return lambda x: eq_solution.cdf(np.asarray(x) ** 2 * scale)
    if p == INF:
        return LimitDensity("mu_c_inf", c).cdf
    if p == 2:
        return LimitDensity("mu_c2", c).cdf
    raise DomainError("closed-form limits exist only for p in {2, inf}; pass eq_solution")


def lln_check(c: float, p, n_list: Sequence[int], beta, dist: str, rng,
              eq_solution: EqSolution | None = None, threshold: float | None = None,
              mcmc: McmcConfig | None = None, threads: int | None = None) -> CheckReport:
    """Single-sample scaled empirical singular-value measure against its limit.

    Scaling is s_i for p = inf and m^{1/p} s_i for finite p.
    """
    beta = check_beta(beta)
    p = check_p(p)
    if dist not in ("ball", "cone"):
        raise DomainError(f"dist must be 'ball' or 'cone', got {dist!r}")
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    rng = _stream(rng)
    n_list = [int(n) for n in n_list]
    cdf = _limit_cdf(c, p, eq_solution)
    cfg = mcmc or McmcConfig(burn_in=1000, thinning=10, chains=1)

    def one(i, n):
        m = max(1, round(c * n))
        sub = rng.child(i)
        if p == INF:
            x = schatten_inf_ball_batch((m, n), beta, 1, sub)[0]
            s = np.linalg.svd(x, compute_uv=False)
            if dist == "cone":
                s = s / s[0]
        else:
            x = schatten_p_sample_batch((m, n), beta, p, dist, 1, sub, cfg)[0][0]
            s = np.linalg.svd(x, compute_uv=False) * m ** (1 / p)

        def ks(v):
            return ks_distance(EmpiricalMeasure.uniform(v), cdf)

        return m, ks(s), _bootstrap_se(s, ks, rng.child(1000 + i))

    out = _map(one, n_list, threads)
    ms = [o[0] for o in out]
    dist_n = [o[1] for o in out]
    se = [o[2] for o in out]
    if threshold is None:
        threshold = 2 / math.sqrt(ms[-1])
        source = "calibrated as 2/sqrt(m) at the largest n"
    else:
        source = "caller supplied"
    mono, slack = _monotone(dist_n, se)
    final = dist_n[-1]
    return CheckReport(
        name="lln", sample_count=len(n_list), statistic=final, threshold=threshold,
        passed=bool(mono and final <= threshold), seed=rng.seed,
        details={"c": c, "p": "inf" if p == INF else p, "beta": beta, "dist": dist, "n_list": n_list,
                 "m_list": ms, "ks": dist_n, "bootstrap_se": se, "monotone": mono,
                 "monotone_slack": slack, "limit": "equilibrium" if eq_solution is not None else "closed form"},
        threshold_source=source,
    )


def _dependent_batch(shape, beta, count, rng):
    # a shared scale s sets both the size of X and a tilt of its polar factor
    s_ = as_shape(shape)
    gen = rng.generator
    scale = gen.uniform(0.5, 1.5, count)
    u = stiefel_uniform_batch(s_.n, s_.m, beta, count, rng)
    u[:, 0, 0] += scale
    polar = _herm_power(u @ _adjoint(u), -0.5) @ u
    return scale[:, None, None] * polar


def polar_independence_check(shape, beta, p, samples: int, rng, law: str = "ball",
                             mcmc: McmcConfig | None = None) -> CheckReport:
    """Independence of tr(XX*) and the (1,1) entry of the polar factor (XX*)^{-1/2} X.

    law: 'ball' (uniform on the Schatten-p ball), 'gaussian', or 'dependent'
    (a control built to fail). The statistic is
    max(chi2 / chi2_crit, |z| / z_crit) for a 4x4 quartile contingency table and
    the Fisher z of the Pearson correlation; the check passes when it is <= 1.
    """
    s = as_shape(shape)
    beta = check_beta(beta)
    p = check_p(p)
    rng = _stream(rng)
    if law == "ball":
        if p == INF:
            x = schatten_inf_ball_batch(s, beta, samples, rng)
        else:
            x = schatten_p_sample_batch(s, beta, p, "ball", samples, rng, mcmc)[0]
    elif law == "gaussian":
        x = gaussian_matrix_batch(s, beta, samples, rng)
    elif law == "dependent":
        x = _dependent_batch(s, beta, samples, rng)
    else:
        raise DomainError(f"law must be 'ball', 'gaussian' or 'dependent', got {law!r}")
    gram = x @ _adjoint(x)
    radial = np.real(np.trace(gram, axis1=1, axis2=2))
    angular = np.real((_herm_power(gram, -0.5) @ x)[:, 0, 0])

    r = float(np.corrcoef(radial, angular)[0, 1])
    z = math.atanh(max(min(r, 1 - 1e-15), -1 + 1e-15)) * math.sqrt(samples - 3)
    z_crit = stats.norm.ppf(1 - SIGNIFICANCE / 2)

    def quartile(v):
        return np.searchsorted(np.quantile(v, [0.25, 0.5, 0.75]), v, side="right")

    table = np.zeros((4, 4))
    np.add.at(table, (quartile(radial), quartile(angular)), 1)
    chi2, _, dof, _ = stats.chi2_contingency(table, correction=False)
    chi2_crit = stats.chi2.ppf(1 - SIGNIFICANCE, dof)
    statistic = max(chi2 / chi2_crit, abs(z) / z_crit)
    return CheckReport(
        name="polar_independence", sample_count=samples, statistic=float(statistic), threshold=1.0,
        passed=bool(statistic <= 1.0), seed=rng.seed,
        details={"m": s.m, "n": s.n, "beta": beta, "p": "inf" if p == INF else p, "law": law,
                 "correlation": r, "fisher_z": z, "z_crit": z_crit, "chi2": chi2, "chi2_dof": dof,
                 "chi2_crit": chi2_crit},
        threshold_source="chi-square and Fisher z critical values at significance 0.01",
    )
