"""Exact and MCMC samplers for Schatten-ball, sphere, Stiefel and matrix-beta laws.

Every public sampler has a single-draw form returning a MatrixSample and a
``*_batch`` form returning a stacked array of shape (count, m, n); the batch
forms are what the Monte Carlo checks use.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .geometry import INF, MatShape, as_shape, check_p
from .special_fn import check_beta

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-14


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream: PCG64 seeded by (master seed, stream path).

    ``stream`` is a tuple of non-negative ints; ``child(k)`` appends ``k``.
    Two RngStreams with the same seed and stream produce the same draws.
    """

    seed: int
    stream: tuple = ()
    algorithm: str = "PCG64"
    _gen: np.random.Generator = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.algorithm != "PCG64":
            raise DomainError(f"unsupported algorithm {self.algorithm!r}")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in self.stream))
        object.__setattr__(self, "_gen", np.random.Generator(np.random.PCG64(ss)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream + (int(k),), self.algorithm)


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 1000
    thinning: int = 10
    step_scale: float = 0.5
    chains: int = 4

    def __post_init__(self):
        if self.burn_in < 0 or self.thinning < 1 or self.chains < 1 or not self.step_scale > 0:
            raise DomainError(f"invalid MCMC configuration {self}")


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """An m x n matrix over R (beta=1) or C (beta=2) with provenance."""

    entries: np.ndarray
    beta: int
    label: str
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        check_beta(self.beta)
        a = np.asarray(self.entries)
        if a.ndim != 2:
            raise DomainError("entries must be a 2-d array")
        if not np.all(np.isfinite(a)):
            raise DomainError("entries must be finite")

    @property
    def shape(self) -> MatShape:
        return MatShape(*self.entries.shape)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError("rng must be an RngStream or numpy Generator")


def _seed_of(rng):
    return rng.seed if isinstance(rng, RngStream) else None


def _adjoint(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _gaussian(gen, size, beta):
    if beta == 1:
        return gen.standard_normal(size)
    return (gen.standard_normal(size) + 1j * gen.standard_normal(size)) / math.sqrt(2)


def _herm_power(s, power):
    """S^power for a batch of positive self-adjoint matrices, eigenvalues clamped."""
    w, v = np.linalg.eigh(s)
    w = np.maximum(w, EIG_FLOOR)
    return (v * w[..., None, :] ** power) @ _adjoint(v)


def gaussian_matrix_batch(shape, beta, count, rng) -> np.ndarray:
    # any (rows, cols) is allowed here; Gaussian matrices need no m <= n
    m, n = (shape.m, shape.n) if isinstance(shape, MatShape) else (int(shape[0]), int(shape[1]))
    return _gaussian(_gen(rng), (count, m, n), check_beta(beta))


def gaussian_matrix(shape, beta, rng) -> MatrixSample:
    """Matrix of i.i.d. N_beta entries (E|X|^2 = 1)."""
    a = gaussian_matrix_batch(shape, beta, 1, rng)[0]
    return MatrixSample(a, beta, "gaussian", _seed_of(rng))


def haar_unitary_batch(n, beta, count, rng) -> np.ndarray:
    """Haar-distributed orthogonal (beta=1) or unitary (beta=2) n x n matrices."""
    beta = check_beta(beta)
    z = _gaussian(_gen(rng), (count, n, n), beta)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phase = d / np.abs(d)
    return q * phase[..., None, :]


def haar_unitary(n, beta, rng) -> np.ndarray:
    return haar_unitary_batch(n, beta, 1, rng)[0]


def stiefel_uniform_batch(n, m, beta, count, rng) -> np.ndarray:
    """Uniform m x n matrices with orthonormal rows, as (G G*)^{-1/2} G."""
    beta = check_beta(beta)
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    gen = _gen(rng)
    g = _gaussian(gen, (count, m, n), beta)
    gram = g @ _adjoint(g)
    w = np.linalg.eigvalsh(gram)
    bad = w[:, 0] <= EIG_FLOOR * np.maximum(w[:, -1], 1.0)
    while np.any(bad):
        log.warning("resampling %d numerically singular Gaussian draws", int(bad.sum()))
        g[bad] = _gaussian(gen, (int(bad.sum()), m, n), beta)
        gram = g @ _adjoint(g)
        w = np.linalg.eigvalsh(gram)
        bad = w[:, 0] <= EIG_FLOOR * np.maximum(w[:, -1], 1.0)
    return _herm_power(gram, -0.5) @ g


def stiefel_uniform(n, m, beta, rng) -> MatrixSample:
    """Uniform point of the Stiefel manifold, stored as its m x n adjoint."""
    a = stiefel_uniform_batch(n, m, beta, 1, rng)[0]
    return MatrixSample(a, beta, "stiefel", _seed_of(rng))


def _beta_second_dof(m, beta):
    # n_2 with beta n_2 / 2 = beta (m-1)/2 + 1
    return m - 1 + 2 // beta


def matrix_beta_batch(m, n, beta, count, rng) -> np.ndarray:
    """Draws of Beta_{m,beta}(beta n/2, beta(m-1)/2 + 1) as m x m matrices."""
    beta = check_beta(beta)
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    gen = _gen(rng)
    g = _gaussian(gen, (count, m, n), beta)
    h = _gaussian(gen, (count, m, _beta_second_dof(m, beta)), beta)
    w = g @ _adjoint(g)
    s_inv_half = _herm_power(w + h @ _adjoint(h), -0.5)
    r = s_inv_half @ w @ s_inv_half
    return (r + _adjoint(r)) / 2


def matrix_beta_sample(m, n, beta, rng) -> np.ndarray:
    return matrix_beta_batch(m, n, beta, 1, rng)[0]


def schatten_inf_ball_batch(shape, beta, count, rng) -> np.ndarray:
    s = as_shape(shape)
    beta = check_beta(beta)
    r = matrix_beta_batch(s.m, s.n, beta, count, rng)
    u_adj = stiefel_uniform_batch(s.n, s.m, beta, count, rng)
    return _herm_power(r, 0.5) @ u_adj


def schatten_inf_ball_uniform(shape, beta, rng) -> MatrixSample:
    """Uniform draw from the operator-norm unit ball, X = R^{1/2} U*."""
    a = schatten_inf_ball_batch(shape, beta, 1, rng)[0]
    return MatrixSample(a, beta, "ball_inf", _seed_of(rng))


def dirichlet_block_batch(m, d, beta, count, rng):
    """Returns (blocks, rs): blocks (count, d, m, m) = R_i^{1/2} U_i and the R_i."""
    beta = check_beta(beta)
    if m < 1 or d < 1:
        raise DomainError("need m >= 1 and d >= 1")
    gen = _gen(rng)
    g = _gaussian(gen, (count, d, m, m), beta)
    last = _gaussian(gen, (count, m, _beta_second_dof(m, beta)), beta)
    w = g @ _adjoint(g)
    s = w.sum(axis=1) + last @ _adjoint(last)
    s_inv_half = _herm_power(s, -0.5)[:, None]
    rs = s_inv_half @ w @ s_inv_half
    rs = (rs + _adjoint(rs)) / 2
    u = haar_unitary_batch(m, beta, count * d, rng).reshape(count, d, m, m)
    return _herm_power(rs, 0.5) @ u, rs


def dirichlet_block_sample(m, d, beta, rng) -> list:
    """d blocks R_i^{1/2} U_i whose concatenation is uniform in the (m, dm) ball."""
    blocks, _ = dirichlet_block_batch(m, d, beta, 1, rng)
    return list(blocks[0])


def concat_blocks(blocks) -> np.ndarray:
    """Join blocks along the column axis; works for one draw or a batch."""
    b = np.asarray(blocks)
    if b.ndim == 3:
        return np.concatenate(list(b), axis=-1)
    return np.concatenate([b[:, i] for i in range(b.shape[1])], axis=-1)


# ---------------------------------------------------------------- MCMC for Y


@dataclass
class McmcResult:
    """Post burn-in draws of Y, shape (chains, draws, m), with diagnostics."""

    draws: np.ndarray
    acceptance: float
    step: np.ndarray
    rhat: dict
    ess: float
    converged: bool

    def pooled(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[-1])


def split_rhat(trace: np.ndarray) -> float:
    """Split-chain potential scale reduction for a (chains, draws) trace."""
    c, t = trace.shape
    half = t // 2
    if half < 2:
        return math.nan
    parts = np.concatenate([trace[:, :half], trace[:, half:2 * half]], axis=0)
    means = parts.mean(axis=1)
    within = parts.var(axis=1, ddof=1).mean()
    between = half * means.var(ddof=1)
    if within == 0:
        return 1.0 if between == 0 else math.inf
    var_plus = (half - 1) / half * within + between / half
    return float(math.sqrt(var_plus / within))


def effective_sample_size(trace: np.ndarray) -> float:
    """ESS of a (chains, draws) trace using Geyer's initial positive sequence."""
    c, t = trace.shape
    x = trace - trace.mean(axis=1, keepdims=True)
    var = trace.var(ddof=1) if trace.size > 1 else 0.0
    if var == 0 or t < 4:
        return float(c * t)
    acov = np.array([np.mean(np.sum(x[:, : t - k] * x[:, k:], axis=1) / t) for k in range(t)])
    rho = acov / acov[0]
    tau = 1.0
    k = 1
    while k + 1 < t:
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
        k += 2
    return float(c * t / tau)


def sv_squared_chains(shape, beta, p, cfg: McmcConfig, rng, draws_per_chain: int = 1,
                      init: np.ndarray | None = None) -> McmcResult:
    """Metropolis-within-Gibbs for the law of the squared singular values Y.

    Target on (0, inf)^m (or [0,1]^m when p = inf):
    exp(-beta n sum y^{p/2}) prod y^{beta(n-m+1)/2 - 1} prod_{i<j} |y_i - y_j|^beta.
    Each coordinate is updated by a Gaussian random walk on log y (logit y for
    p = inf); per-coordinate steps are tuned toward 30-45% acceptance during
    burn-in and frozen afterwards.
    """
    s = as_shape(shape)
    beta = check_beta(beta)
    p = check_p(p)
    m, n = s.m, s.n
    gen = _gen(rng)
    chains = cfg.chains
    box = p == INF
    a = beta * (n - m + 1) / 2 - 1

    if init is None:
        y = np.sort(gen.uniform(0.02, 0.98 if box else 1.0, (chains, m)), axis=1)
    else:
        y = np.array(np.broadcast_to(init, (chains, m)), dtype=float)
        if np.any(y <= 0) or (box and np.any(y >= 1)):
            raise DomainError("initial state outside the support")
    z = np.log(y / (1 - y)) if box else np.log(y)
    step = np.full(m, float(cfg.step_scale))
    total = cfg.burn_in + draws_per_chain * cfg.thinning
    out = np.empty((chains, draws_per_chain, m))
    accepted = 0
    proposals = 0
    k = 0
    for sweep in range(total):
        burning = sweep < cfg.burn_in
        for i in range(m):
            zp = z[:, i] + step[i] * gen.standard_normal(chains)
            if box:
                yp = 1 / (1 + np.exp(-zp))
            else:
                yp = np.exp(zp)
            yi = y[:, i]
            d_new = np.abs(yp[:, None] - y)
            d_old = np.abs(yi[:, None] - y)
            d_new[:, i] = 1.0
            d_old[:, i] = 1.0
            with np.errstate(divide="ignore", invalid="ignore"):
                diff = beta * (np.log(d_new).sum(axis=1) - np.log(d_old).sum(axis=1))
                # the (a + 1) power folds in the Jacobian of the log/logit map
                diff += (a + 1) * (np.log(yp) - np.log(yi))
                if box:
                    diff += np.log1p(-yp) - np.log1p(-yi)
                else:
                    diff -= beta * n * (yp ** (p / 2) - yi ** (p / 2))
            ok = np.isfinite(diff) & (np.log(gen.uniform(size=chains)) < diff)
            ok &= (yp > 0) & ((yp < 1) if box else np.isfinite(yp))
            z[ok, i] = zp[ok]
            y[ok, i] = yp[ok]
            rate = ok.mean()
            if burning:
                step[i] *= math.exp(0.1 * (rate - 0.375))
            else:
                accepted += ok.sum()
                proposals += chains
        if not burning and (sweep - cfg.burn_in + 1) % cfg.thinning == 0:
            out[:, k] = y
            k += 1

    total_y = out.sum(axis=2)
    max_y = out.max(axis=2)
    rhat = {"sum": split_rhat(total_y), "max": split_rhat(max_y)}
    ess = min(effective_sample_size(total_y), effective_sample_size(max_y))
    finite = [v for v in rhat.values() if not math.isnan(v)]
    converged = all(v < 1.05 for v in finite)
    return McmcResult(out, accepted / max(proposals, 1), step, rhat, ess, converged)


DIAGNOSTIC_DRAWS = 25


def sv_squared_mcmc(shape, beta, p, cfg: McmcConfig, rng) -> np.ndarray:
    """One post burn-in state of the Y chain (the first of ``cfg.chains``)."""
    res = sv_squared_chains(shape, beta, p, cfg, rng, DIAGNOSTIC_DRAWS)
    if not res.converged:
        log.warning("Y chain failed the split-Rhat check: %s", res.rhat)
    return res.draws[0, -1].copy()


def _assemble(y, shape, beta, p, mode, rng):
    """Build X = R V diag(sqrt y) U* / ||y||_{p/2}^{1/2} for a batch of Y."""
    s = as_shape(shape)
    count = y.shape[0]
    v = haar_unitary_batch(s.m, beta, count, rng)
    # the first m rows of a Haar U* form a uniform Stiefel point
    u_adj = stiefel_uniform_batch(s.n, s.m, beta, count, rng)
    root = np.sqrt(y)
    x = (v * root[:, None, :]) @ u_adj
    if p == INF:
        if mode == "cone":
            x = x / np.sqrt(y.max(axis=1))[:, None, None]
        return x
    norm = np.sum(y ** (p / 2), axis=1) ** (1 / p)
    x = x / norm[:, None, None]
    if mode == "ball":
        w = _gen(rng).uniform(size=count)
        x = x * (w ** (1 / s.real_dim(beta)))[:, None, None]
    return x


def schatten_p_sample_batch(shape, beta, p, mode, count, rng, cfg: McmcConfig | None = None):
    """``count`` draws (uniform on the ball or cone measure on the sphere).

    Runs ``cfg.chains`` chains in parallel and keeps ceil(count/chains) thinned
    draws from each. Returns (array of shape (count, m, n), McmcResult).
    """
    s = as_shape(shape)
    beta = check_beta(beta)
    p = check_p(p)
    if mode not in ("ball", "cone"):
        raise DomainError(f"mode must be 'ball' or 'cone', got {mode!r}")
    cfg = cfg or McmcConfig()
    per_chain = max(DIAGNOSTIC_DRAWS, -(-count // cfg.chains))
    res = sv_squared_chains(s, beta, p, cfg, rng, per_chain)
    # interleave so that the first draws come from different chains
    y = np.swapaxes(res.draws, 0, 1).reshape(-1, s.m)[:count]
    return _assemble(y, s, beta, p, mode, rng), res


def schatten_p_sample(shape, beta, p, mode, rng, cfg: McmcConfig | None = None) -> MatrixSample:
    """One draw from the Schatten-p ball (mode='ball') or its cone measure (mode='cone')."""
    cfg = cfg or McmcConfig()
    res = sv_squared_chains(shape, beta, p, cfg, rng, DIAGNOSTIC_DRAWS)
    y = res.draws[0, -1][None, :]
    x = _assemble(y, shape, beta, check_p(p), mode, rng)[0]
    diag = {"rhat": res.rhat, "converged": res.converged, "acceptance": res.acceptance}
    if not res.converged:
        diag["warning"] = "MCMC convergence diagnostic failed"
        log.warning("Y chain failed the split-Rhat check: %s", res.rhat)
    return MatrixSample(x, beta, f"schatten_{p:g}_{mode}", _seed_of(rng), diag)


def two_sided_invariant_sample(spectrum: Sequence[float], n: int, beta, rng) -> MatrixSample:
    """V diag(spectrum) U* with independent Haar V (m x m) and U (n x n)."""
    beta = check_beta(beta)
    sv = np.asarray(spectrum, dtype=float)
    m = sv.size
    if np.any(sv < 0):
        raise DomainError("spectrum entries must be non-negative")
    if not 1 <= m <= n:
        raise DomainError(f"need 1 <= len(spectrum) <= n, got {m} and n={n}")
    v = haar_unitary(m, beta, rng)
    u = haar_unitary(n, beta, rng)
    x = (v * sv[None, :]) @ _adjoint(u)[:m]
    return MatrixSample(x, beta, "two_sided_invariant", _seed_of(rng))


# ---------------------------------------------------------------- matrix dumps


def _fmt(v) -> str:
    return format(float(v), ".17g")


def dump_matrix(sample: MatrixSample) -> str:
    """Serialize: header 'm n beta label seed', then one row per line."""
    a = np.asarray(sample.entries)
    m, n = a.shape
    seed = "none" if sample.seed is None else str(sample.seed)
    lines = [f"{m} {n} {sample.beta} {sample.label} {seed}"]
    for row in a:
        if sample.beta == 2:
            lines.append(" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row))
        else:
            lines.append(" ".join(_fmt(v.real) for v in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> MatrixSample:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m, n, beta, label, seed = lines[0].split()
    m, n, beta = int(m), int(n), int(beta)
    rows = []
    for ln in lines[1:1 + m]:
        if beta == 2:
            rows.append([complex(float(a), float(b)) for a, b in (tok.split(",") for tok in ln.split())])
        else:
            rows.append([float(tok) for tok in ln.split()])
    a = np.array(rows, dtype=complex if beta == 2 else float)
    if a.shape != (m, n):
        raise DomainError(f"dump declares {m}x{n} but holds {a.shape}")
    return MatrixSample(a, beta, label, None if seed == "none" else int(seed))
