import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from schatten_lab.errors import DomainError
from schatten_lab.sampling import (
    McmcConfig,
    MatrixSample,
    RngStream,
    concat_blocks,
    dirichlet_block_batch,
    dirichlet_block_sample,
    dump_matrix,
    effective_sample_size,
    gaussian_matrix,
    gaussian_matrix_batch,
    haar_unitary,
    haar_unitary_batch,
    matrix_beta_batch,
    matrix_beta_sample,
    parse_matrix,
    schatten_inf_ball_batch,
    schatten_inf_ball_uniform,
    schatten_p_sample,
    schatten_p_sample_batch,
    split_rhat,
    stiefel_uniform,
    stiefel_uniform_batch,
    sv_squared_chains,
    sv_squared_mcmc,
    two_sided_invariant_sample,
)
from schatten_lab.spectral import ks_two_sample, schatten_norm

FAST = McmcConfig(burn_in=300, thinning=5, chains=64)


def _s1(x):
    return np.linalg.norm(x, ord=2, axis=(-2, -1))


def _adj(a):
    return np.conj(np.swapaxes(a, -1, -2))


# ---- RngStream and config

def test_rng_stream_reproducible():
    a = RngStream(42, (1, 2)).generator.standard_normal(5)
    b = RngStream(42, (1, 2)).generator.standard_normal(5)
    assert_array_equal(a, b)
    c = RngStream(42, (1, 3)).generator.standard_normal(5)
    assert not np.array_equal(a, c)
    assert RngStream(42).child(1).child(2) == RngStream(42, (1, 2))


def test_rng_stream_validation():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(DomainError):
        RngStream(1, algorithm="MT19937")


@pytest.mark.parametrize("kwargs", [{"burn_in": -1}, {"thinning": 0}, {"chains": 0}, {"step_scale": 0.0}])
def test_mcmc_config_validation(kwargs):
    with pytest.raises(DomainError):
        McmcConfig(**kwargs)


def test_matrix_sample_rejects_non_finite():
    with pytest.raises(DomainError):
        MatrixSample(np.array([[np.nan, 1.0]]), 1, "x")
    with pytest.raises(DomainError):
        MatrixSample(np.ones((2, 2)), 3, "x")


# ---- Gaussian

@pytest.mark.parametrize("beta", [1, 2])
def test_gaussian_moments(beta):
    x = gaussian_matrix_batch((1, 1), beta, 100_000, RngStream(1, (beta,))).ravel()
    assert abs(x.mean()) < 0.02
    assert abs(np.mean(np.abs(x) ** 2) - 1) < 0.02
    if beta == 2:
        assert abs(np.mean(x.real ** 2) - 0.5) < 0.01
        assert abs(np.mean(x.real * x.imag)) < 0.01


def test_gaussian_deterministic():
    a = gaussian_matrix((2, 3), 2, RngStream(7))
    b = gaussian_matrix((2, 3), 2, RngStream(7))
    assert_array_equal(a.entries, b.entries)
    assert a.seed == 7


# ---- Haar / Stiefel

@pytest.mark.parametrize("beta", [1, 2])
def test_haar_unitary_is_unitary(beta):
    u = haar_unitary_batch(5, beta, 50, RngStream(2))
    assert_allclose(u @ _adj(u), np.broadcast_to(np.eye(5), u.shape), atol=1e-12)
    assert haar_unitary(3, beta, RngStream(2)).shape == (3, 3)


def test_haar_determinant_phase_is_uniform():
    # for beta = 2 the determinant of a Haar unitary is uniform on the circle
    u = haar_unitary_batch(3, 2, 20_000, RngStream(4))
    angle = np.angle(np.linalg.det(u))
    assert stats.kstest(angle, stats.uniform(-math.pi, 2 * math.pi).cdf).statistic < 0.02


@pytest.mark.parametrize("beta", [1, 2])
def test_stiefel_rows_orthonormal(beta):
    x = stiefel_uniform_batch(6, 3, beta, 100, RngStream(5))
    assert x.shape == (100, 3, 6)
    assert_allclose(x @ _adj(x), np.broadcast_to(np.eye(3), (100, 3, 3)), atol=1e-10)
    s = stiefel_uniform(6, 3, beta, RngStream(5))
    assert s.label == "stiefel"


def test_stiefel_one_by_one_is_a_sign():
    x = stiefel_uniform_batch(1, 1, 1, 10_000, RngStream(6)).ravel()
    assert_allclose(np.abs(x), 1.0, atol=1e-14)
    assert abs(np.mean(x > 0) - 0.5) < 0.015


def test_stiefel_rotation_invariance():
    rng = RngStream(8)
    x = stiefel_uniform_batch(4, 2, 1, 10_000, rng)
    v = haar_unitary(2, 1, rng.child(1))
    u = haar_unitary(4, 1, rng.child(2))
    y = v @ x @ u.T
    assert ks_two_sample(x[:, 0, 0], y[:, 0, 0]) <= 0.02


def test_stiefel_domain():
    with pytest.raises(DomainError):
        stiefel_uniform_batch(2, 3, 1, 1, RngStream(0))


# ---- matrix beta

@pytest.mark.parametrize("beta", [1, 2])
def test_matrix_beta_loewner_bounds(beta):
    r = matrix_beta_batch(3, 5, beta, 2000, RngStream(9))
    ev = np.linalg.eigvalsh(r)
    assert np.all(ev > 0) and np.all(ev < 1)
    assert matrix_beta_sample(3, 5, beta, RngStream(9)).shape == (3, 3)


@pytest.mark.parametrize("m, n, beta, mean", [(1, 1, 1, 1 / 3), (1, 2, 2, 2 / 3)])
def test_matrix_beta_scalar_mean(m, n, beta, mean):
    r = matrix_beta_batch(m, n, beta, 100_000, RngStream(10)).real.ravel()
    assert abs(r.mean() - mean) < 0.01


def test_matrix_beta_scalar_law():
    # m = 1: Beta(beta n / 2, 1)
    r = matrix_beta_batch(1, 3, 1, 20_000, RngStream(11)).real.ravel()
    assert stats.kstest(r, stats.beta(1.5, 1).cdf).statistic < 0.015


# ---- ball samplers

@pytest.mark.parametrize("shape, beta", [((2, 3), 1), ((3, 3), 2), ((1, 4), 1)])
def test_ball_samples_inside(shape, beta):
    x = schatten_inf_ball_batch(shape, beta, 2000, RngStream(12))
    assert np.all(_s1(x) <= 1 + 1e-12)
    assert schatten_inf_ball_uniform(shape, beta, RngStream(12)).label == "ball_inf"


def test_ball_one_by_one_is_uniform_interval():
    x = schatten_inf_ball_batch((1, 1), 1, 10_000, RngStream(13)).ravel()
    assert stats.kstest(x, stats.uniform(-1, 2).cdf).statistic <= 0.02


def test_ball_disk_second_moment():
    x = schatten_inf_ball_batch((1, 2), 1, 100_000, RngStream(14))
    assert abs(np.mean(np.sum(x ** 2, axis=(1, 2))) - 0.5) < 0.01


def test_ball_radial_law():
    # P(||X||_op <= t) = t^{beta m n} because the ball is star-shaped and homogeneous
    x = schatten_inf_ball_batch((2, 2), 1, 10_000, RngStream(15))
    assert stats.kstest(_s1(x), lambda t: np.clip(t, 0, 1) ** 4).statistic < 0.02


def test_ball_left_rotation_invariance_of_entries():
    rng = RngStream(16)
    x = schatten_inf_ball_batch((2, 3), 1, 10_000, rng)
    v = haar_unitary(2, 1, rng.child(1))
    assert ks_two_sample(x[:, 0, 0], (v @ x)[:, 0, 0]) <= 0.03


# ---- Dirichlet blocks

def test_dirichlet_blocks_sum_below_identity():
    blocks, rs = dirichlet_block_batch(2, 3, 1, 2000, RngStream(17))
    ev = np.linalg.eigvalsh(np.eye(2) - rs.sum(axis=1))
    assert np.all(ev > 0)
    x = concat_blocks(blocks)
    assert x.shape == (2000, 2, 6)
    assert np.all(_s1(x) <= 1 + 1e-12)
    single = dirichlet_block_sample(2, 3, 1, RngStream(17))
    assert len(single) == 3 and concat_blocks(single).shape == (2, 6)


def test_dirichlet_matches_ball_sampler():
    blocks, _ = dirichlet_block_batch(2, 2, 1, 10_000, RngStream(18))
    a = _s1(concat_blocks(blocks))
    b = _s1(schatten_inf_ball_batch((2, 4), 1, 10_000, RngStream(19)))
    assert ks_two_sample(a, b) <= 0.03


def test_dirichlet_scalar_mean():
    # (x1, x2) uniform on the unit disk: R1 = x1^2 has mean 1/4
    _, rs = dirichlet_block_batch(1, 2, 1, 100_000, RngStream(20))
    assert abs(rs[:, 0, 0, 0].real.mean() - 0.25) < 0.01


# ---- MCMC for the squared singular values

def test_split_rhat_and_ess():
    gen = np.random.default_rng(0)
    iid = gen.standard_normal((4, 500))
    assert abs(split_rhat(iid) - 1) < 0.02
    assert effective_sample_size(iid) > 1000
    shifted = iid + np.arange(4)[:, None]
    assert split_rhat(shifted) > 1.5


@pytest.mark.parametrize("beta, n", [(1, 3), (2, 2), (1, 6)])
def test_mcmc_single_coordinate_p_inf(beta, n):
    res = sv_squared_chains((1, n), beta, math.inf, McmcConfig(burn_in=300, thinning=5, chains=200),
                            RngStream(21), draws_per_chain=50)
    y = res.pooled().ravel()
    a = beta * n / 2
    assert np.all((y > 0) & (y < 1))
    assert abs(y.mean() - a / (a + 1)) < 0.01
    assert res.converged


def test_mcmc_single_coordinate_p2_gamma_law():
    # m = 1, p = 2: density y^{beta n/2 - 1} e^{-beta n y} is Gamma(beta n / 2, rate beta n)
    n, beta = 4, 1
    res = sv_squared_chains((1, n), beta, 2, McmcConfig(burn_in=300, thinning=5, chains=200),
                            RngStream(22), draws_per_chain=50)
    y = res.pooled().ravel()
    law = stats.gamma(beta * n / 2, scale=1 / (beta * n))
    assert stats.kstest(y, law.cdf).statistic < 0.03


def test_mcmc_state_is_positive_and_boxed():
    y = sv_squared_mcmc((3, 5), 1, math.inf, FAST, RngStream(23))
    assert y.shape == (3,) and np.all((y > 0) & (y < 1))
    y = sv_squared_mcmc((3, 5), 2, 1.5, FAST, RngStream(23))
    assert np.all(y > 0)


def test_mcmc_exchange_symmetry():
    cfg = McmcConfig(burn_in=300, thinning=5, chains=100)
    init = np.array([0.2, 0.5, 0.8])
    a = sv_squared_chains((3, 4), 1, math.inf, cfg, RngStream(24), 20, init=init).pooled()
    b = sv_squared_chains((3, 4), 1, math.inf, cfg, RngStream(25), 20, init=init[::-1]).pooled()
    assert ks_two_sample(np.sort(a, axis=1)[:, -1], np.sort(b, axis=1)[:, -1]) <= 0.05
    assert ks_two_sample(np.sort(a, axis=1)[:, 0], np.sort(b, axis=1)[:, 0]) <= 0.05


def test_mcmc_rejects_bad_init():
    with pytest.raises(DomainError):
        sv_squared_chains((2, 3), 1, math.inf, FAST, RngStream(0), init=np.array([0.5, 1.5]))


def test_mcmc_burn_in_doubling_is_stable():
    stat = []
    for burn in (500, 1000):
        cfg = McmcConfig(burn_in=burn, thinning=5, chains=100)
        y = sv_squared_chains((3, 6), 1, 2, cfg, RngStream(26, (burn,)), 20).pooled()
        stat.append(y.sum(axis=1))
    se = math.hypot(*(np.std(s) / math.sqrt(s.size / 2) for s in stat))
    assert abs(stat[0].mean() - stat[1].mean()) < 3 * se


# ---- Schatten-p samples

@pytest.mark.parametrize("p", [1.0, 2.0, 3.5, math.inf])
@pytest.mark.parametrize("beta", [1, 2])
def test_cone_samples_on_unit_sphere(p, beta):
    x, res = schatten_p_sample_batch((2, 3), beta, p, "cone", 50, RngStream(27), FAST)
    norms = [schatten_norm(xi, p) for xi in x]
    assert_allclose(norms, 1.0, atol=1e-10)


def test_single_sample_diagnostics():
    s = schatten_p_sample((2, 3), 1, 3, "ball", RngStream(28), FAST)
    assert s.label == "schatten_3_ball"
    assert set(s.diagnostics) >= {"rhat", "converged", "acceptance"}
    assert schatten_norm(s, 3) <= 1


def test_p_inf_ball_matches_exact_sampler():
    cfg = McmcConfig(burn_in=500, thinning=5, chains=200)
    x, _ = schatten_p_sample_batch((2, 3), 1, math.inf, "ball", 10_000, RngStream(29), cfg)
    y = schatten_inf_ball_batch((2, 3), 1, 10_000, RngStream(30))
    assert ks_two_sample(_s1(x), _s1(y)) <= 0.03
    assert ks_two_sample(np.linalg.norm(x, axis=(1, 2)), np.linalg.norm(y, axis=(1, 2))) <= 0.03


@pytest.mark.parametrize("beta", [1, 2])
def test_p2_ball_second_moment(beta):
    cfg = McmcConfig(burn_in=500, thinning=5, chains=200)
    x, _ = schatten_p_sample_batch((2, 3), beta, 2, "ball", 20_000, RngStream(31), cfg)
    d = beta * 6
    assert_allclose(np.mean(np.sum(np.abs(x) ** 2, axis=(1, 2))), d / (d + 2), rtol=0.01)


def test_schatten_sample_mode_validation():
    with pytest.raises(DomainError):
        schatten_p_sample_batch((2, 3), 1, 2, "sphere", 1, RngStream(0))


# ---- two-sided invariant

def test_two_sided_singular_values():
    spec = [0.3, 2.0, 1.1]
    x = two_sided_invariant_sample(spec, 5, 2, RngStream(32))
    assert_allclose(np.linalg.svd(x.entries, compute_uv=False), sorted(spec, reverse=True), atol=1e-10)


def test_two_sided_left_rotation_first_moments():
    rng = RngStream(33)
    v = haar_unitary(2, 1, rng.child(0))
    xs = np.array([two_sided_invariant_sample([1.0, 0.5], 3, 1, rng.child(i + 1)).entries for i in range(4000)])
    assert np.max(np.abs(xs.mean(axis=0))) <= 0.02
    assert np.max(np.abs((v @ xs).mean(axis=0))) <= 0.02


def test_two_sided_ones_is_stiefel():
    rng = RngStream(34)
    xs = np.array([two_sided_invariant_sample([1.0, 1.0], 3, 1, rng.child(i)).entries for i in range(5000)])
    ref = stiefel_uniform_batch(3, 2, 1, 5000, RngStream(35))
    assert ks_two_sample(xs[:, 0, 1], ref[:, 0, 1]) <= 0.03


def test_two_sided_validation():
    with pytest.raises(DomainError):
        two_sided_invariant_sample([-1.0], 2, 1, RngStream(0))
    with pytest.raises(DomainError):
        two_sided_invariant_sample([1.0, 1.0, 1.0], 2, 1, RngStream(0))


# ---- matrix dumps

@pytest.mark.parametrize("beta", [1, 2])
def test_dump_round_trip(beta):
    x = gaussian_matrix((2, 3), beta, RngStream(36))
    text = dump_matrix(x)
    assert text.splitlines()[0] == f"2 3 {beta} gaussian 36"
    y = parse_matrix(text)
    assert_array_equal(y.entries, x.entries)
    assert (y.beta, y.label, y.seed) == (beta, "gaussian", 36)
