import json
import math

import pytest

from schatten_lab.equilibrium import EqProblem, solve_equilibrium
from schatten_lab.errors import DomainError
from schatten_lab.sampling import McmcConfig, RngStream
from schatten_lab.stats_checks import (
    CheckReport,
    clt_inner_product_check,
    dkw_bound,
    lln_check,
    pmb_check,
    polar_independence_check,
)


def test_dkw_bound():
    assert math.isclose(dkw_bound(10_000), math.sqrt(math.log(2 / 0.01) / 20_000))
    assert dkw_bound(100) > dkw_bound(1000)


def test_report_json_line_is_plain():
    rep = CheckReport("x", 3, float("inf"), 0.1, False, 7, {"a": (1, 2), "b": float("nan")})
    data = json.loads(rep.to_json_line())
    assert data["statistic"] == "inf"
    assert data["details"] == {"a": [1, 2], "b": "nan"}


# ---- Poincare-Maxwell-Borel

@pytest.mark.parametrize("dist, beta", [("stiefel", 1), ("ball", 1), ("sphere", 2)])
def test_pmb_passes(dist, beta):
    rep = pmb_check(2, 2, [10, 40, 160], beta, dist, 2000, RngStream(1))
    assert rep.passed, rep.details
    assert rep.statistic <= 0.03
    assert rep.details["monotone"]


def test_pmb_two_point_control_fails():
    # n = k = m = 1: a uniform sign is far from Gaussian
    rep = pmb_check(1, 1, [1], 1, "stiefel", 2000, RngStream(2))
    assert not rep.passed
    assert rep.statistic > 0.3


def test_pmb_validation():
    with pytest.raises(DomainError):
        pmb_check(2, 5, [4], 1, "stiefel", 10, 0)
    with pytest.raises(DomainError):
        pmb_check(2, 2, [4], 1, "gaussian", 10, 0)


# ---- inner-product CLT

@pytest.mark.parametrize("dist, beta", [("stiefel", 1), ("sphere", 2)])
def test_clt_passes(dist, beta):
    rep = clt_inner_product_check(2, [20, 80, 320], beta, dist, 2000, RngStream(3))
    assert rep.passed, rep.details


def test_clt_fails_for_tiny_n():
    # n = 1 Stiefel rows are signs: the inner product only takes values +-1
    rep = clt_inner_product_check(1, [1], 1, "stiefel", 2000, RngStream(4))
    assert not rep.passed


# ---- law of large numbers for the spectrum

@pytest.mark.parametrize("c", [1.0, 0.5])
def test_lln_p_inf(c):
    rep = lln_check(c, math.inf, [25, 50, 100], 1, "ball", RngStream(5))
    assert rep.passed, rep.details
    assert rep.threshold_source.startswith("calibrated")


def test_lln_p2_cone_closed_form():
    rep = lln_check(1.0, 2, [20, 40], 1, "cone", RngStream(6),
                    mcmc=McmcConfig(burn_in=500, thinning=10, chains=1))
    assert rep.passed, rep.details


def test_lln_with_equilibrium_limit():
    sol = solve_equilibrium(EqProblem(1.0, 4, 400))
    rep = lln_check(1.0, 4, [20, 40], 1, "cone", RngStream(7), eq_solution=sol,
                    mcmc=McmcConfig(burn_in=500, thinning=10, chains=1))
    assert rep.details["limit"] == "equilibrium"
    assert rep.passed, rep.details


def test_lln_rejects_mismatched_equilibrium():
    with pytest.raises(DomainError):
        lln_check(1.0, math.inf, [100], 1, "ball", RngStream(8),
                  eq_solution=solve_equilibrium(EqProblem(0.3, math.inf, 200)))


def test_lln_validation():
    with pytest.raises(DomainError):
        lln_check(1.0, math.inf, [10], 1, "stiefel", 0)
    with pytest.raises(DomainError):
        lln_check(1.5, math.inf, [10], 1, "ball", 0)


# ---- polar independence

@pytest.mark.parametrize("p, law, seed", [(math.inf, "ball", 31), (math.inf, "gaussian", 11), (2, "ball", 12)])
def test_polar_independence_passes(p, law, seed):
    rep = polar_independence_check((2, 3), 1, p, 2000, RngStream(seed), law=law,
                                   mcmc=McmcConfig(burn_in=300, thinning=5, chains=200))
    assert rep.passed, rep.details


def test_polar_dependent_control_fails():
    rep = polar_independence_check((2, 3), 1, math.inf, 2000, RngStream(13), law="dependent")
    assert not rep.passed
    assert rep.statistic > 5


def test_polar_validation():
    with pytest.raises(DomainError):
        polar_independence_check((2, 3), 1, math.inf, 100, 0, law="cauchy")


# ---- reproducibility

def test_reports_independent_of_thread_count():
    a = pmb_check(2, 1, [5, 20, 80], 1, "ball", 500, RngStream(14), threads=1)
    b = pmb_check(2, 1, [5, 20, 80], 1, "ball", 500, RngStream(14), threads=3)
    assert a.to_json_line() == b.to_json_line()
    a = lln_check(1.0, math.inf, [20, 40], 1, "ball", 15, threads=1)
    b = lln_check(1.0, math.inf, [20, 40], 1, "ball", 15, threads=2)
    assert a.to_json_line() == b.to_json_line()


def test_integer_seed_equals_stream():
    a = clt_inner_product_check(2, [10], 1, "stiefel", 300, 16)
    b = clt_inner_product_check(2, [10], 1, "stiefel", 300, RngStream(16))
    assert a.to_json_line() == b.to_json_line()
    assert a.seed == 16
