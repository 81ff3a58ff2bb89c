"""Exact moment formulas: covariance, fourth cumulant, Malliavin variance,
product expansion; cross-checked against Gaussian moment arithmetic and
Monte Carlo."""

import math

import numpy as np
import pytest
from hypothesis import given, settings

from chaoslab.kernels import add, basis_kernel, inner, make_kernel
from chaoslab.moments import (
    ChaosVectorSpec,
    covariance_matrix,
    fourth_cumulant,
    fourth_moment,
    malliavin_variance,
    multiply,
    variance,
)
from chaoslab.sampling import eval_chaos, sample_batch
from oracles import gaussian_moment, kernel_strategy


def e11(dim=1):
    return basis_kernel(2, dim, (1, 1))


def diag_kernel(order, n):
    return make_kernel(order, n, {(i,) * order: n**-0.5 for i in range(1, n + 1)})


def test_variance_is_dfact_norm():
    assert variance(e11()) == 2.0
    assert variance(basis_kernel(1, 3, (2,), 2.0)) == 4.0
    assert variance(diag_kernel(3, 4)) == pytest.approx(6.0)


def test_covariance_single_component():
    spec = ChaosVectorSpec((e11(),))
    assert covariance_matrix(spec).tolist() == [[2.0]]


def test_covariance_mixed_orders_uncorrelated():
    spec = ChaosVectorSpec((basis_kernel(1, 2, (1,)), e11(2)))
    cov = covariance_matrix(spec)
    assert cov[0, 1] == 0.0 and cov[1, 0] == 0.0
    assert cov[0, 0] == 1.0 and cov[1, 1] == 2.0


def test_covariance_same_order_pair():
    f = e11(2)
    g = basis_kernel(2, 2, (2, 2))
    cov = covariance_matrix(ChaosVectorSpec((f, g)))
    assert cov.tolist() == [[2.0, 0.0], [0.0, 2.0]]
    h = add(f.scaled(0.6), g.scaled(0.8))
    cov2 = covariance_matrix(ChaosVectorSpec((f, h)))
    assert cov2[0, 1] == pytest.approx(2 * 0.6)


def test_kappa4_gaussian_component_is_zero():
    assert fourth_cumulant(basis_kernel(1, 4, (3,), 1.7)) == 0.0


def test_kappa4_chisq_anchor():
    # X^2 - 1 has E(X^2-1)^4 = 60 and variance 2, so kappa4 = 60 - 3*4 = 48
    assert fourth_cumulant(e11()) == pytest.approx(48.0, rel=1e-12)
    m4 = (
        gaussian_moment(8)
        - 4 * gaussian_moment(6)
        + 6 * gaussian_moment(4)
        - 4 * gaussian_moment(2)
        + 1
    )
    assert m4 == 60
    assert fourth_cumulant(e11()) == pytest.approx(m4 - 3 * variance(e11()) ** 2)


def test_kappa4_diagonal_scaling():
    # independent-sum scaling: kappa4 of n^{-1/2} sum_i (X_i^2 - 1) is 48/n
    assert fourth_cumulant(diag_kernel(2, 4)) == pytest.approx(12.0, rel=1e-12)
    assert fourth_cumulant(diag_kernel(2, 16)) == pytest.approx(3.0, rel=1e-12)
    assert fourth_cumulant(diag_kernel(3, 2)) == pytest.approx(3240 / 2, rel=1e-12)


def test_kappa4_order_mismatch_rejected():
    with pytest.raises(ValueError):
        fourth_cumulant(e11(), d=3)


def test_fourth_moment_anchors():
    assert fourth_moment(e11()) == pytest.approx(60.0, rel=1e-12)
    assert fourth_moment(basis_kernel(1, 2, (1,))) == pytest.approx(3.0, rel=1e-12)
    # kappa4 + 3 var^2 = 48/100 + 12
    assert fourth_moment(diag_kernel(2, 100)) == pytest.approx(12.48, rel=1e-12)


def test_malliavin_anchors():
    assert malliavin_variance(basis_kernel(1, 2, (1,))) == (1.0, 0.0)
    mean, var = malliavin_variance(e11())
    assert mean == pytest.approx(4.0, rel=1e-12)
    assert var == pytest.approx(32.0, rel=1e-12)
    mean, var = malliavin_variance(diag_kernel(2, 4))
    assert mean == pytest.approx(4.0, rel=1e-12)
    assert var == pytest.approx(8.0, rel=1e-12)
    _, var3 = malliavin_variance(diag_kernel(3, 2))
    assert var3 == pytest.approx(4536 / 2, rel=1e-12)


def test_malliavin_order_mismatch_rejected():
    with pytest.raises(ValueError):
        malliavin_variance(e11(), d=1)


def test_multiply_square_of_gaussian():
    # X * X = (X^2 - 1) + 1: order-2 kernel e1 x e1 plus scalar 1
    x = basis_kernel(1, 1, (1,))
    terms = dict(multiply(x, x))
    assert set(terms) == {2, 0}
    assert terms[2].coeffs == {(1, 1): 1.0}
    assert terms[0] == pytest.approx(1.0)


def test_multiply_orthogonal_gaussians():
    x = basis_kernel(1, 2, (1,))
    y = basis_kernel(1, 2, (2,))
    terms = dict(multiply(x, y))
    assert terms[0] == 0.0
    assert terms[2].value((1, 2)) == pytest.approx(0.5)
    assert variance(terms[2]) == pytest.approx(1.0)


def test_multiply_order_zero_term_is_expectation():
    f = make_kernel(2, 3, [((1, 2), 0.4), ((2, 1), 0.4), ((3, 3), -0.9)])
    terms = dict(multiply(f, f))
    # E[I_2(f)^2] = 2 ||f||^2 sits in the order-0 slot
    assert terms[0] == pytest.approx(2 * f.norm_sq(), rel=1e-12)
    assert terms[0] == pytest.approx(variance(f), rel=1e-12)


def test_multiply_pointwise_identity():
    # the expansion must reproduce the product pathwise, not just in law
    rng = np.random.default_rng(7)
    f = make_kernel(2, 3, [((1, 2), 0.4), ((2, 1), 0.4), ((3, 3), -0.9)])
    g = make_kernel(3, 3, [((1, 1, 2), 0.7), ((2, 3, 3), -0.3)])
    terms = multiply(f, g)
    for _ in range(25):
        x = rng.standard_normal(3)
        lhs = (
            eval_chaos(ChaosVectorSpec((f,)), x)[0]
            * eval_chaos(ChaosVectorSpec((g,)), x)[0]
        )
        rhs = 0.0
        for order, term in terms:
            if order == 0:
                rhs += term
            elif term.coeffs:
                rhs += eval_chaos(ChaosVectorSpec((term,)), x)[0]
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=40, derandomize=True, deadline=None)
@given(kernel_strategy())
def test_kappa4_nonnegative_and_zero_iff_flat_profile(f):
    if f.order < 2:
        assert fourth_cumulant(f) == 0.0
        return
    k4 = fourth_cumulant(f)
    assert k4 >= -1e-12
    from chaoslab.kernels import contraction_profile

    total = sum(raw + sym for raw, sym in contraction_profile(f))
    assert (k4 == pytest.approx(0.0, abs=1e-12)) == (total <= 1e-12)


@settings(max_examples=20, derandomize=True, deadline=None)
@given(kernel_strategy())
def test_fourth_moment_at_least_gaussian(f):
    # kappa4 >= 0 pins E F^4 >= 3 var^2 for every chaos element
    assert fourth_moment(f) >= 3 * variance(f) ** 2 - 1e-9


def test_moments_match_monte_carlo():
    n_samples = 100_000
    f = diag_kernel(2, 4)
    spec = ChaosVectorSpec((f,))
    batch = sample_batch(spec, n_samples, seed=91, with_malliavin=True)
    vals = batch.values[:, 0]
    root_n = math.sqrt(n_samples)

    var_hat = vals.var()
    se_var = (vals - vals.mean()).__pow__(2).std() / root_n
    assert abs(var_hat - variance(f)) < 4 * se_var

    m4_hat = (vals**4).mean()
    se4 = (vals**4).std() / root_n
    assert abs(m4_hat - fourth_moment(f)) < 4 * se4

    mal = batch.malliavin_sq[:, 0]
    mean, var = malliavin_variance(f)
    assert abs(mal.mean() - mean) < 4 * mal.std() / root_n
    se_v = (mal - mal.mean()).__pow__(2).std() / root_n
    assert abs(mal.var() - var) < 4 * se_v


def test_multiply_distribution_matches_sampling():
    # first two moments of I_2(f) I_2(g) via the expansion vs simulation
    f = basis_kernel(2, 2, (1, 1))
    g = basis_kernel(2, 2, (1, 2), 2**-0.5)
    terms = multiply(f, g)
    mean_exact = sum(t for order, t in terms if order == 0)
    var_exact = sum(
        variance(t) for order, t in terms if order > 0 and t.coeffs
    )  # distinct orders are uncorrelated

    n_samples = 200_000
    batch = sample_batch(ChaosVectorSpec((f, g)), n_samples, seed=17)
    prod = batch.values[:, 0] * batch.values[:, 1]
    assert abs(prod.mean() - mean_exact) < 4 * prod.std() / math.sqrt(n_samples)
    centered = prod - prod.mean()
    se_var = (centered**2).std() / math.sqrt(n_samples)
    assert abs(prod.var() - var_exact) < 4 * se_var
