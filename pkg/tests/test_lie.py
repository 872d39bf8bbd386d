import numpy as np
import pytest
from hypothesis import given, strategies as st

from stoflin.errors import DimensionError, SingularDistributionError
from stoflin.evaluate import Point
from stoflin.expr import ZERO, Var, differentiate, simplify
from stoflin.fields import Distribution, MatrixField, VectorField
from stoflin.lie import (
    ad_iter,
    diffusion_matrix,
    distribution_rank,
    involutive,
    jacobian,
    lie_bracket,
    lie_derivative,
    operator_power,
    second_order_apply,
    second_order_commutator_residual,
)
from stoflin.parser import parse
from stoflin.randgen import random_diffeo, random_expression, random_field
from stoflin.sampling import DomainSampler, ImageSampler, equivalent, max_relative_deviation
from stoflin.transform import pushforward

from conftest import central_difference

seeds = st.integers(0, 2**32 - 1)
S3 = DomainSampler([(-0.6, 0.6)] * 3, 1)


def vf(*texts, n=None):
    return VectorField.parse(list(texts), n or len(texts))


def test_lie_derivative_example():
    assert lie_derivative(vf("x2", "-x1"), parse("x1^2 + x2^2", 2)) == ZERO


def test_bracket_example():
    # [x2 d1, d2] = -d1
    assert lie_bracket(vf("x2", "0"), vf("0", "1")) == vf("-1", "0")


def test_ad_iteration_integrator():
    f, g = vf("x2", "x3", "0"), vf("0", "0", "1")
    assert ad_iter(f, g, 1) == vf("0", "-1", "0")
    assert ad_iter(f, g, 2) == vf("1", "0", "0")


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        lie_derivative(vf("x1"), parse("x2", 2))


@given(seeds)
def test_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    f, g = random_field(rng, 3, 2), random_field(rng, 3, 2)
    total = lie_bracket(f, g) + lie_bracket(g, f)
    assert max_relative_deviation(list(total), [ZERO] * 3, S3, None, 32) <= 1e-12


@given(seeds)
def test_leibniz_rule(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 3, 2)
    a, b = simplify(random_expression(rng, 3, 3)), simplify(random_expression(rng, 3, 3))
    lhs = lie_derivative(f, a * b)
    rhs = simplify(a * lie_derivative(f, b) + b * lie_derivative(f, a))
    assert equivalent(lhs, rhs, S3, 1e-10)


@given(seeds)
def test_bracket_is_commutator_of_derivations(seed):
    rng = np.random.default_rng(seed)
    f, g = random_field(rng, 3, 2), random_field(rng, 3, 2)
    h = simplify(random_expression(rng, 3, 3))
    lhs = lie_derivative(lie_bracket(f, g), h)
    rhs = simplify(lie_derivative(f, lie_derivative(g, h)) - lie_derivative(g, lie_derivative(f, h)))
    assert equivalent(lhs, rhs, S3, 1e-9)


@given(seeds)
def test_jacobian_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 3, 3)
    J = jacobian(f)
    X = S3.with_seed(seed).sample(16)
    JX = J.evaluate(X)
    for j in range(3):
        fd = central_difference(lambda Y: f.evaluate(Y), X, j)
        assert np.allclose(JX[:, :, j], fd, rtol=1e-6, atol=1e-6, equal_nan=True)


@given(seeds)
def test_bracket_commutes_with_pushforward(seed):
    rng = np.random.default_rng(seed)
    T = random_diffeo(rng, 3, 2)
    f, g = random_field(rng, 3, 2), random_field(rng, 3, 2)
    lhs = pushforward(T, lie_bracket(f, g))
    rhs = lie_bracket(pushforward(T, f), pushforward(T, g))
    z = ImageSampler(DomainSampler([(-0.4, 0.4)] * 3, seed), T.forward)
    assert max_relative_deviation(list(lhs), list(rhs), z, None, 24) <= 1e-8


def test_contact_distribution_not_involutive():
    d = Distribution([vf("1", "0", "x2"), vf("0", "1", "0")])
    assert not involutive(d, S3)


def test_coordinate_distribution_involutive():
    d = Distribution([vf("1", "0", "x2"), vf("0", "1", "x1")])
    assert involutive(d, S3)


def test_dependent_generators_raise():
    d = Distribution([vf("1", "0", "0"), vf("2", "0", "0")])
    with pytest.raises(SingularDistributionError):
        involutive(d, S3)


def test_rank_examples():
    d = Distribution([vf("1", "0"), vf("x1", "0")])
    assert distribution_rank(d, Point([0.3, 0.1])) == 1
    d = Distribution([vf("1", "0"), vf("0", "x1")])
    assert distribution_rank(d, Point([0.0, 0.1])) == 1
    assert distribution_rank(d, Point([0.5, 0.1])) == 2


def test_second_order_example():
    f = vf("0", "0")
    F = MatrixField([[parse("1/2", 2), ZERO], [ZERO, ZERO]])
    assert second_order_apply(f, F, parse("x1^2", 2)) == simplify(parse("1", 2))


def test_diffusion_matrix_symmetric():
    F = diffusion_matrix(vf("x2", "sin(x1)"))
    assert F[0, 1] == F[1, 0]


def test_constant_operators_commute():
    F = MatrixField([[parse("1", 3), ZERO, ZERO], [ZERO, parse("2", 3), ZERO], [ZERO, ZERO, ZERO]])
    G = MatrixField([[ZERO, parse("1", 3), ZERO], [parse("1", 3), ZERO, ZERO], [ZERO, ZERO, parse("3", 3)]])
    assert second_order_commutator_residual(F, G, parse("x1*x2*x3", 3)) == ZERO


def test_operator_power_zero_is_identity():
    h = parse("sin(x1)", 1)
    assert operator_power(vf("1"), MatrixField([[ZERO]]), h, 0) == h
    assert operator_power(vf("1"), MatrixField([[ZERO]]), h, 2) == simplify(-h)
