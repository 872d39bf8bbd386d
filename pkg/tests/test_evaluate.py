import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stoflin import crane
from stoflin.errors import DomainError, UnboundParameterError
from stoflin.evaluate import Point, compile_exprs, evaluate
from stoflin.parser import parse
from stoflin.randgen import random_expression
from stoflin.sampling import DomainSampler


def test_secant_at_third_pi():
    assert math.isclose(evaluate(parse("sec(x1)", 1), [math.pi / 3]), 2.0, rel_tol=1e-14)


def test_crane_dispersion_at_origin():
    s = crane.crane_system()
    assert math.isclose(evaluate(s.sigma[1], Point([0.0, 0.0], s.params)), 1.0, rel_tol=1e-14)


def test_log_of_negative():
    with pytest.raises(DomainError):
        evaluate(parse("ln(x1)", 1), [-1.0])


def test_sqrt_of_negative():
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(x1)", 1), [-1.0])


def test_division_by_zero():
    with pytest.raises(DomainError):
        evaluate(parse("1/x1", 1), [0.0])


def test_unbound_parameter():
    with pytest.raises(UnboundParameterError):
        evaluate(parse("a*x1", 1), [1.0])


def test_parameter_binding():
    assert evaluate(parse("a*x1", 1), [2.0], {"a": 3.0}) == 6.0


def test_batch_gives_nan_outside_domain():
    fn = compile_exprs([parse("ln(x1)", 1)], 1)
    out = fn(np.array([[1.0], [-1.0]]), None)[:, 0]
    assert out[0] == 0.0 and np.isnan(out[1])


@given(st.integers(0, 2**32 - 1))
def test_batch_matches_scalar(seed):
    rng = np.random.default_rng(seed)
    e = random_expression(rng, 3, 4)
    X = DomainSampler([(-0.8, 0.8)] * 3, seed).sample(8)
    batch = compile_exprs([e], 3)(X, None)[:, 0]
    for x, b in zip(X, batch):
        try:
            v = evaluate(e, list(x))
        except DomainError:
            assert not np.isfinite(b)
            continue
        assert abs(v - b) <= 1e-12 * (1 + abs(v))
