import numpy as np
from hypothesis import given, strategies as st

from stoflin.randgen import random_diffeo, random_field, random_scalar_pair, random_system
from stoflin.sampling import DomainSampler
from stoflin.system import Feedback
from stoflin.parser import parse
from stoflin.theorems import composition, corr_diagram, ito_term_identity, second_derivative_identity

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_both_routes_agree(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 3, 2, box=0.3)
    rep = corr_diagram(s, random_diffeo(rng, 3, 2))
    assert rep["passed"], rep["residual"]


def test_both_routes_agree_with_feedback():
    rng = np.random.default_rng(11)
    s = random_system(rng, 2, 2, box=0.3)
    fb = Feedback.parse("x1*x2", "2 + cos(x1)", 2)
    assert corr_diagram(s, random_diffeo(rng, 2, 2), fb)["passed"]


@given(seeds)
def test_second_derivative_identity(seed):
    rng = np.random.default_rng(seed)
    sigma, h = random_scalar_pair(rng, 3)
    assert second_derivative_identity(sigma, h, DomainSampler([(-0.6, 0.6)] * 3, seed))["passed"]


@given(seeds)
def test_ito_term_as_correction_difference(seed):
    rng = np.random.default_rng(seed)
    sigma = random_field(rng, 2, 2)
    T = random_diffeo(rng, 2, 2)
    assert ito_term_identity(sigma, T, DomainSampler([(-0.3, 0.3)] * 2, seed))["passed"]


@given(seeds)
def test_composition(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 2, 2, box=0.3)
    assert composition(s, random_diffeo(rng, 2, 2), random_diffeo(rng, 2, 2))["passed"]
