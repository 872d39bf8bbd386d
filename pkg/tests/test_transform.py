import numpy as np
import pytest
from hypothesis import given, strategies as st

from stoflin.errors import ConventionError, PreconditionError
from stoflin.expr import simplify
from stoflin.fields import MatrixField, VectorField
from stoflin.parser import parse
from stoflin.randgen import random_diffeo, random_field, random_system
from stoflin.sampling import DomainSampler, ImageSampler, equivalent, max_relative_deviation
from stoflin.system import Convention, Diffeo, Feedback, StochasticSystem
from stoflin.transform import (
    apply_correcting,
    compose_diffeos,
    coord_transform,
    correcting_term,
    feedback_transform,
    ito_term,
    pushforward,
    to_z_mode,
)

seeds = st.integers(0, 2**32 - 1)


def scalar_system(f, g, sigma, convention=Convention.ITO, x0=0.0, box=(-0.8, 0.8)):
    return StochasticSystem(
        VectorField.parse([f], 1),
        VectorField.parse([g], 1),
        VectorField.parse([sigma], 1),
        convention,
        (x0,),
        {},
        DomainSampler([box], 0),
    )


def test_log_of_geometric_motion():
    s = scalar_system("0", "0", "x1", x0=1.0, box=(0.5, 2.0))
    T = Diffeo.parse(["ln(x1)"], ["exp(x1)"])
    out = coord_transform(s, T, preserve_equilibrium=False)
    assert out.f[0] == simplify(parse("-1/2", 1))
    assert out.sigma[0] == simplify(parse("1", 1))


def test_exponential_of_brownian_motion():
    s = scalar_system("0", "0", "1")
    T = Diffeo.parse(["exp(x1) - 1"], ["ln(x1 + 1)"])
    out = coord_transform(s, T)
    z = DomainSampler([(-0.5, 0.5)], 0)
    assert equivalent(out.f[0], parse("(x1 + 1)/2", 1), z, 1e-12)
    assert equivalent(out.sigma[0], parse("x1 + 1", 1), z, 1e-12)


def test_stratonovich_uses_plain_chain_rule():
    s = scalar_system("0", "0", "x1", Convention.STRATONOVICH, x0=1.0, box=(0.5, 2.0))
    out = coord_transform(s, Diffeo.parse(["ln(x1)"], ["exp(x1)"]), preserve_equilibrium=False)
    assert out.f[0] == simplify(parse("0", 1))


def test_correcting_term_sign():
    # Ito dx = x dw is the Stratonovich equation dx = -x/2 dt + x o dw
    s = scalar_system("0", "0", "x1")
    assert correcting_term(s.sigma)[0] == simplify(parse("-x1/2", 1))
    st_ = apply_correcting(s, "forward")
    assert st_.convention is Convention.STRATONOVICH
    assert st_.f[0] == simplify(parse("-x1/2", 1))


def test_correction_round_trip():
    s = random_system(np.random.default_rng(4), 3)
    back = apply_correcting(apply_correcting(s, "forward"), "inverse")
    assert back.equals_on_sampler(s) <= 1e-12


def test_correction_wrong_convention():
    s = scalar_system("0", "0", "x1")
    with pytest.raises(ConventionError):
        apply_correcting(s, "inverse")


def test_equilibrium_must_be_preserved():
    s = scalar_system("0", "1", "0")
    with pytest.raises(PreconditionError):
        coord_transform(s, Diffeo.parse(["x1 + 1"], ["x1 - 1"]))


def test_feedback_closed_loop():
    s = scalar_system("x1^2", "2", "0")
    out = feedback_transform(s, Feedback.parse("-x1^2/2", "1/2", 1))
    assert out.f[0] == simplify(parse("0", 1))
    assert out.g[0] == simplify(parse("1", 1))


def test_singular_feedback_rejected():
    s = scalar_system("0", "1", "0")
    with pytest.raises(PreconditionError):
        feedback_transform(s, Feedback.parse("0", "x1", 1))


@given(seeds)
def test_ito_term_matches_finite_difference_hessian(seed):
    rng = np.random.default_rng(seed)
    T = random_diffeo(rng, 2, 2)
    sigma = random_field(rng, 2, 2)
    P = ito_term(sigma, T)
    X = DomainSampler([(-0.3, 0.3)] * 2, seed).sample(8)
    h = 1e-4
    S = sigma.evaluate(X)
    out = P.evaluate(X)
    for r, x in enumerate(X):
        H = np.zeros((2, 2, 2))
        for i in range(2):
            for j in range(2):
                ei, ej = np.eye(2)[i] * h, np.eye(2)[j] * h
                pts = np.array([x + ei + ej, x + ei - ej, x - ei + ej, x - ei - ej])
                v = T.apply(pts)
                H[:, i, j] = (v[0] - v[1] - v[2] + v[3]) / (4 * h * h)
        ref = 0.5 * np.einsum("mij,i,j->m", H, S[r], S[r])
        if np.all(np.isfinite(ref)) and np.all(np.isfinite(out[r])):
            assert np.allclose(out[r], ref, rtol=1e-4, atol=1e-5)


@given(seeds)
def test_composition_of_transforms(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 2, 2, box=0.3)
    R, Q = random_diffeo(rng, 2, 2), random_diffeo(rng, 2, 2)
    seq = coord_transform(coord_transform(s, R), Q)
    once = coord_transform(s, compose_diffeos(R, Q))
    a = list(seq.f) + list(seq.g) + list(seq.sigma)
    b = list(once.f) + list(once.g) + list(once.sigma)
    assert max_relative_deviation(a, b, once.sampler, None, 32) <= 1e-9


@given(seeds)
def test_chart_mode_agrees_with_closed_form(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 2, 2, box=0.3)
    T = random_diffeo(rng, 2, 2)
    closed = coord_transform(s, T)
    chart = to_z_mode(coord_transform(s, T, chart_mode=True))
    assert closed.equals_on_sampler(chart, 32) <= 1e-9


def test_pushforward_linear_map():
    T = Diffeo.parse(["2*x1", "x1 + x2"], ["x1/2", "x2 - x1/2"])
    v = VectorField.parse(["1", "0"], 2)
    assert pushforward(T, v) == VectorField.parse(["2", "1"], 2)


def test_matrix_dispersion_transforms_columnwise():
    sig = MatrixField([[parse("1", 2), parse("0", 2)], [parse("0", 2), parse("x1", 2)]])
    s = StochasticSystem(
        VectorField.zero(2), VectorField.parse(["0", "1"], 2), sig, Convention.ITO, (0.0, 0.0), {},
        DomainSampler([(-0.5, 0.5)] * 2, 0),
    )
    out = coord_transform(s, Diffeo.parse(["x1", "x2 + x1^2"], ["x1", "x2 - x1^2"]))
    # P_sigma of x2 + x1^2 picks up sigma_11^2 = 1
    assert out.f[1] == simplify(parse("1", 2))
    assert out.sigma_matrix.shape == (2, 2)
