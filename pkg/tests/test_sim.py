import numpy as np
import pytest

from stoflin.errors import BudgetExceededError, DimensionError, PreconditionError
from stoflin.fields import VectorField
from stoflin.philox import normals
from stoflin.sampling import DomainSampler
from stoflin.sim import (
    SimConfig,
    TrajectoryEnsemble,
    compare_ensembles,
    pushforward_paths,
    simulate,
    verify_commutation,
)
from stoflin.system import Convention, Diffeo, StochasticSystem
from stoflin.transform import apply_correcting


def scalar(f, sigma, convention=Convention.ITO, x0=0.0, g="0"):
    return StochasticSystem(
        VectorField.parse([f], 1),
        VectorField.parse([g], 1),
        VectorField.parse([sigma], 1),
        convention,
        (x0,),
        {},
        DomainSampler([(-1, 1)], 0),
    )


def test_deterministic_euler_is_exact_recursion():
    s = scalar("-x1", "0", Convention.DETERMINISTIC, 1.0)
    e = simulate(s, SimConfig(1.0, 0.1, 2))
    assert np.allclose(e.paths[0, :, 0], 0.9 ** np.arange(11), rtol=0, atol=1e-15)


def test_brownian_increments_come_from_the_generator():
    s = scalar("0", "1")
    cfg = SimConfig(0.04, 0.01, 3, base_seed=11)
    e = simulate(s, cfg)
    seeds = np.uint64(11) + np.arange(3, dtype=np.uint64)
    ref = np.cumsum([normals(seeds, k) * 0.1 for k in range(4)], axis=0)
    assert np.allclose(e.paths[:, 1:, 0], ref.T, rtol=0, atol=1e-15)


def test_paths_are_reproducible_and_independent_of_ensemble_size():
    s = scalar("-x1", "1")
    a = simulate(s, SimConfig(0.5, 0.01, 10, base_seed=3))
    b = simulate(s, SimConfig(0.5, 0.01, 4, base_seed=3))
    assert np.array_equal(a.paths[:4], b.paths)


def test_ornstein_uhlenbeck_moments():
    s = scalar("-x1", "1", x0=1.0)
    e = simulate(s, SimConfig(1.0, 0.01, 20000, base_seed=5))
    x = e.final[:, 0]
    # Euler recursion moments: mean (1-dt)^n, variance dt * sum (1-dt)^(2k)
    mean = 0.99**100
    var = 0.01 * sum(0.99 ** (2 * k) for k in range(100))
    assert abs(x.mean() - mean) <= 4 * np.sqrt(var / len(x))
    assert abs(x.var() - var) <= 4 * var * np.sqrt(2 / len(x))


def test_heun_targets_stratonovich_solution():
    # x o dw from x = 1 gives exp(w), mean exp(1/2)
    s = scalar("0", "x1", Convention.STRATONOVICH, 1.0)
    x = simulate(s, SimConfig(1.0, 0.005, 20000, base_seed=9)).final[:, 0]
    se = x.std(ddof=1) / np.sqrt(len(x))
    assert abs(x.mean() - np.exp(0.5)) <= 4 * se


def test_control_is_applied():
    s = scalar("0", "0", Convention.DETERMINISTIC, 0.0, g="1")
    e = simulate(s, SimConfig(1.0, 0.1, 1, control="2"))
    assert e.final[0, 0] == pytest.approx(2.0)


def test_save_every_thins_grid():
    e = simulate(scalar("0", "1"), SimConfig(1.0, 0.01, 2, save_every=10))
    assert len(e.times) == 11
    assert e.times[-1] == pytest.approx(1.0)


def test_budget():
    with pytest.raises(BudgetExceededError):
        simulate(scalar("0", "1"), SimConfig(1.0, 0.01, 1000, budget=10))


def test_non_finite_paths_are_flagged():
    s = scalar("1/x1", "0", Convention.DETERMINISTIC, 0.0)
    e = simulate(s, SimConfig(0.1, 0.01, 3))
    assert e.exit_fraction == 1.0
    assert e.alive().shape[0] == 0


def test_csv_header(tmp_path):
    e = simulate(scalar("0", "1"), SimConfig(0.02, 0.01, 2))
    p = tmp_path / "out.csv"
    e.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "path,step,t,x1"
    assert len(lines) == 1 + 2 * 3


def test_pathwise_comparison_of_identical_runs():
    s = scalar("-x1", "1")
    a = simulate(s, SimConfig(0.2, 0.01, 50))
    rep = compare_ensembles(a, simulate(s, SimConfig(0.2, 0.01, 50)))
    assert rep["passed"] and rep["max_pathwise"] == 0.0


def test_pathwise_needs_same_seeds():
    s = scalar("0", "1")
    a = simulate(s, SimConfig(0.1, 0.01, 5, base_seed=0))
    b = simulate(s, SimConfig(0.1, 0.01, 5, base_seed=1))
    with pytest.raises(PreconditionError):
        compare_ensembles(a, b)


def test_grid_mismatch():
    s = scalar("0", "1")
    with pytest.raises(DimensionError):
        compare_ensembles(simulate(s, SimConfig(0.1, 0.01, 5)), simulate(s, SimConfig(0.2, 0.01, 5)))


def test_pushforward_paths():
    e = TrajectoryEnsemble(np.array([0.0, 1.0]), np.array([[[1.0], [2.0]]]), np.array([0], dtype=np.uint64), Convention.ITO)
    out = pushforward_paths(e, Diffeo.parse(["ln(x1)"], ["exp(x1)"]))
    assert np.allclose(out.paths[0, :, 0], [0.0, np.log(2.0)])


def test_corrected_heun_matches_ito_weakly():
    s = scalar("0", "x1", x0=1.0)
    ito = simulate(s, SimConfig(1.0, 0.01, 4000, base_seed=2))
    strat = simulate(apply_correcting(s, "forward"), SimConfig(1.0, 0.01, 4000, base_seed=2))
    assert compare_ensembles(ito, strat, "weak", 4.0)["passed"]


def test_commutation_report_shape():
    s = scalar("0", "x1", x0=1.0)
    rep = verify_commutation(s, Diffeo.parse(["ln(x1)"], ["exp(x1)"]), SimConfig(1.0, 0.02, 200))
    assert len(rep["rms_AB"]) == 3
    assert rep["rms_AB"][0] > rep["rms_AB"][-1]


def test_commutation_rejects_stratonovich():
    s = scalar("0", "x1", Convention.STRATONOVICH, x0=1.0)
    with pytest.raises(PreconditionError):
        verify_commutation(s, Diffeo.parse(["ln(x1)"], ["exp(x1)"]), SimConfig(1.0, 0.02, 10))


def test_invalid_config():
    with pytest.raises(ValueError):
        SimConfig(1.0, -0.1)
