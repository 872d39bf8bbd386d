"""Acceptance criteria.

Each test checks one criterion at its stated tolerance and runtime budget and
prints one ``PASS``/``FAIL`` line. The lines are repeated in the pytest
terminal summary. Running this file as a script prints them directly.
"""
import time

import numpy as np
import pytest

from stoflin import crane
from stoflin.expr import ZERO, Var
from stoflin.fields import MatrixField
from stoflin.linearize import controllability_rank, linearize
from stoflin.parser import parse
from stoflin.randgen import random_diffeo, random_linearizable_2d, random_monotone_1d, random_scalar_pair, random_system
from stoflin.sampling import DomainSampler, equivalent
from stoflin.sim import SimConfig, compare_ensembles, simulate, verify_commutation
from stoflin.system import Convention, Diffeo
from stoflin.fields import VectorField
from stoflin.system import StochasticSystem
from stoflin.lie import second_order_commutator_residual
from stoflin.theorems import composition, corr_diagram, second_derivative_identity
from stoflin.transform import apply_correcting

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def record(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)


def scalar_system(f, sigma, convention=Convention.ITO, x0=0.0, box=(-1.0, 1.0)):
    return StochasticSystem(
        VectorField.parse([f], 1),
        VectorField.parse(["0"], 1),
        VectorField.parse([sigma], 1),
        convention,
        (x0,),
        {},
        DomainSampler([box], 0),
    )


def test_criterion_1_correcting_diagram():
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for _ in range(50):
        n = int(rng.integers(1, 4))
        s = random_system(rng, n, 3, box=0.3)
        T = random_diffeo(rng, n, 2)
        rep = corr_diagram(s, T, tol=1e-9, n_samples=100)
        worst = max(worst, rep["residual"])
        ok = ok and rep["passed"]
    dt = time.perf_counter() - t0
    passed = ok and worst <= 1e-9 and dt <= 10.0
    record(1, "correcting diagram commutes", passed, f"50 systems, worst rel err {worst:.2e}, {dt:.2f} s")
    assert passed


def test_criterion_2_second_derivative_identity():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for k in range(200):
        n = int(rng.integers(1, 4))
        sigma, h = random_scalar_pair(rng, n, 3)
        rep = second_derivative_identity(sigma, h, DomainSampler([(-0.8, 0.8)] * n, k), tol=1e-10)
        worst = max(worst, rep["residual"])
        ok = ok and rep["passed"]
    dt = time.perf_counter() - t0
    passed = ok and dt <= 5.0
    record(2, "half L_sigma L_sigma T = P_sigma T - L_corr T", passed, f"200 pairs, worst {worst:.2e}, {dt:.2f} s")
    assert passed


def test_criterion_3_composition():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for k in range(20):
        R, S = random_monotone_1d(rng), random_monotone_1d(rng)
        s = scalar_system(str(rng.choice(["x1", "sin(x1)", "-x1^2", "cos(x1) - 1"])), str(rng.choice(["1", "x1", "1 + x1^2"])), box=(-0.4, 0.4))
        rep = composition(s, R, S, tol=1e-9)
        worst = max(worst, rep["residual"])
        ok = ok and rep["passed"]
    dt = time.perf_counter() - t0
    passed = ok and dt <= 5.0
    record(3, "transform by S o R equals sequential transforms", passed, f"20 pairs, worst {worst:.2e}, {dt:.2f} s")
    assert passed


def test_criterion_4_crane():
    t0 = time.perf_counter()
    rep = crane.reproduce(tol=1e-8, n_samples=64)
    dt = time.perf_counter() - t0
    pub = rep["published_feedback"]
    passed = rep["passed"] and dt <= 5.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in rep["deviations"].items())
    detail += f", published a/b best reading deviation {pub['best_deviation']:.2e} (informational), {dt:.2f} s"
    record(4, "crane reproduction", passed, detail)
    assert passed


def test_criterion_5_deterministic_degeneration():
    t0 = time.perf_counter()
    worst_ok = True
    for seed in range(20):
        s = random_linearizable_2d(np.random.default_rng(1000 + seed))
        ref = linearize(s, "det")
        for variant, conv in (("ito_g_commuting", Convention.ITO), ("strat_g", Convention.STRATONOVICH), ("strat_gsigma", Convention.STRATONOVICH)):
            lt = linearize(s.with_convention(conv), variant)
            a = list(lt.T.forward) + [lt.fb.alpha, lt.fb.beta]
            b = list(ref.T.forward) + [ref.fb.alpha, ref.fb.beta]
            worst_ok = worst_ok and equivalent(a, b, s.sampler, 1e-8, s.params)
    dt = time.perf_counter() - t0
    record(5, "noise-free variants equal deterministic pipeline", worst_ok, f"20 systems x 3 variants, {dt:.2f} s")
    assert worst_ok


def test_criterion_6_simulation():
    t0 = time.perf_counter()
    gbm = scalar_system("0", "x1", x0=1.0, box=(0.1, 3.0))

    # (a) weak check of Euler-Maruyama on dx = x dw
    x = simulate(gbm, SimConfig(1.0, 0.01, 100_000, base_seed=1)).final[:, 0]
    se = x.std(ddof=1) / np.sqrt(len(x))
    z_a = abs(x.mean() - 1.0) / se
    ok_a = z_a <= 3.0

    # (b) strong order of the transform-then-simulate route with T = ln
    T = Diffeo.parse(["ln(x1)"], ["exp(x1)"])
    rep = verify_commutation(gbm, T, SimConfig(1.0, 1e-2, 2000, base_seed=2), dts=[1e-2, 2.5e-3, 6.25e-4])
    order = rep["order_estimate"]
    ok_b = order is not None and 0.35 <= order <= 0.65

    # (c) sign of the correcting term
    cfgs = [SimConfig(1.0, d, 4000, base_seed=3) for d in (1e-2, 2.5e-3)]
    strat = apply_correcting(gbm, "forward")
    rms = []
    for cfg in cfgs:
        ito = simulate(gbm, cfg)
        heun = simulate(strat, cfg)
        rms.append(compare_ensembles(ito, heun, "pathwise", np.inf)["rms_final"])
    # pathwise error of order sqrt(dt): ratio over a 4x step reduction near 2
    ratio = rms[0] / rms[1]
    ok_path = 1.4 <= ratio <= 2.9 and rms[0] <= 3 * np.sqrt(1e-2)
    ito = simulate(gbm, cfgs[0])
    weak_right = compare_ensembles(ito, simulate(strat, cfgs[0]), "weak", 5.0)
    wrong = strat.replace(f=VectorField.parse(["x1/2"], 1))
    weak_wrong = compare_ensembles(ito, simulate(wrong, cfgs[0]), "weak", 5.0)
    ok_c = ok_path and weak_right["passed"] and weak_wrong["max_z"] >= 5.0
    dt = time.perf_counter() - t0
    passed = ok_a and ok_b and ok_c and dt <= 60.0
    record(
        6,
        "SDE weak and strong checks",
        passed,
        f"(a) z {z_a:.2f}; (b) order {order:.3f}; (c) rms ratio {ratio:.2f}, right-sign z {weak_right['max_z']:.2f}, "
        f"wrong-sign z {weak_wrong['max_z']:.1f}; {dt:.1f} s",
    )
    assert passed


def test_criterion_7_third_order_non_closure():
    n = 3
    z = parse("0", n)
    h = Var(1) * Var(2) * Var(3)
    F = MatrixField([[parse("1 + x1^2", n), z, z], [z, z, z], [z, z, z]])
    G = MatrixField([[z, z, z], [z, z, parse("x1", n)], [z, parse("x1", n), z]])
    r = second_order_commutator_residual(F, G, h)
    X = DomainSampler([(-1.0, 1.0)] * n, 0).sample(16)
    vals = np.abs(MatrixField([[r]]).evaluate(X)[:, 0, 0])
    c = lambda v: parse(v, n)  # noqa: E731
    Fc = MatrixField([[c("1"), c("2"), z], [c("2"), z, c("1/2")], [z, c("1/2"), c("3")]])
    Gc = MatrixField([[z, c("1"), c("1")], [c("1"), c("5"), z], [c("1"), z, c("-1")]])
    rc = second_order_commutator_residual(Fc, Gc, h)
    const_max = 0.0 if rc == ZERO else float(np.max(np.abs(MatrixField([[rc]]).evaluate(X)[:, 0, 0])))
    passed = float(vals.max()) >= 1e-3 and const_max <= 1e-12
    record(7, "third-order commutator residual", passed, f"non-constant max {vals.max():.3g}, constant max {const_max:.1e}")
    assert passed


def test_criterion_8_controllability_rank():
    ok = True
    for n in range(2, 6):
        A = np.diag(np.ones(n - 1), 1)
        B = np.zeros((n, 1))
        B[-1, 0] = 1.0
        ok = ok and controllability_rank(A, B) == n
        # input entering at the top of the chain reaches nothing else
        Bd = np.zeros((n, 1))
        Bd[0, 0] = 1.0
        ok = ok and controllability_rank(A, Bd) < n
        # zero input
        ok = ok and controllability_rank(A, np.zeros((n, 1))) == 0
        # input along the kernel of A plus a decoupled block
        Ad = A.copy()
        Ad[0, 1] = 0.0
        ok = ok and controllability_rank(Ad, B) < n
    record(8, "controllability rank of integrator chains", ok, "n = 2..5 full rank, degenerate B rank < n")
    assert ok


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
