"""Command-line front end.

Exit codes: 0 all assertions passed, 1 parse error, 2 precondition failure,
3 assertion failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import crane, report, sysfile
from .errors import (
    ConventionError,
    DimensionError,
    LinearizationError,
    ParseError,
    PreconditionError,
    StoflinError,
)
from .linearize import check_det_sfb, linearize, verify_linear
from .parser import parse
from .randgen import random_diffeo, random_expression
from .sim import SimConfig, simulate
from .system import Convention
from .theorems import composition, corr_diagram, ensure_ito, ito_term_identity, second_derivative_identity
from .transform import coord_transform, feedback_transform

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_ASSERTION = 0, 1, 2, 3
VARIANT_CHOICES = ["det", "strat-g", "strat-gsigma", "ito-g-commuting", "ito-gsigma", "sigma", "ito-g"]
# command-line names of the identity checks (fixed by the interface)
LIE_SQUARE, ITO_TERM = "eq140", "eq215"
THEOREMS = ["corr-diagram", "composition", LIE_SQUARE, ITO_TERM]


def _emit(obj, out: str | None) -> None:
    text = report.dumps(obj)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args):
    sf = sysfile.load(args.system)
    s = sf.system
    s = s.replace(sampler=s.sampler.with_seed(args.seed))
    return sf, s


def cmd_check(args) -> int:
    sf, s = _load(args)
    lin = verify_linear(s, tol=args.tol, n_samples=args.samples)
    sfb = check_det_sfb(s, tol=args.tol, n_samples=args.samples)
    _emit({"system": args.system, "linearity": lin.to_dict(), "feedback_linearizable": sfb}, args.output)
    return EXIT_OK


def cmd_transform(args) -> int:
    sf, s = _load(args)
    T = sysfile.load_transform(args.T, s.dim) if args.T else sf.transform
    fb = sysfile.load_feedback(args.fb, s.dim) if args.fb else sf.feedback
    out = s
    if fb is not None:
        out = feedback_transform(out, fb, check=True, n_samples=args.samples)
    if T is not None:
        if T.inverse is None:
            raise PreconditionError("writing a transformed system file needs the inverse map (Tinv)")
        out = coord_transform(out, T, preserve_equilibrium=False)
    text = sysfile.dumps(out.replace(x0=tuple(out.z0()), sampler=None))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_linearize(args) -> int:
    sf, s = _load(args)
    variant = args.variant.replace("-", "_")
    lam = parse(args.lam, s.dim) if args.lam else None
    alpha = parse(args.alpha, s.dim) if args.alpha else None
    try:
        lt = linearize(s, variant, lam=lam, alpha=alpha, n_samples=args.samples)
    except LinearizationError as exc:
        _emit({"variant": variant, "passed": False, "stage": exc.stage, "message": str(exc), "diagnostics": exc.diagnostics}, args.output)
        print(f"stoflin: linearization failed: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    _emit(lt.to_dict(), args.output)
    return EXIT_OK if lt.passed else EXIT_ASSERTION


def cmd_verify(args) -> int:
    sf, s = _load(args)
    rng = np.random.default_rng(args.seed)
    s = ensure_ito(s)
    n = s.dim
    tol = args.tol
    if args.theorem == "corr-diagram":
        T = sf.transform if sf.transform is not None and sf.transform.inverse is not None else random_diffeo(rng, n, steps=3)
        rep = corr_diagram(s, T, tol=min(tol, 1e-9), n_samples=max(args.samples, 100))
    elif args.theorem == "composition":
        rep = composition(s, random_diffeo(rng, n, steps=3), random_diffeo(rng, n, steps=3), tol=min(tol, 1e-9), n_samples=args.samples)
    elif args.theorem == LIE_SQUARE:
        h = sf.transform.forward[0] if sf.transform is not None else random_expression(rng, n, 3)
        rep = second_derivative_identity(
            s.sigma_field, h, s.sampler, tol=min(tol, 1e-10), params=s.params, n_samples=args.samples
        )
    else:
        T = sf.transform if sf.transform is not None and sf.transform.inverse is not None else random_diffeo(rng, n, steps=3)
        rep = ito_term_identity(s.sigma_field, T, s.sampler, tol=tol, params=s.params, n_samples=args.samples)
    rep = dict(rep)
    rep["theorem"] = args.theorem
    rep["seed"] = args.seed
    _emit(rep, args.output)
    return EXIT_OK if rep["passed"] else EXIT_ASSERTION


def cmd_simulate(args) -> int:
    sf, s = _load(args)
    x_init = tuple(float(v) for v in args.x_init.replace(",", " ").split()) if args.x_init else None
    control = parse(args.control, s.dim) if args.control else sf.feedback.alpha if sf.feedback else "0"
    cfg = SimConfig(args.t_end, args.dt, args.paths, args.seed, control, x_init, args.save_every)
    ens = simulate(s, cfg)
    if args.csv:
        ens.to_csv(args.csv)
    alive = ens.alive()
    mean = alive.mean(axis=0) if len(alive) else np.full(ens.paths.shape[1:], np.nan)
    std = alive.std(axis=0, ddof=1) if len(alive) > 1 else np.zeros(ens.paths.shape[1:])
    if args.emit_plot_data:
        with open(args.emit_plot_data, "w", encoding="utf-8") as fh:
            cols = [f"mean_x{i}" for i in range(1, ens.dim + 1)] + [f"std_x{i}" for i in range(1, ens.dim + 1)]
            fh.write(",".join(["t"] + cols) + "\n")
            for k, t in enumerate(ens.times):
                vals = list(mean[k]) + list(std[k])
                fh.write(",".join(["%.17g" % t] + ["%.17g" % v for v in vals]) + "\n")
    rep = {
        "convention": s.convention.value,
        "scheme": "heun" if s.convention is Convention.STRATONOVICH else "euler-maruyama",
        "n_paths": ens.n_paths,
        "steps": cfg.n_steps,
        "dt": cfg.t_end / cfg.n_steps,
        "exit_fraction": ens.exit_fraction,
        "final_mean": mean[-1].tolist(),
        "final_std": std[-1].tolist(),
    }
    _emit(rep, args.output)
    return EXIT_OK


def cmd_example(args) -> int:
    rep = crane.reproduce(tol=args.tol, n_samples=args.samples)
    if args.write_system:
        sysfile.dump(args.write_system, crane.crane_system(), crane.crane_transform())
    _emit(rep, args.output)
    if not rep["passed"]:
        failed = [k for k, v in rep["checks"].items() if not v]
        print(f"stoflin: crane checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="tolerance (default 1e-8)")
    common.add_argument("--samples", type=int, default=64, help="sample points per check (default 64)")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    common.add_argument("-o", "--output", help="write the report here instead of standard output")

    p = argparse.ArgumentParser(prog="stoflin", description="Feedback linearization of stochastic control systems.")
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("check", parents=[common], help="linearity and feedback-linearizability report")
    c.add_argument("system")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("transform", parents=[common], help="apply a coordinate change and/or feedback")
    t.add_argument("system")
    t.add_argument("--T", help="file with a [transform] section (T1.., Tinv1..)")
    t.add_argument("--fb", help="file with a [feedback] section (alpha, beta)")
    t.set_defaults(func=cmd_transform)

    li = sub.add_parser("linearize", parents=[common], help="construct a linearizing transformation")
    li.add_argument("system")
    li.add_argument("--variant", required=True, choices=VARIANT_CHOICES)
    li.add_argument("--lambda", dest="lam", help="output function lambda (default: solved for n <= 2)")
    li.add_argument("--alpha", help="feedback alpha for the sigma variant")
    li.set_defaults(func=cmd_linearize)

    v = sub.add_parser("verify", parents=[common], help="sampled check of a transformation identity")
    v.add_argument("system")
    v.add_argument(
        "--theorem",
        required=True,
        choices=THEOREMS,
        help="corr-diagram, composition, eq140 (half L_sigma L_sigma T = P_sigma T - L_corr T) or eq215 (P_sigma T as a difference of correcting terms)",
    )
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo simulation")
    s.add_argument("system")
    s.add_argument("--t-end", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--paths", type=int, default=1000)
    s.add_argument("--control", help="input u as an expression (default: [feedback] alpha or 0)")
    s.add_argument("--x-init", help="initial state, comma separated (default x0)")
    s.add_argument("--save-every", type=int, default=1)
    s.add_argument("--csv", help="write the ensemble as CSV (path,step,t,x1..xn)")
    s.add_argument("--emit-plot-data", help="write per-time mean and std as CSV")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("example", parents=[common], help="bundled worked examples")
    e.add_argument("name", choices=["crane"])
    e.add_argument("--write-system", help="also write the crane system file here")
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"stoflin: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (PreconditionError, ConventionError, DimensionError) as exc:
        print(f"stoflin: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"stoflin: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except StoflinError as exc:
        print(f"stoflin: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
