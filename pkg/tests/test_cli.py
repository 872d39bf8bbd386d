import json

import pytest

from stoflin import cli

from test_sysfile import SYSTEMS


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_check(capsys):
    code, out = run(["check", SYSTEMS / "integrator2.sys"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["linearity"]["is_gsigma_linear"]


def test_linearize_crane(capsys):
    code, out = run(["linearize", SYSTEMS / "crane.sys", "--variant", "ito-gsigma"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert rep["variant"] == "ito_gsigma"


def test_linearize_failure_exit_code(capsys):
    code, out = run(["linearize", SYSTEMS / "crane.sys", "--variant", "ito-gsigma", "--lambda", "x1"], capsys)
    assert code == 3
    assert json.loads(out)["passed"] is False


@pytest.mark.parametrize("theorem", ["corr-diagram", "composition", "eq140", "eq215"])
def test_verify(theorem, capsys):
    code, out = run(["verify", SYSTEMS / "rand3.sys", "--theorem", theorem, "--seed", "7"], capsys)
    assert code == 0
    assert json.loads(out)["passed"]


def test_verify_deterministic_output(capsys):
    argv = ["verify", SYSTEMS / "rand3.sys", "--theorem", "corr-diagram", "--seed", "7"]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_example_crane(tmp_path, capsys):
    target = tmp_path / "crane.sys"
    code, out = run(["example", "crane", "--write-system", target], capsys)
    assert code == 0 and json.loads(out)["passed"]
    assert target.read_text().startswith("[system]")


def test_simulate(tmp_path, capsys):
    csv = tmp_path / "paths.csv"
    plot = tmp_path / "plot.csv"
    code, out = run(
        ["simulate", SYSTEMS / "integrator2.sys", "--paths", 20, "--dt", 0.05, "--csv", csv, "--emit-plot-data", plot],
        capsys,
    )
    assert code == 0
    assert json.loads(out)["scheme"] == "euler-maruyama"
    assert csv.read_text().splitlines()[0] == "path,step,t,x1,x2"
    assert plot.read_text().splitlines()[0] == "t,mean_x1,mean_x2,std_x1,std_x2"


def test_transform_with_files(tmp_path, capsys):
    T = tmp_path / "T.ini"
    T.write_text("[transform]\nT1 = x1\nT2 = x2 + x1^2\nTinv1 = x1\nTinv2 = x2 - x1^2\n")
    fb = tmp_path / "fb.ini"
    fb.write_text("[feedback]\nalpha = -x1\nbeta = 2\n")
    code, out = run(["transform", SYSTEMS / "integrator2.sys", "--T", T, "--fb", fb], capsys)
    assert code == 0
    assert "[system]" in out and "f2 =" in out


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.sys"
    bad.write_text("[system]\nn = 1\n[f]\nf1 = x1*\n[g]\ng1 = 1\n[sigma]\nsigma1 = 0\n")
    assert cli.main(["check", str(bad)]) == 1


def test_missing_file_exit(tmp_path):
    assert cli.main(["check", str(tmp_path / "nope.sys")]) == 2


def test_convention_precondition_exit(tmp_path, capsys):
    strat = tmp_path / "s.sys"
    strat.write_text((SYSTEMS / "integrator2.sys").read_text().replace("convention = ito", "convention = stratonovich"))
    assert cli.main(["linearize", str(strat), "--variant", "ito-gsigma"]) == 2
