from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stoflin import crane, sysfile
from stoflin.errors import DimensionError, ParseError
from stoflin.randgen import random_system
from stoflin.system import Convention

SYSTEMS = Path(__file__).resolve().parents[1] / "systems"

MINIMAL = """
[system]
n = 1
convention = stratonovich

[f]
f1 = -x1

[g]
g1 = 1

[sigma]
sigma1 = a*x1

[params]
a = 0.5
"""


def test_minimal_file():
    sf = sysfile.loads(MINIMAL)
    s = sf.system
    assert s.dim == 1 and s.convention is Convention.STRATONOVICH
    assert s.params == {"a": 0.5}
    assert s.x0 == (0.0,)
    assert sf.transform is None and sf.feedback is None


def test_matrix_dispersion():
    text = MINIMAL.replace("sigma1 = a*x1", "sigma1_1 = 1\nsigma1_2 = x1").replace("n = 1", "n = 1\nk = 2")
    s = sysfile.loads(text).system
    assert s.sigma_matrix.shape == (1, 2)


@pytest.mark.parametrize(
    "text,exc",
    [
        ("[f]\nf1 = 1\n", ParseError),
        (MINIMAL.replace("f1 = -x1", "f1 = -x1 +"), ParseError),
        (MINIMAL.replace("[g]\ng1 = 1", "[g]\ng2 = 1"), ParseError),
        (MINIMAL.replace("n = 1", "n = 1\nm = 2"), DimensionError),
        (MINIMAL.replace("a = 0.5", "a = half"), ParseError),
        ("not an ini file", ParseError),
    ],
)
def test_malformed(text, exc):
    with pytest.raises(exc):
        sysfile.loads(text)


def test_bundled_systems_load():
    for path in sorted(SYSTEMS.glob("*.sys")):
        assert sysfile.load(path).system.dim >= 1


def test_crane_round_trip():
    s = crane.crane_system()
    back = sysfile.loads(sysfile.dumps(s, crane.crane_transform()))
    assert back.system.equals_on_sampler(s) <= 1e-14
    assert back.transform is not None and back.transform.inverse is not None


@given(st.integers(0, 2**31))
def test_random_round_trip(seed):
    s = random_system(np.random.default_rng(seed), 3, 3)
    back = sysfile.loads(sysfile.dumps(s)).system
    assert back.equals_on_sampler(s, 32) <= 1e-14
    assert back.sampler.box == s.sampler.box


def test_dump_is_stable():
    s = crane.crane_system()
    text = sysfile.dumps(s)
    assert sysfile.dumps(sysfile.loads(text).system) == text
