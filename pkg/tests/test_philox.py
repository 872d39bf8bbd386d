import numpy as np
import pytest

from stoflin.philox import normals, philox4x32, split_seed, uniforms

# reference vectors of the Random123 distribution for Philox4x32-10
KAT = [
    ([0, 0, 0, 0], [0, 0], [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]),
    ([0xFFFFFFFF] * 4, [0xFFFFFFFF] * 2, [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD]),
    (
        [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344],
        [0xA4093822, 0x299F31D0],
        [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1],
    ),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_known_answers(ctr, key, expected):
    assert philox4x32(ctr, key).tolist() == expected


def test_vectorized_matches_single():
    ctrs = np.array([k[0] for k in KAT], dtype=np.uint64)
    keys = np.array([k[1] for k in KAT], dtype=np.uint64)
    assert philox4x32(ctrs, keys).tolist() == [k[2] for k in KAT]


def test_split_seed():
    assert split_seed([2**32 + 5]).tolist() == [[5, 1]]


def test_uniforms_open_interval_and_deterministic():
    seeds = np.arange(1000, dtype=np.uint64)
    u = uniforms(seeds, 3)
    assert np.all((u > 0) & (u < 1))
    assert np.array_equal(u, uniforms(seeds, 3))
    assert not np.array_equal(u, uniforms(seeds, 4))


def test_draw_depends_only_on_seed_and_step():
    a = normals(np.arange(10, dtype=np.uint64), 7)
    b = normals(np.arange(5, 10, dtype=np.uint64), 7)
    assert np.array_equal(a[5:], b)


def test_normal_moments():
    z = np.concatenate([normals(np.arange(20000, dtype=np.uint64), k) for k in range(5)])
    n = len(z)
    assert abs(z.mean()) <= 4 / np.sqrt(n)
    assert abs(z.var() - 1) <= 4 * np.sqrt(2 / n)
    assert abs(np.mean(z**4) - 3) <= 4 * np.sqrt(96 / n)
