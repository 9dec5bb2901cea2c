import numpy as np
import pytest

from twistlab.atoms import make_atom
from twistlab.grid import GridFunction, make_grid
from twistlab.taylor import (MAX_STRING, FieldStrings, interpolate, remainder_identity,
                             taylor_polynomial_part, taylor_twisted_remainder, twisted_pair)


@pytest.fixture(scope="module")
def g():
    grid = make_grid(1, 128, 16.0)
    x, y = grid.coords()
    return GridFunction(grid, np.broadcast_to(np.exp(-(x * x + y * y) / 4) * (1 + 0.3j * x), grid.shape))


def _ws(zj, count=12, seed=0):
    rng = np.random.default_rng(seed)
    return zj + rng.uniform(-0.5, 0.5, count) + 1j * rng.uniform(-0.5, 0.5, count)


def test_string_guard(g):
    with pytest.raises(ValueError):
        FieldStrings(g, MAX_STRING)
    with pytest.raises(ValueError):
        FieldStrings(g, -1)
    with pytest.raises(ValueError):
        taylor_twisted_remainder(g, 0j, 0, np.array([0.1]), 0.2, nodes=16)


def test_interpolation_on_lattice(g):
    pts = np.array([[0.0, 0.0], [0.5, -1.25], [2.0, 3.0]])
    idx = ((pts + g.grid.L / 2) / g.grid.h).astype(int)
    assert np.allclose(interpolate(g, pts), g.values[idx[:, 0], idx[:, 1]], atol=1e-14)


@pytest.mark.parametrize("N", [0, 1, 2, 3])
def test_polynomial_plus_remainder_is_translate(g, N):
    zj, z = 0.3 - 0.2j, 0.7 + 0.4j
    w = _ws(zj)
    fs = FieldStrings(g, N)
    direct = twisted_pair(g, z - zj, w - zj)
    total = taylor_polynomial_part(g, zj, N, w, z, fs) + taylor_twisted_remainder(g, zj, N, w, z, fs)
    assert np.max(np.abs(total - direct)) < 1e-5 * np.max(np.abs(direct))


def test_remainder_vanishes_at_center(g):
    zj = -0.4 + 0.1j
    phi = taylor_twisted_remainder(g, zj, 2, np.array([zj]), 0.5 + 0.5j)
    assert abs(phi[0]) < 1e-14


@pytest.mark.parametrize("N", [0, 1, 2])
def test_constant_g(N):
    # strings of X~ fields on a constant only see the linear weights, so compare to direct evaluation
    grid = make_grid(1, 64, 16.0)
    one = GridFunction(grid, np.ones(grid.shape))
    zj, z = 0.2 + 0.1j, -0.3 + 0.2j
    w = _ws(zj, 6, seed=3) * 0.5
    direct = twisted_pair(one, z - zj, w - zj) - taylor_polynomial_part(one, zj, N, w, z)
    phi = taylor_twisted_remainder(one, zj, N, w, z)
    assert np.max(np.abs(phi - direct)) < 1e-8


def test_remainder_identity_small(g):
    grid = make_grid(1, 64, 8.0)
    zj = 0.25 - 0.125j
    a = make_atom(grid, zj, 1.0, 1.0, 2.0, seed=3)
    kg = grid.extended(2)
    x, y = kg.coords()
    gk = GridFunction(kg, np.broadcast_to(np.exp(-(x * x + y * y) / 4) * (1 + 0.3j * x), kg.shape))
    zs = np.array([0.5 + 0.5j, -1.0 + 0.25j, 1.5 - 1.0j])
    lhs, rhs = remainder_identity(a.f, gk, zj, a.N0, zs)
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-4
