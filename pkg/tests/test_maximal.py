import numpy as np
import pytest

from conftest import gaussian
from twistlab.atoms import make_atom
from twistlab.grid import GridFunction, lp_norm, make_grid, twisted_translate, zeros
from twistlab.laguerre import phi_k
from twistlab.maximal import (MaximalProfile, build_dictionary, grand_maximal, grand_scales,
                              heat_maximal, heat_stack, lattice_offsets, nontangential_maximal,
                              tangential_maximal)
from twistlab.propagators import heat_apply


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 32, 8.0)


@pytest.fixture(scope="module")
def profile():
    return MaximalProfile()


def test_profile_covers_range():
    with pytest.raises(ValueError):
        MaximalProfile(t_grid=np.geomspace(1e-2, 1e2, 10))
    with pytest.raises(ValueError):
        MaximalProfile(t_grid=np.geomspace(1e-1, 1e2, 30))


@pytest.mark.parametrize("N", [0, 2, 4])
def test_dictionary_bounds(N):
    d = build_dictionary(1, N, fine=65)
    assert len(d) == 12
    ax = np.linspace(-0.5, 0.5, 65)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    for phi in d:
        v = phi(X, Y)
        assert np.max(np.abs(v)) <= 1 + 1e-12
        # support inside Q(0, 1): the boundary of the unit cube carries zeros
        assert np.all(v[0, :] == 0) and np.all(v[-1, :] == 0) and np.all(v[:, 0] == 0)


def test_lattice_offsets_strict(grid):
    st = lattice_offsets(grid, [0.0, 0.5, 1.0], strict_below=1.0)
    assert tuple(st[0]) == (0, 0)
    assert np.all(np.linalg.norm(st, axis=1) * grid.h < 1.0)


def test_heat_maximal_of_phi0(desk_grid, profile):
    # the t_min = 1e-2 heat kernel needs h = 1/8 for the midpoint rule to resolve it
    phi = phi_k(0, desk_grid)
    Mh = heat_maximal(phi, profile).values.real
    # sup over t is reached at t_min = 1e-2: e^{-0.01} phi_0 up to the kernel route error
    assert np.max(np.abs(Mh - np.exp(-1e-2) * phi.values.real)) < 1e-3


def test_heat_maximal_dominates_every_time(grid, profile):
    f = gaussian(grid, (0.5, -0.5), 0.7)
    stack = heat_stack(f, profile)
    Mh = heat_maximal(f, profile, stack=stack).values.real
    for s in (profile.t_grid[0], profile.t_grid[7], profile.t_grid[-1]):
        assert np.all(np.abs(heat_apply(f, float(s)).values) <= Mh)


def test_dominance_chain(grid, profile):
    rng = np.random.default_rng(5)
    for N in (0, 2):
        f = gaussian(grid, rng.uniform(-1, 1, 2), 0.8, rng.uniform(-1, 1, 2))
        stack = heat_stack(f, profile)
        Mh = heat_maximal(f, profile, stack=stack).values.real
        Ms = nontangential_maximal(f, profile, stack=stack).values.real
        Mss = tangential_maximal(f, N, profile, stack=stack).values.real
        assert np.all(Mh <= Ms)
        assert np.all(Ms <= 2.0 ** N * Mss)


def test_dominance_chain_norms():
    grid = make_grid(1, 64, 8.0)
    profile = MaximalProfile()
    a = make_atom(grid, 0j, 1.0, 1.0, 0.5, seed=1)
    stack = heat_stack(a.f, profile)
    n = [lp_norm(F, 1) for F in (heat_maximal(a.f, profile, stack=stack),
                                 nontangential_maximal(a.f, profile, stack=stack))]
    n.append(2.0 ** 2 * lp_norm(tangential_maximal(a.f, 2, profile, stack=stack), 1))
    assert n[0] <= n[1] <= n[2]


def test_grand_maximal_zero(grid):
    profile = MaximalProfile()
    assert np.all(grand_maximal(zeros(grid), profile, 2.0).values == 0)


def test_grand_maximal_monotone_in_sigma(grid):
    profile = MaximalProfile()
    f = gaussian(grid, (0.2, 0.1), 0.5, (2.0, 0.0))
    small = grand_maximal(f, profile, 0.6).values.real
    big = grand_maximal(f, profile, 1.5).values.real
    assert grand_scales(profile, grid, 0.6).size < grand_scales(profile, grid, 1.5).size
    assert np.all(small <= big)


@pytest.mark.parametrize("steps", [(3, 0), (-2, 4)])
def test_grand_maximal_translation_covariant(steps):
    grid = make_grid(1, 64, 8.0)
    profile = MaximalProfile()
    f = gaussian(grid, (0.0, 0.0), 0.35)
    w = complex(steps[0] * grid.h, steps[1] * grid.h)
    lhs = grand_maximal(twisted_translate(f, w), profile, 1.0).values.real
    base = grand_maximal(f, profile, 1.0).values.real
    rhs = np.zeros_like(base)
    sx, sy = steps
    M = grid.M
    rhs[max(sx, 0):M + min(sx, 0), max(sy, 0):M + min(sy, 0)] = \
        base[max(-sx, 0):M - max(sx, 0), max(-sy, 0):M - max(sy, 0)]
    inner = (slice(8, M - 8),) * 2
    assert np.max(np.abs(lhs[inner] - rhs[inner])) < 1e-10
