import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistlab.atoms import (Atom, ProjectionBasis, complex_exponents, make_atom, moment_tolerance,
                            monomial_exponents, n0_of, projection_PiQ, projection_split,
                            seed_profile, twisted_moment, validate_atom)
from twistlab.grid import Cube, GridFunction, make_grid, zeros


def _local(r, M=64, span=4.0):
    return make_grid(1, M, span * r)


def test_n0():
    assert n0_of(1, 1.0) == 0
    assert n0_of(1, 2 / 3) == 1
    assert n0_of(1, 0.5) == 2
    assert n0_of(2, 0.5) == 4
    with pytest.raises(ValueError):
        n0_of(1, 1.5)


def test_six_moment_conditions_at_p_half():
    pairs = complex_exponents(1, n0_of(1, 0.5))
    assert len(pairs) == 6
    assert sorted((a[0], b[0]) for a, b in pairs) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]


@pytest.mark.parametrize("dim,deg,count", [(2, 0, 1), (2, 2, 6), (4, 2, 15), (2, 4, 15)])
def test_polynomial_dimension(dim, deg, count):
    assert len(monomial_exponents(dim, deg)) == count


@pytest.mark.parametrize("degree", [0, 1, 2, 4])
def test_gram_identity(degree):
    g = _local(0.5)
    b = ProjectionBasis(g, Cube(0.1 - 0.05j, 0.5), degree)
    assert b.J == len(monomial_exponents(2, degree))
    assert np.max(np.abs(b.gram() - np.eye(b.J))) < 1e-10


def test_projection_fixes_h_k():
    g = _local(0.5)
    b = ProjectionBasis(g, Cube(0.1j, 0.5), 2)
    for k in range(b.J):
        hk = b.h(k)
        assert np.max(np.abs(projection_PiQ(hk, b).values - hk.values)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0, 1, 2]))
def test_projection_idempotent(seed, degree):
    g = _local(0.5, M=32)
    cube = Cube(0.05 + 0.1j, 0.5)
    b = ProjectionBasis(g, cube, degree)
    f = seed_profile(g, cube, seed)
    once = projection_PiQ(f, b)
    assert np.max(np.abs(projection_PiQ(once, b).values - once.values)) < 1e-10


def test_projection_kills_cancelled_input():
    g = _local(0.25)
    cube = Cube(0j, 0.25)
    b = ProjectionBasis(g, cube, 2)
    a, _ = projection_split(seed_profile(g, cube, 4), cube, 2, b)
    assert np.max(np.abs(projection_PiQ(a, b).values)) < 1e-8 * np.max(np.abs(a.values))


def test_projection_split_reconstructs_and_cancels():
    r = 0.25
    g = _local(r)
    cube = Cube(0.03 - 0.02j, r)
    f = seed_profile(g, cube, 7)
    a, b = projection_split(f, cube, 2)
    # (f - b) + b recovers f up to one rounding per sample
    eps = np.finfo(float).eps
    assert np.max(np.abs((a + b).values - f.values)) <= 4 * eps * np.max(np.abs(f.values))
    for alpha, beta in complex_exponents(1, 2):
        m = twisted_moment(a, cube.center, alpha, beta)
        assert abs(m) < moment_tolerance(1, r, 0.5, sum(alpha) + sum(beta)) * r ** (-4)


def test_projection_rejects_coarse_cube():
    g = make_grid(1, 16, 4.0)
    with pytest.raises(ValueError):
        ProjectionBasis(g, Cube(0j, 0.3), 4)


@pytest.mark.parametrize("p", [1.0, 2 / 3, 0.5])
@pytest.mark.parametrize("m", [1, 3, 5])
def test_make_atom_valid(p, m):
    r = 1.0 / 2 ** m
    a = make_atom(_local(r), 0.2 * r - 0.1j * r, r, p, 1.0, seed=m)
    rep = validate_atom(a)
    assert rep.passed and not rep.degenerate
    assert len(rep.moments) == len(complex_exponents(1, n0_of(1, p)))
    assert rep.sup_ratio == pytest.approx(1.0, abs=1e-12)


def test_p1_single_cancellation():
    a = make_atom(_local(0.25), 0j, 0.25, 1.0, 1.0, seed=2)
    rep = validate_atom(a)
    assert len(rep.moments) == 1 and rep.passed


def test_large_cube_needs_no_cancellation():
    a = make_atom(_local(2.0), 0j, 2.0, 0.5, 1.0, seed=0)
    rep = validate_atom(a)
    assert rep.moments == [] and rep.passed
    assert abs(twisted_moment(a.f, 0j, (0,), (0,))) > 1e-3


def test_uncancelled_bump_fails_moments():
    r = 0.25
    g = _local(r)
    cube = Cube(0j, r)
    f = seed_profile(g, cube, 0)
    f = f * (r ** -4 / np.max(np.abs(f.values)))
    rep = validate_atom(Atom(f, cube, 0.5, 1.0, 2))
    assert rep.support_ok and rep.sup_ok and not rep.moments_ok and not rep.passed


def test_zero_atom_is_degenerate():
    g = _local(0.25)
    rep = validate_atom(Atom(zeros(g), Cube(0j, 0.25), 1.0, 1.0, 0))
    assert rep.degenerate and rep.support_ok and rep.sup_ok and rep.moments_ok


def test_support_leak_detected():
    g = _local(0.25)
    v = np.zeros(g.shape, dtype=complex)
    v[0, 0] = 1.0
    rep = validate_atom(Atom(GridFunction(g, v), Cube(0j, 0.25), 1.0, 4.0, 0))
    assert not rep.support_ok


def test_make_atom_resolution_guard():
    g = make_grid(1, 32, 8.0)
    with pytest.raises(ValueError):
        make_atom(g, 0j, 7 * g.h, 1.0, 1.0)
