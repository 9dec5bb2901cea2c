import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre

from twistlab.grid import GridFunction, lp_norm, make_grid, rel_l2, zeros
from twistlab.laguerre import (K_LIMIT, build_basis, laguerre_function_radial, laguerre_polynomial,
                               parseval_check, phi_k, spectral_project)


def test_laguerre_base_cases():
    assert laguerre_polynomial(0, 0.7, 3.1) == 1.0
    assert laguerre_polynomial(1, 0.7, 3.1) == pytest.approx(1 + 0.7 - 3.1)


def test_laguerre_series_oracle():
    # direct series at k = 2: 1 - 2*2 + 4/2 = -1
    assert laguerre_polynomial(2, 0, 2.0) == pytest.approx(-1.0, abs=1e-15)


def test_laguerre_rejects():
    with pytest.raises(ValueError):
        laguerre_polynomial(K_LIMIT + 1, 0, 1.0)
    with pytest.raises(ValueError):
        laguerre_polynomial(-1, 0, 1.0)
    with pytest.raises(ValueError):
        laguerre_polynomial(3, -1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 60), st.sampled_from([0.0, 1.0, 2.5]), st.floats(0.0, 40.0))
def test_laguerre_matches_reference(k, alpha, x):
    ref = eval_genlaguerre(k, alpha, x)
    scale = max(1.0, abs(ref), math.comb(k + int(alpha) + 1, k) * math.exp(x / 2))
    assert abs(laguerre_polynomial(k, alpha, x) - ref) < 1e-10 * scale


def test_laguerre_function_no_overflow():
    vals = laguerre_function_radial(200, 1, np.array([0.0, 1e3, 1e5]))
    assert np.all(np.isfinite(vals)) and vals[-1] == 0.0


def test_phi_values_at_origin():
    for n in (1, 2):
        g = make_grid(n, 16, 4.0)
        c = (g.M // 2,) * g.dim
        assert phi_k(0, g).values[c] == 1.0
        assert phi_k(1, g).values[c] == pytest.approx(n)


@pytest.mark.parametrize("k", [0, 3, 9])
def test_phi_radial(desk_grid, k):
    v = phi_k(k, desk_grid).values
    assert np.max(np.abs(v.imag)) == 0.0
    assert np.max(np.abs(v - v.T)) < 1e-12
    inner = v[1:, 1:]  # the lattice is symmetric under x -> -x on indices 1..M-1
    assert np.max(np.abs(inner - inner[::-1, :])) < 1e-12


def test_basis_eigenvalues(desk_basis):
    ev = desk_basis.eigenvalues
    assert ev[0] == 1 and np.all(np.diff(ev) > 0)
    assert len(desk_basis.phi) == 33 and desk_basis.grid.M == 256


def test_build_basis_rejects_large_kmax(small_grid):
    with pytest.raises(ValueError):
        build_basis(small_grid, K_LIMIT + 1)


def test_project_phi0(desk_grid, desk_basis):
    f = phi_k(0, desk_grid)
    assert rel_l2(spectral_project(f, 0, desk_basis), f) < 1e-3
    for k in (1, 2, 5):
        assert lp_norm(spectral_project(f, k, desk_basis), 2) / lp_norm(f, 2) < 1e-3


def test_project_picks_component(desk_grid, desk_basis):
    f = phi_k(0, desk_grid) + phi_k(2, desk_grid)
    assert rel_l2(spectral_project(f, 2, desk_basis), phi_k(2, desk_grid)) < 1e-3


def test_project_zero(desk_grid, desk_basis):
    assert np.all(spectral_project(zeros(desk_grid), 4, desk_basis).values == 0)


def test_project_idempotent(desk_grid, desk_basis):
    f = phi_k(1, desk_grid) + phi_k(4, desk_grid) * (0.5 - 0.25j)
    p = spectral_project(f, 4, desk_basis)
    assert rel_l2(spectral_project(p, 4, desk_basis), p) < 1e-3


def test_resolution_of_identity(desk_grid, desk_basis):
    from twistlab.grid import twisted_translate

    f = sum((phi_k(k, desk_grid) * c for k, c in [(0, 1.0), (2, 0.5j), (4, -0.3)]), zeros(desk_grid))
    f = twisted_translate(f, 0.5 - 0.25j)
    total = sum((spectral_project(f, k, desk_basis) for k in range(desk_basis.K_max + 1)), zeros(desk_grid))
    assert rel_l2(total, f) < 1e-3


@pytest.mark.parametrize("coef3", [0.0, 0.5])
def test_parseval(desk_grid, desk_basis, coef3):
    f = phi_k(0, desk_grid) + phi_k(3, desk_grid) * coef3
    lhs, rhs = parseval_check(f, desk_basis)
    assert abs(rhs / lhs - 1) < 1e-3


def test_parseval_zero(small_grid):
    assert parseval_check(zeros(small_grid), build_basis(small_grid, 2)) == (0.0, 0.0)


def test_basis_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("TWISTLAB_CACHE", str(tmp_path))
    g = make_grid(1, 16, 8.0)
    b1 = build_basis(g, 3, cache=True)
    assert (tmp_path / "n1_M32_L16.0" / "manifest.txt").exists()
    b2 = build_basis(g, 3, cache=True)
    for a, b in zip(b1.phi, b2.phi):
        assert np.array_equal(a.values, b.values)
    assert list(b2.eigenvalues) == [1, 3, 5, 7]


def test_laguerre_function_large_order_matches_mpmath():
    import mpmath

    mpmath.mp.dps = 60
    r2 = np.array([4.0, 400.0, 3000.0])
    got = laguerre_function_radial(256, 1, r2)
    want = [float(mpmath.laguerre(256, 0, mpmath.mpf(v) / 2) * mpmath.exp(-mpmath.mpf(v) / 4)) for v in r2]
    assert np.all(np.isfinite(got))
    assert np.allclose(got, want, rtol=1e-9, atol=1e-300)


def test_laguerre_function_rejects_order():
    with pytest.raises(ValueError):
        laguerre_function_radial(257, 1, np.array([1.0]))
