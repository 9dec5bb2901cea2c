import numpy as np
import pytest

from twistlab.grid import GridFunction, make_grid, rel_l2
from twistlab.laguerre import build_basis, phi_k
from twistlab.subordination import (A_FLAT, A_SUPPORT, DecayReport, OscKernel, a_cutoff, compute_a_tau,
                                    kernel_Kj, remainder_kernel, subordination_residual, verify_kernel_decay,
                                    wave_chi, wave_symbol_piece, wave_via_subordination)


@pytest.fixture(scope="module")
def data4():
    return compute_a_tau(tau=4.0)


@pytest.fixture(scope="module")
def data8():
    return compute_a_tau(tau=8.0)


def test_cutoff_shape():
    s = np.array([0.05, A_SUPPORT[0], A_FLAT[0], 0.5, A_FLAT[1], A_SUPPORT[1], 4.5])
    assert np.array_equal(a_cutoff(s), [0, 0, 1, 1, 1, 0, 0])
    mid = a_cutoff(np.linspace(A_FLAT[1], A_SUPPORT[1], 50))
    assert np.all(np.diff(mid) <= 0)


def test_tau_guard():
    with pytest.raises(ValueError):
        compute_a_tau(tau=0.5)


def test_a_vanishes_off_support(data4):
    lo, hi = data4.support
    assert A_SUPPORT[0] <= lo < hi <= A_SUPPORT[1]
    s = np.array([lo / 2, hi * 1.01, 10.0])
    assert np.all(data4.a(s) == 0)


@pytest.mark.parametrize("fixture", ["data4", "data8"])
def test_amplitude_peaks_at_stationary_point(fixture, request):
    # the phase tau/4s + tau s u is stationary at s = 1/(2 sqrt u); chi peaks at u = 1
    d = request.getfixturevalue(fixture)
    s_peak = d.s_grid[np.argmax(np.abs(d.a_tau))]
    assert abs(s_peak - 0.5) < 0.05


def test_decomposition_residual(data4):
    assert subordination_residual(data4) < 1e-6


def test_psi_shrinks_with_tau(data4, data8):
    assert np.max(np.abs(data8.psi_table)) < np.max(np.abs(data4.psi_table))


def test_decomposition_adds_up(data4):
    u = np.linspace(0.1, 4.0, 17)
    assert np.allclose(data4.reconstruct(u) + data4.psi(u), data4.symbol(u), atol=1e-13)


def test_kernel_guards():
    with pytest.raises(ValueError):
        kernel_Kj(11, np.array([0.5]))
    f = GridFunction(make_grid(1, 8, 8.0), np.zeros((8, 8)))
    with pytest.raises(ValueError):
        wave_via_subordination(f, 9)


def test_decay_report_guards():
    r = np.linspace(0.01, 3, 50)
    with pytest.raises(ValueError, match="degenerate"):
        verify_kernel_decay(OscKernel(4, r, np.zeros(50, dtype=complex)))
    flags = np.zeros(50, dtype=bool)
    flags[:10] = True
    with pytest.raises(ValueError, match="10%"):
        verify_kernel_decay(OscKernel(4, r, np.ones(50, dtype=complex), flags=flags))
    with pytest.raises(ValueError, match="fewer than 3"):
        verify_kernel_decay(OscKernel(4, np.array([0.0, 1.0]), np.ones(2, dtype=complex)))


def test_decay_report_fits_power_law():
    r = np.linspace(0.0, 3.0, 301)
    K = OscKernel(3, r, (1 + 8 * np.abs(1 - r)) ** -5.0 + 0j)
    rep = verify_kernel_decay(K)
    assert abs(rep.slope + 5) < 1e-10 and rep.residual < 1e-10
    assert DecayReport.from_json(rep.to_json()) == rep


def test_kernel_quadrature_estimate(data4):
    K = kernel_Kj(2, np.linspace(0.05, 3.0, 60), data4)
    assert K.error_estimate < 1e-4
    assert not np.any(K.flags)


def test_remainder_kernel_routes_agree():
    basis = build_basis(make_grid(1, 64, 8.0), 16)
    d = compute_a_tau(tau=2.0)
    K1 = remainder_kernel(1, basis, data=d)
    K2 = remainder_kernel(1, data=d, grid=K1.grid, K_max=16)
    assert rel_l2(K2, K1) < 1e-12


def test_remainder_kernel_needs_grid():
    with pytest.raises(ValueError):
        remainder_kernel(1, data=compute_a_tau(tau=2.0))


@pytest.mark.parametrize("j,k", [(2, 3), (3, 8)])
def test_subordinated_wave_matches_symbol(j, k):
    grid = make_grid(1, 256, 24.0)
    f = phi_k(k, grid)
    lam = 2 * k + 1
    data = compute_a_tau(wave_chi(0.5), 2.0 ** j)
    psi = complex(data.psi(np.array([lam / 4.0 ** j]))[0])
    out = wave_via_subordination(f, j, 0.5, data=data, psi_values=psi)
    ref = f * complex(wave_symbol_piece(0.5, j)(np.array([float(lam)]))[0])
    assert rel_l2(out, ref) < 1e-2
