"""Twisted convolution (f x g)(z) = int f(w) g(z - w) exp((i/2) Im(z . conj(w))) dw.

The first argument lives on the output grid.  The second may live on any grid with
the same spacing (typically the doubled grid), so that g(z - w) is available for every
pair of output and source points instead of being cut off at the box edge.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction

log = logging.getLogger(__name__)

_DIRECT_CHUNK = 1 << 21  # pair evaluations per block in the direct path
_FAST_BATCH = 1 << 22  # complex workspace entries per row batch in the fast path


def _check_pair(f: GridFunction, g: GridFunction):
    if not f.grid.compatible(g.grid):
        raise ValueError("twisted convolution needs grids with equal n and spacing")


def twisted_conv_direct(f: GridFunction, g: GridFunction) -> GridFunction:
    """Midpoint-rule quadrature of the defining integral at every lattice point."""
    _check_pair(f, g)
    G, Gg = f.grid, g.grid
    d = G.dim
    fv = f.values.ravel()
    src = np.flatnonzero(fv)
    out = np.zeros(G.size, dtype=complex)
    if src.size == 0:
        return GridFunction(G, out)
    src_idx = np.stack(np.unravel_index(src, G.shape), axis=-1)
    src_pos = (src_idx - G.M // 2) * G.h
    fsrc = fv[src]
    gflat = g.values.ravel()
    off = Gg.M // 2
    all_idx = np.stack(np.unravel_index(np.arange(G.size), G.shape), axis=-1)
    chunk = max(1, _DIRECT_CHUNK // src.size)
    for start in range(0, G.size, chunk):
        zi = all_idx[start:start + chunk]
        zpos = (zi - G.M // 2) * G.h
        e = zi[:, None, :] - src_idx[None, :, :] + off
        valid = np.all((e >= 0) & (e < Gg.M), axis=-1)
        flat = np.zeros(valid.shape, dtype=np.int64)
        for ax in range(d):
            flat = flat * Gg.M + np.clip(e[..., ax], 0, Gg.M - 1)
        gv = np.where(valid, gflat[flat], 0.0)
        n = G.n
        arg = (zpos[:, None, n:] * src_pos[None, :, :n]
               - zpos[:, None, :n] * src_pos[None, :, n:]).sum(axis=-1)
        out[start:start + chunk] = np.sum(fsrc[None, :] * gv * np.exp(0.5j * arg), axis=1)
    return GridFunction(G, out.reshape(G.shape) * G.cell_volume)


@dataclass
class ConvPlan:
    """Precomputed column spectra of the second argument for the fast path (n = 1)."""
    grid: Grid
    kernel_grid: Grid
    mode: str
    nfft: int
    spectra: np.ndarray | None = None
    lo: int = 0  # kernel column index stored in spectra[0]

    @classmethod
    def build(cls, grid: Grid, g: GridFunction, mode: str = "fast") -> "ConvPlan":
        if not grid.compatible(g.grid):
            raise ValueError("kernel grid spacing differs from the output grid")
        if mode == "fast" and grid.n != 1:
            log.info("fast twisted convolution needs n = 1; using direct quadrature")
            mode = "direct"
        M, Mg = grid.M, g.grid.M
        nfft = 2 * M
        plan = cls(grid, g.grid, mode, nfft)
        if mode == "direct":
            plan.spectra = g.values
            return plan
        off = Mg // 2
        lo = max(0, off - (M - 1))
        hi = min(Mg, off + M)
        k = np.arange(-(M - 1), M)
        rows = k + off
        ok = (rows >= 0) & (rows < Mg)
        buf = np.zeros((hi - lo, nfft), dtype=complex)
        buf[:, np.mod(k[ok], nfft)] = g.values[rows[ok], lo:hi].T
        plan.spectra = np.fft.fft(buf, axis=-1)
        plan.lo = lo
        return plan

    def apply(self, f: GridFunction, workers: int = 1) -> GridFunction:
        if f.grid != self.grid:
            raise ValueError("plan was built for a different grid")
        if self.mode == "direct":
            return twisted_conv_direct(f, GridFunction(self.kernel_grid, self.spectra))
        return _fast_apply(self, f, workers)


def _fast_apply(plan: ConvPlan, f: GridFunction, workers: int) -> GridFunction:
    G = plan.grid
    M, h, nfft = G.M, G.h, plan.nfft
    Mg = plan.kernel_grid.M
    ax = G.axis()
    F = f.values
    cols = np.flatnonzero(np.any(F != 0, axis=0))
    out = np.zeros((M, M), dtype=complex)
    if cols.size == 0:
        return GridFunction(G, out)
    rows_c = np.flatnonzero(np.any(F != 0, axis=1))
    c0, c1 = rows_c[0], rows_c[-1] + 1
    Fs = F[c0:c1, cols].T  # (b, c)
    vc = ax[c0:c1]
    # exp(-(i/2) x_i v'_b), indexed [b, i]
    out_mod = np.exp(-0.5j * np.outer(ax[cols], ax))
    nspec = plan.spectra.shape[0]
    batch = max(1, _FAST_BATCH // (cols.size * nfft))

    def do_rows(a_rows):
        a = np.asarray(a_rows)
        A = np.zeros((a.size, cols.size, nfft), dtype=complex)
        A[:, :, c0:c1] = Fs[None, :, :] * np.exp(0.5j * np.outer(ax[a], vc))[:, None, :]
        A = np.fft.fft(A, axis=-1)
        e = a[:, None] - cols[None, :] + Mg // 2 - plan.lo
        ok = (e >= 0) & (e < nspec)
        A *= np.where(ok[..., None], plan.spectra[np.clip(e, 0, nspec - 1)], 0.0)
        C = np.fft.ifft(A, axis=-1)[:, :, :M]
        C *= out_mod[None, :, :]
        return a, C.sum(axis=1)

    batches = [list(range(s, min(M, s + batch))) for s in range(0, M, batch)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(do_rows, batches))
    else:
        results = [do_rows(b) for b in batches]
    for a, vals in results:
        out[:, a] = vals.T
    return GridFunction(G, out * h * h)


def twisted_conv_fast(f: GridFunction, g: GridFunction, workers: int = 1) -> GridFunction:
    """Chirp-factorized twisted convolution, O(M^3 log M) for n = 1.

    With z = x + iy and w = v + iv', Im(z . conj(w)) = y v - x v'.  For each output
    row y and source column v', the v-sum is an ordinary 1-D convolution of
    f(., v') exp((i/2) y v) against g(., y - v'), done by zero-padded FFT; the outer
    v' sum carries exp(-(i/2) x v').
    """
    _check_pair(f, g)
    return ConvPlan.build(f.grid, g, "fast").apply(f, workers)


def twisted_conv(f: GridFunction, g: GridFunction, mode: str = "auto",
                 workers: int = 1) -> GridFunction:
    if mode == "direct":
        return twisted_conv_direct(f, g)
    if mode not in ("auto", "fast"):
        raise ValueError(f"unknown mode {mode!r}")
    return twisted_conv_fast(f, g, workers)


def phi_norm(k: int, n: int) -> float:
    """L^2 norm of the k-th Laguerre function on C^n: (2 pi)^n C(k+n-1, k)."""
    return math.sqrt((2 * math.pi) ** n * math.comb(k + n - 1, k))


def kernel_tail_bound(m, basis, k_stop: int | None = None) -> float:
    """Heuristic bound sum_{k > K_max} |m(2k+n)| ||phi_k||_2 h^{-n} on the neglected tail."""
    n, K = basis.n, basis.K_max
    k_stop = k_stop or max(4 * (K + 1), 256)
    ks = np.arange(K + 1, k_stop + 1)
    vals = np.abs(m.on_spectrum(2 * ks + n))
    norms = np.array([phi_norm(int(k), n) for k in ks])
    return float(np.sum(vals * norms) * basis.grid.h ** (-n))


def multiplier_kernel(m, basis, warn_ratio: float = 1e-6) -> GridFunction:
    """K_m = (2 pi)^{-n} sum_{k <= K_max} m(2k+n) phi_k, so that m(L) f = f x K_m."""
    n = basis.n
    mk = np.asarray(m.on_spectrum(basis.eigenvalues), dtype=complex)
    acc = np.zeros(basis.grid.shape, dtype=complex)
    for c, phi in zip(mk, basis.phi):
        if c != 0:
            acc += c * phi.values
    acc *= (2 * math.pi) ** (-n)
    K = GridFunction(basis.grid, acc)
    tail = kernel_tail_bound(m, basis)
    norm = math.sqrt(np.sum(np.abs(acc) ** 2) * basis.grid.cell_volume)
    if tail > warn_ratio * max(norm, 1e-300) and tail > 0:
        log.warning("multiplier tail bound %.3g exceeds %.0e of the kernel norm %.3g",
                    tail, warn_ratio, norm)
    return K


def laguerre_sum_radial(coef, n: int, r2) -> np.ndarray:
    """sum_k coef[k] phi_k at squared radii r2, by one ascending pass of the recurrence
    for exp(-x/2) L_k^{n-1}(x), x = r2 / 2 (these stay bounded, so no rescaling)."""
    x = np.asarray(r2, dtype=float) / 2
    coef = np.asarray(coef, dtype=complex)
    alpha = n - 1
    prev = np.exp(-x / 2)
    acc = coef[0] * prev
    if coef.size > 1:
        cur = (1.0 + alpha - x) * prev
        acc = acc + coef[1] * cur
        for j in range(2, coef.size):
            prev, cur = cur, ((2 * j - 1 + alpha - x) * cur - (j - 1 + alpha) * prev) / j
            acc = acc + coef[j] * cur
    return acc


def radial_multiplier_kernel(m, grid: Grid, K_max: int, n: int | None = None,
                             spline: bool = False, points_per_wave: int = 24) -> GridFunction:
    """K_m on `grid` without storing a basis.

    The exact path runs the Laguerre recurrence over the distinct lattice radii.  With
    spline=True it runs on a radial grid with `points_per_wave` samples per shortest
    wavelength 2 pi / sqrt(2 K_max + n) and interpolates with a cubic spline, which is
    what makes K_max in the thousands affordable.
    """
    n = n or grid.n
    coef = np.asarray(m.on_spectrum(2 * np.arange(K_max + 1) + n), dtype=complex) * (2 * math.pi) ** (-n)
    r2 = grid.radius_sq()
    if not spline:
        uniq, inv = np.unique(np.round(r2 / grid.h ** 2).astype(np.int64), return_inverse=True)
        vals = laguerre_sum_radial(coef, n, uniq * grid.h ** 2)[inv].reshape(grid.shape)
        return GridFunction(grid, vals)
    from scipy.interpolate import CubicSpline

    rmax = math.sqrt(float(r2.max()))
    dr = 2 * math.pi / (points_per_wave * math.sqrt(2 * K_max + n))
    rho = np.linspace(0.0, rmax, int(math.ceil(rmax / dr)) + 2)
    prof = laguerre_sum_radial(coef, n, rho * rho)
    bc = ((1, 0.0), "not-a-knot")
    r = np.sqrt(r2)
    vals = CubicSpline(rho, prof.real, bc_type=bc)(r) + 1j * CubicSpline(rho, prof.imag, bc_type=bc)(r)
    return GridFunction(grid, vals)
