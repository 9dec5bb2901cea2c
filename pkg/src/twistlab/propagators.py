"""Heat and Schrödinger kernels, spectral multipliers, the wave operator, dyadic pieces.

All times here are plain: heat_apply(f, t) is exp(-t L) f.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import Grid, GridFunction, sample_radial
from .laguerre import LaguerreBasis
from .twisted_conv import multiplier_kernel, twisted_conv

log = logging.getLogger(__name__)

SIN_GUARD = 1e-8


# ---------------------------------------------------------------------------
# dyadic partition of unity in sqrt(lambda)

BUMP_SUPPORT = (0.25, 4.0)


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def bump(y, support=BUMP_SUPPORT):
    """Smooth even-in-log bump, positive exactly on the open interval `support`."""
    y = np.asarray(y, dtype=float)
    lo, hi = np.log2(support[0]), np.log2(support[1])
    with np.errstate(divide="ignore"):
        u = np.where(y > 0, np.log2(np.where(y > 0, y, 1.0)), -np.inf)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    s = np.abs(u - mid) / half
    return np.where(np.isfinite(u), _smooth_step(2.0 * (1.0 - s)), 0.0)


def partition_piece(y, support=BUMP_SUPPORT):
    """phi(y) = bump(y) / sum_{i in Z} bump(2^{-i} y).  Sums to 1 over all dyadic shifts."""
    y = np.asarray(y, dtype=float)
    span = int(math.ceil(math.log2(support[1] / support[0]))) + 1
    den = np.zeros_like(y)
    for i in range(-span, span + 1):
        den = den + bump(y * 2.0 ** (-i), support)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, bump(y, support) / np.where(den > 0, den, 1.0), 0.0)


def dyadic_weight(j: int, y, support=BUMP_SUPPORT):
    """Weight of band j at sqrt(lambda) = y.  Band 0 absorbs every lower shift."""
    y = np.asarray(y, dtype=float)
    if j > 0:
        return partition_piece(y * 2.0 ** (-j), support)
    if j < 0:
        return np.zeros_like(y)
    # 1 - sum_{i >= 1} phi(2^{-i} y); terms with 2^{-i} y below the support vanish
    acc = np.zeros_like(y)
    top = int(math.ceil(math.log2(max(float(np.max(y, initial=1.0)), 1.0) / support[0]))) + 1
    for i in range(1, top + 1):
        acc = acc + partition_piece(y * 2.0 ** (-i), support)
    return 1.0 - acc


@dataclass(frozen=True)
class MultiplierSpec:
    """A symbol lambda -> m(lambda) on [n, inf), optionally restricted to dyadic band j."""
    symbol: Callable = field(compare=False)
    band: int | None = None
    name: str = ""

    def on_spectrum(self, lam):
        lam = np.asarray(lam, dtype=float)
        vals = np.asarray(self.symbol(lam), dtype=complex) * np.ones_like(lam)
        if self.band is not None:
            vals = vals * dyadic_weight(self.band, np.sqrt(lam))
        return vals

    __call__ = on_spectrum


def dyadic_piece(m: MultiplierSpec, j: int, K_max: int | None = None, n: int = 1) -> MultiplierSpec:
    """m_j(lambda) = m(lambda) phi_j(sqrt(lambda)).  Band j lives in sqrt(lambda) in [2^{j-2}, 2^{j+2}]."""
    if j < 0:
        raise ValueError("j must be >= 0")
    if m.band is not None:
        raise ValueError("multiplier is already restricted to a band")
    if K_max is not None and 2 ** (j - 2) > math.sqrt(2 * K_max + n):
        log.warning("band %d lies above the truncated spectrum (K_max=%d); piece is zero", j, K_max)
    return replace(m, band=j, name=f"{m.name}[j={j}]")


def delta_critical(n: int, p: float) -> float:
    """Critical smoothing order (2n - 1)(1/p - 1/2)."""
    return (2 * n - 1) * (1.0 / p - 0.5)


# ---------------------------------------------------------------------------
# closed-form kernels


@dataclass(frozen=True)
class HeatKernelParams:
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValueError("heat time must be finite and positive")
        if self.t < 1e-6:
            raise ValueError("heat time below 1e-6 concentrates below any grid resolution")


@dataclass(frozen=True)
class SchrodingerKernelParams:
    s: float

    def __post_init__(self):
        if not math.isfinite(self.s) or abs(math.sin(self.s)) <= SIN_GUARD:
            raise ValueError(f"Schrödinger time {self.s} is singular (sin s ~ 0)")


def _log_sinh(t: float) -> float:
    return t + math.log1p(-math.exp(-2 * t)) - math.log(2.0)


def heat_kernel_radial(t: float, n: int, r2):
    """(4 pi)^{-n} sinh(t)^{-n} exp(-coth(t) |z|^2 / 4)."""
    HeatKernelParams(t)
    coth = 1.0 / math.tanh(t)
    logc = -n * math.log(4 * math.pi) - n * _log_sinh(t)
    return np.exp(logc - 0.25 * coth * np.asarray(r2, dtype=float))


def heat_kernel(t: float, grid: Grid) -> GridFunction:
    return sample_radial(grid, lambda r2: heat_kernel_radial(t, grid.n, r2))


def schrodinger_kernel_radial(s: float, n: int, r2):
    """Kernel of exp(i s L): (i / (4 pi sin s))^n exp(-(i/4) cot(s) |z|^2)."""
    SchrodingerKernelParams(s)
    c = (1j / (4 * math.pi * math.sin(s))) ** n
    return c * np.exp(-0.25j * (math.cos(s) / math.sin(s)) * np.asarray(r2, dtype=float))


def resolvable_radius(s: float, h: float) -> float:
    """Radius at which the kernel chirp reaches the lattice Nyquist frequency."""
    cot = abs(math.cos(s) / math.sin(s))
    return math.inf if cot == 0 else 2 * math.pi / (h * cot)


def schrodinger_kernel(s: float, grid: Grid, window: bool = True) -> GridFunction:
    """Samples of the Schrödinger kernel.

    Beyond the resolvable radius R the sampled chirp aliases and the twisted
    convolution picks up ghost copies of its input.  With window=True the kernel is
    rolled off smoothly between 0.6 R and R; the discarded region carries no
    stationary point for inputs resolved by the grid.
    """
    R = resolvable_radius(s, grid.h)

    def radial(r2):
        k = schrodinger_kernel_radial(s, grid.n, r2)
        if window and math.isfinite(R):
            k = k * (1.0 - _smooth_step((np.sqrt(r2) / R - 0.6) / 0.4))
        return k

    return sample_radial(grid, radial)


# ---------------------------------------------------------------------------
# application


def multiplier_apply(f: GridFunction, m: MultiplierSpec, basis: LaguerreBasis,
                     workers: int = 1) -> GridFunction:
    """(2 pi)^{-n} sum_{k <= K_max} m(2k+n) f x phi_k, as one convolution with the summed kernel."""
    return twisted_conv(f, multiplier_kernel(m, basis), workers=workers)


def heat_apply(f: GridFunction, t: float, route: str = "kernel", basis: LaguerreBasis | None = None,
               workers: int = 1, factor: int = 2) -> GridFunction:
    HeatKernelParams(t)
    if route == "kernel":
        return twisted_conv(f, heat_kernel(t, f.grid.extended(factor)), workers=workers)
    if route == "spectral":
        if basis is None:
            raise ValueError("spectral route needs a LaguerreBasis")
        return multiplier_apply(f, MultiplierSpec(lambda lam: np.exp(-t * lam), name="heat"), basis, workers)
    raise ValueError(f"unknown route {route!r}")


def schrodinger_apply(f: GridFunction, s: float, workers: int = 1, factor: int = 2) -> GridFunction:
    """exp(i s L) f by twisted convolution with the closed-form kernel."""
    return twisted_conv(f, schrodinger_kernel(s, f.grid.extended(factor)), workers=workers)


def wave_multiplier(delta: float, t: float = 1.0) -> MultiplierSpec:
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return MultiplierSpec(lambda lam: lam ** (-delta / 2) * np.exp(1j * t * np.sqrt(lam)),
                          name=f"wave(delta={delta},t={t})")


def wave_apply(f: GridFunction, delta: float, t: float = 1.0, basis: LaguerreBasis | None = None,
               workers: int = 1) -> GridFunction:
    """L^{-delta/2} exp(i t sqrt(L)) f through the truncated spectral sum."""
    if not t > 0:
        raise ValueError("t must be positive")
    if basis is None:
        raise ValueError("wave_apply needs a LaguerreBasis")
    return multiplier_apply(f, wave_multiplier(delta, t), basis, workers)
