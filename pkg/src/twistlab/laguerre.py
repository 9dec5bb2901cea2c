"""Laguerre functions phi_k, the spectral resolution of the twisted Laplacian, Parseval."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction, lp_norm, sample_radial
from .twisted_conv import ConvPlan, twisted_conv

log = logging.getLogger(__name__)

K_LIMIT = 256


def _check_order(k: int, alpha: float):
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > K_LIMIT:
        raise ValueError(f"k > {K_LIMIT} is outside the validated range")
    if alpha <= -1:
        raise ValueError("alpha must exceed -1")


def laguerre_polynomial(k: int, alpha: float, x):
    """L_k^alpha(x) by the ascending three-term recurrence.

    Returns a float for scalar x, an array otherwise.
    """
    _check_order(k, alpha)
    xa = np.asarray(x, dtype=float)
    prev = np.ones_like(xa)
    if k == 0:
        return prev if xa.ndim else float(prev)
    cur = 1.0 + alpha - xa
    for j in range(2, k + 1):
        prev, cur = cur, ((2 * j - 1 + alpha - xa) * cur - (j - 1 + alpha) * prev) / j
    return cur if xa.ndim else float(cur)


def _laguerre_scaled(k: int, alpha: float, x: np.ndarray) -> tuple:
    """L_k^alpha(x) = mant * exp(log_scale), rescaling the recurrence so nothing overflows."""
    _check_order(k, alpha)
    prev = np.ones_like(x)
    log_scale = np.zeros_like(x)
    if k == 0:
        return prev, log_scale
    cur = 1.0 + alpha - x
    for j in range(2, k + 1):
        prev, cur = cur, ((2 * j - 1 + alpha - x) * cur - (j - 1 + alpha) * prev) / j
        big = np.abs(cur) > 1e100
        if np.any(big):
            prev = np.where(big, prev * 1e-100, prev)
            cur = np.where(big, cur * 1e-100, cur)
            log_scale = log_scale + np.where(big, 100 * math.log(10), 0.0)
    return cur, log_scale


def laguerre_function_radial(k: int, n: int, r2):
    """phi_k as a function of |z|^2: L_k^{n-1}(|z|^2/2) exp(-|z|^2/4).

    The recurrence carries a separate log scale, so large |z| underflows cleanly to 0
    instead of passing through inf.
    """
    r2 = np.asarray(r2, dtype=float)
    mant, log_scale = _laguerre_scaled(k, n - 1, r2 / 2)
    with np.errstate(under="ignore"):
        return mant * np.exp(log_scale - r2 / 4)


def phi_k(k: int, grid: Grid) -> GridFunction:
    return sample_radial(grid, lambda r2: laguerre_function_radial(k, grid.n, r2))


@dataclass
class LaguerreBasis:
    """phi_0..phi_{K_max} sampled on a kernel grid (usually the doubled output grid)."""
    n: int
    K_max: int
    grid: Grid
    phi: list = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.eigenvalues is None:
            self.eigenvalues = 2 * np.arange(self.K_max + 1) + self.n
        if len(self.phi) != self.K_max + 1:
            raise ValueError("basis needs K_max + 1 functions")

    def plan(self, k: int, grid: Grid) -> ConvPlan:
        return ConvPlan.build(grid, self.phi[k], "fast")


def build_basis(grid: Grid, K_max: int = 32, factor: int = 2, cache: bool = False) -> LaguerreBasis:
    """Sample phi_k on `grid.extended(factor)`; optionally via the on-disk cache."""
    if K_max > K_LIMIT:
        raise ValueError(f"K_max > {K_LIMIT} is outside the validated range")
    kgrid = grid.extended(factor) if factor > 1 else grid
    if cache:
        from .io import load_basis, save_basis
        root = cache_dir()
        try:
            b = load_basis(root, kgrid, K_max)
            if b is not None:
                return b
        except (OSError, ValueError) as exc:
            log.warning("ignoring unreadable basis cache in %s: %s", root, exc)
    b = LaguerreBasis(grid.n, K_max, kgrid, [phi_k(k, kgrid) for k in range(K_max + 1)])
    if cache:
        save_basis(b, cache_dir())
    return b


def cache_dir() -> Path:
    return Path(os.environ.get("TWISTLAB_CACHE", Path.home() / ".cache" / "twistlab"))


def spectral_project(f: GridFunction, k: int, basis: LaguerreBasis, workers: int = 1) -> GridFunction:
    """(2 pi)^{-n} f x phi_k."""
    return twisted_conv(f, basis.phi[k], workers=workers) * (2 * math.pi) ** (-basis.n)


def parseval_check(f: GridFunction, basis: LaguerreBasis, workers: int = 1):
    """Returns (int |f|^2, (2 pi)^{-2n} sum_{k <= K_max} int |f x phi_k|^2)."""
    lhs = lp_norm(f, 2) ** 2
    if lhs == 0:
        return 0.0, 0.0
    terms = [lp_norm(twisted_conv(f, basis.phi[k], workers=workers), 2) ** 2
             for k in range(basis.K_max + 1)]
    rhs = math.fsum(terms) * (2 * math.pi) ** (-2 * basis.n)
    return lhs, rhs
