"""Subordination of the localized half-wave symbol to Schrödinger symbols.

For a bump chi and tau >= 1 we construct a_tau and Psi_tau with

    chi(sqrt(x)/tau) e^{i sqrt(x)} = sqrt(tau) int e^{i tau/4s} a_tau(s) e^{i s x/tau} ds + Psi_tau(x/tau^2).

Writing x = tau^2 u, the right-hand integral is a Fourier integral in s, so the
amplitude comes from Fourier inversion of F(u) = chi(sqrt(u)) e^{i tau sqrt(u)}:

    A(s) = (tau/2pi) int F(u) e^{-i tau s u} du,   a_tau(s) = cutoff(s) e^{-i tau/4s} A(s) / sqrt(tau).

A has a single stationary point at u = 1/(4 s^2) with phase tau/(4s), so a_tau is
smooth and of size independent of tau.  Psi_tau is whatever the cutoff leaves behind.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.chebyshev import chebval

from .grid import Grid, GridFunction
from .propagators import MultiplierSpec, _smooth_step, multiplier_apply, partition_piece
from .twisted_conv import multiplier_kernel, radial_multiplier_kernel, twisted_conv

log = logging.getLogger(__name__)

S_GRID = (1 / 32, 8.0)
A_SUPPORT = (1 / 16, 4.0)
A_FLAT = (3 / 32, 3.0)
PSI_TABLE = (1 / 64, 8.0)
GL_NODES = 16


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def phase_panels(a: float, b: float, rate: Callable, max_phase: float = math.pi,
                 nodes: int = GL_NODES, min_nodes: int = 0):
    """Composite Gauss-Legendre rule on [a, b] whose panels each carry at most
    `max_phase` radians of the oscillation bound `rate` (a vectorized |phase'|)."""
    fine = np.linspace(a, b, 4097)
    r = np.abs(rate(fine)) + 1e-12
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (r[1:] + r[:-1]) * np.diff(fine))])
    npan = max(1, int(math.ceil(cum[-1] / max_phase)), int(math.ceil(min_nodes / nodes)))
    edges = np.interp(np.linspace(0, cum[-1], npan + 1), cum, fine)
    edges[0], edges[-1] = a, b
    x, w = _gauss(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def a_cutoff(s):
    """1 on [3/32, 3], 0 outside [1/16, 4], smooth in between."""
    s = np.asarray(s, dtype=float)
    up = _smooth_step((s - A_SUPPORT[0]) / (A_FLAT[0] - A_SUPPORT[0]))
    down = 1.0 - _smooth_step((s - A_FLAT[1]) / (A_SUPPORT[1] - A_FLAT[1]))
    return up * down


CHI_WIDTH = 0.18


def default_chi(y):
    """Smooth bump supported on [1/2, 2]: a Gaussian in log2(y) of width 0.18 times the
    standard bump exp(1 - 1/(1 - u^2)), u = log2(y).

    The narrow Gaussian factor keeps the Fourier tails of chi, and hence the residual
    floor of K_j away from the light cone, small.
    """
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(y > 0, np.log2(np.where(y > 0, y, 1.0)), np.inf)
        inside = np.abs(u) < 1
        uu = np.where(inside, u * u, 0.0)
        return np.where(inside, np.exp(-uu / (2 * CHI_WIDTH ** 2) + 1.0 - 1.0 / (1.0 - uu)), 0.0)


def wave_chi(delta: float):
    """chi(y) = y^{-delta} phi(y) with phi the dyadic partition piece on [1/4, 4]."""
    def chi(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0, partition_piece(y) * np.where(y > 0, y, 1.0) ** (-delta), 0.0)
    chi.support = (0.25, 4.0)
    return chi


def _chi_support(chi):
    return getattr(chi, "support", (0.5, 2.0))


@dataclass
class SubordinationData:
    tau: float
    chi: Callable = field(repr=False)
    s_grid: np.ndarray = field(repr=False)
    a_tau: np.ndarray = field(repr=False)
    budget: int = 1
    v_nodes: int = 0
    support: tuple = A_SUPPORT
    cheb: np.ndarray = field(repr=False, default=None)
    psi_u: np.ndarray = field(repr=False, default=None)
    psi_table: np.ndarray = field(repr=False, default=None)

    def a(self, s):
        """a_tau from its Chebyshev interpolant on the effective support, zero outside."""
        s = np.asarray(s, dtype=float)
        lo, hi = self.support
        inside = (s >= lo) & (s <= hi)
        x = (2 * np.clip(s, lo, hi) - lo - hi) / (hi - lo)
        return np.where(inside, chebval(x, self.cheb), 0.0)

    def symbol(self, u):
        """chi(sqrt(u)) e^{i tau sqrt(u)}, the localized wave symbol at x = tau^2 u."""
        u = np.asarray(u, dtype=float)
        r = np.sqrt(np.maximum(u, 0.0))
        return self.chi(r) * np.exp(1j * self.tau * r)

    def reconstruct(self, u, budget: int | None = None):
        """sqrt(tau) int e^{i tau/4s} a(s) e^{i tau s u} ds by phase-adaptive quadrature."""
        budget = budget or self.budget
        u = np.atleast_1d(np.asarray(u, dtype=float))
        tau = self.tau
        umax = float(np.max(np.abs(u)))
        s, w = phase_panels(*self.support, lambda s: tau * (umax + 0.25 / s ** 2),
                            max_phase=math.pi / budget, min_nodes=64 * int(math.ceil(tau)))
        amp = w * self.a(s) * np.exp(0.25j * tau / s)
        out = np.empty(u.shape, dtype=complex)
        step = max(1, (1 << 22) // s.size)
        for i in range(0, u.size, step):
            out[i:i + step] = np.exp(1j * tau * np.outer(u[i:i + step], s)) @ amp
        return math.sqrt(tau) * out

    def psi(self, u, budget: int | None = None):
        """Psi_tau(u) = symbol(u) - reconstruct(u)."""
        return self.symbol(u) - self.reconstruct(u, budget)

    def summary(self) -> dict:
        return {"tau": self.tau, "sup_a": float(np.max(np.abs(self.a_tau))),
                "sup_psi": float(np.max(np.abs(self.psi_table))) if self.psi_table is not None else None,
                "budget": self.budget, "v_nodes": self.v_nodes, "support": list(self.support)}


def _amplitude(chi, tau: float, s: np.ndarray, budget: int):
    """cutoff(s) A(s) e^{-i tau/4s} / sqrt(tau)."""
    lo, hi = _chi_support(chi)
    smax = float(np.max(s))
    # u = v^2: A(s) = (tau/2pi) int chi(v) 2v e^{i tau (v - s v^2)} dv
    v, w = phase_panels(lo, hi, lambda v: tau * (1.0 + 2.0 * smax * v),
                        max_phase=math.pi / budget, min_nodes=32 * int(math.ceil(tau)) * budget)
    amp = w * chi(v) * 2.0 * v * np.exp(1j * tau * v)
    out = np.empty(s.shape, dtype=complex)
    step = max(1, (1 << 22) // v.size)
    for i in range(0, s.size, step):
        out[i:i + step] = np.exp(-1j * tau * np.outer(s[i:i + step], v * v)) @ amp
    A = tau / (2 * math.pi) * out
    return a_cutoff(s) * A * np.exp(-0.25j * tau / s) / math.sqrt(tau), v.size


def _effective_support(chi, tau: float, eps: float = 1e-16) -> tuple:
    s = np.geomspace(*A_SUPPORT, 1025)
    a, _ = _amplitude(chi, tau, s, 1)
    big = np.flatnonzero(np.abs(a) > eps * np.max(np.abs(a)))
    return float(s[max(big[0] - 1, 0)]), float(s[min(big[-1] + 1, s.size - 1)])


def compute_a_tau(chi: Callable | None = None, tau: float = 16.0, budget: int = 1,
                  n_s: int = 2048, psi_points: int | None = None, tol: float = 1e-12) -> SubordinationData:
    """Build a_tau and tabulate Psi_tau on [1/64, 8].

    a_tau is evaluated by Fourier inversion at Chebyshev points of its effective
    support (where it exceeds 1e-16 of its max) and kept as a Chebyshev series; the
    degree doubles until the trailing coefficients fall below `tol` relative.
    """
    if not tau >= 1:
        raise ValueError("tau must be >= 1")
    chi = chi or default_chi
    lo, hi = _effective_support(chi, tau)
    deg = 128
    while True:
        x = np.cos(np.pi * (np.arange(deg) + 0.5) / deg)
        vals, nv = _amplitude(chi, tau, 0.5 * (lo + hi) + 0.5 * (hi - lo) * x, budget)
        coef = chebinterpolate_values(x, vals)
        scale = np.max(np.abs(coef))
        if np.max(np.abs(coef[-8:])) < tol * scale or deg >= 8192:
            break
        deg *= 2
    if np.max(np.abs(coef[-8:])) >= tol * scale:
        log.warning("a_tau Chebyshev series not converged at tau=%g (tail %.2e)", tau,
                    np.max(np.abs(coef[-8:])) / scale)
    keep = np.flatnonzero(np.abs(coef) > 1e-3 * tol * scale)
    coef = coef[:keep[-1] + 1]
    s_grid = np.geomspace(*S_GRID, n_s)
    data = SubordinationData(tau, chi, s_grid, None, budget, nv, (lo, hi), coef)
    data.a_tau = data.a(s_grid)
    npsi = psi_points or max(2048, int(48 * tau))
    data.psi_u = np.linspace(*PSI_TABLE, npsi)
    data.psi_table = data.psi(data.psi_u)
    sup_chi = float(np.max(np.abs(chi(np.linspace(0.2, 4.5, 4001)))))
    if np.max(np.abs(data.psi_table)) > sup_chi:
        log.error("subordination construction unstable at tau=%g: sup|Psi| exceeds sup|chi|", tau)
    return data


def chebinterpolate_values(x: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values at first-kind points x."""
    deg = x.size
    k = np.arange(deg)
    T = np.cos(np.outer(k, np.arccos(x)))
    coef = (2.0 / deg) * (T @ vals)
    coef[0] /= 2
    return coef


def subordination_residual(data: SubordinationData, x=None) -> float:
    """max |symbol - reconstruct_refined - Psi| over x in [tau^2/4, 4 tau^2], i.e. the
    change in the decomposition when every quadrature budget is doubled."""
    tau = data.tau
    if x is None:
        x = np.linspace(tau * tau / 4, 4 * tau * tau, 3001)
    u = np.asarray(x, dtype=float) / tau ** 2
    fine = compute_a_tau(data.chi, tau, budget=2 * data.budget, n_s=16, psi_points=16)
    lhs = data.symbol(u)
    return float(np.max(np.abs(lhs - fine.reconstruct(u) - data.psi(u))))


# ---------------------------------------------------------------------------
# the oscillatory kernel K_j


@dataclass
class OscKernel:
    j: int
    r: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    node_count: int = 0
    error: np.ndarray = field(repr=False, default=None)
    flags: np.ndarray = field(repr=False, default=None)

    @property
    def tau(self) -> float:
        return 2.0 ** self.j

    @property
    def error_estimate(self) -> float:
        return float(np.max(self.error)) if self.error is not None else float("nan")

    def __call__(self, rho):
        """Linear-in-value interpolation of K_j at radii rho (zero beyond the grid)."""
        rho = np.asarray(rho, dtype=float)
        re = np.interp(rho, self.r, self.values.real, right=0.0)
        im = np.interp(rho, self.r, self.values.imag, right=0.0)
        return re + 1j * im


def _kj_batch(data: SubordinationData, radii: np.ndarray, n: int, budget: int) -> tuple:
    """K_j at every radius with one shared s-rule.  The phase rate is monotone in
    rho^2, so panels sized for the smallest and largest radius resolve every radius."""
    tau = data.tau
    lo_r2, hi_r2 = float(np.min(radii)) ** 2, float(np.max(radii)) ** 2

    def rate(s):
        inv = 0.25 / (tau * np.sin(s / tau) ** 2)
        base = -0.25 * tau / s ** 2
        return np.maximum(np.abs(base + lo_r2 * inv), np.abs(base + hi_r2 * inv))

    s, w = phase_panels(*data.support, rate, max_phase=math.pi / budget,
                        min_nodes=64 * int(math.ceil(tau)) * budget)
    sin = np.sin(s / tau)
    cot = np.cos(s / tau) / sin
    amp = math.sqrt(tau) * w * data.a(s) * np.exp(0.25j * tau / s) * (1j / (4 * math.pi * sin)) ** n
    out = np.empty(radii.size, dtype=complex)
    step = max(1, (1 << 21) // s.size)
    for i in range(0, radii.size, step):
        r2 = radii[i:i + step] ** 2
        out[i:i + step] = np.exp(-0.25j * np.outer(r2, cot)) @ amp
    return out, s.size


def kernel_Kj(j: int, radii=None, data: SubordinationData | None = None, n: int = 1,
              chi: Callable | None = None, budget: int = 1, refine: bool = True) -> OscKernel:
    """K_j(z) = 2^{j/2} int e^{i 2^j/4s} a_{2^j}(s) k_{s 2^{-j}}(z) ds on a radial grid,
    with k_s the kernel of exp(i s L).  With refine=True every node is recomputed at
    twice the budget; the relative disagreement is the error estimate and nodes above
    1e-5 are flagged."""
    if j > 10:
        raise ValueError("j > 10 is beyond the quadrature budget")
    tau = 2.0 ** j
    data = data or compute_a_tau(chi, tau)
    if radii is None:
        radii = np.linspace(4.0 / 800, 4.0, 800)
    radii = np.asarray(radii, dtype=float)
    vals, nodes = _kj_batch(data, radii, n, budget)
    err = flags = None
    if refine:
        fine, _ = _kj_batch(data, radii, n, 2 * budget)
        scale = max(float(np.max(np.abs(fine))), 1e-300)
        err = np.abs(fine - vals) / scale
        flags = err > 1e-5
    return OscKernel(j, radii, vals, nodes, err, flags)


@dataclass
class DecayReport:
    j: int
    slope: float
    residual: float
    node_budget: int
    flags: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DecayReport":
        return cls(**json.loads(text))


def verify_kernel_decay(K: OscKernel, fit_range=(0.2, 1.0)) -> DecayReport:
    """Least-squares slope of log|K_j| against log(1 + 2^j |1 - |z||) on the fit range."""
    d = np.abs(1.0 - K.r)
    sel = (d >= fit_range[0]) & (d <= fit_range[1])
    mag = np.abs(K.values)
    if not np.any(mag > 0):
        raise ValueError("degenerate kernel: all samples vanish")
    if K.flags is not None and np.mean(K.flags) > 0.1:
        raise ValueError("quadrature flags cover more than 10% of the radial nodes")
    if sel.sum() < 3:
        raise ValueError("fit range holds fewer than 3 radial nodes")
    x = np.log1p(K.tau * d[sel])
    y = np.log(np.maximum(mag[sel], 1e-300))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    nflags = int(np.sum(K.flags)) if K.flags is not None else 0
    return DecayReport(K.j, float(coef[0]), resid, int(K.node_count), nflags)


def radial_to_grid(K: OscKernel, grid: Grid, cutoff: float = 3.0) -> GridFunction:
    """Sample a radial kernel on a lattice, zero beyond `cutoff`."""
    r = np.sqrt(grid.radius_sq())
    vals = np.where(r <= cutoff, K(r), 0.0)
    return GridFunction(grid, vals)


# ---------------------------------------------------------------------------
# remainder kernel and the subordinated wave piece


def psi_multiplier(data: SubordinationData) -> MultiplierSpec:
    tau = data.tau
    return MultiplierSpec(lambda lam: data.psi(np.asarray(lam, dtype=float) / tau ** 2),
                          name=f"psi(tau={tau:g})")


def remainder_kernel(j: int, basis=None, data: SubordinationData | None = None,
                     chi: Callable | None = None, grid: Grid | None = None,
                     K_max: int | None = None) -> GridFunction:
    """K_{j,Psi} = multiplier kernel of lambda -> Psi_{2^j}(2^{-2j} lambda).

    With a basis the sum runs over its K_max + 1 terms.  Without one it is evaluated
    radially on `grid` with K_max terms (default 8 * 4^j, where Psi has decayed)."""
    data = data or compute_a_tau(chi, 2.0 ** j)
    m = psi_multiplier(data)
    if basis is not None:
        return multiplier_kernel(m, basis)
    if grid is None:
        raise ValueError("remainder_kernel needs a basis or a grid")
    return radial_multiplier_kernel(m, grid, K_max or 8 * 4 ** j)


def wave_symbol_piece(delta: float, j: int):
    """m_j(lambda) = lambda^{-delta/2} e^{i sqrt(lambda)} phi_j(sqrt(lambda))."""
    def m(lam):
        lam = np.asarray(lam, dtype=float)
        y = np.sqrt(lam)
        return y ** (-delta) * np.exp(1j * y) * partition_piece(y * 2.0 ** (-j))
    return m


def wave_via_subordination(f: GridFunction, j: int, delta: float = 0.5, basis=None,
                           data: SubordinationData | None = None, kernel: OscKernel | None = None,
                           psi_values: np.ndarray | None = None, workers: int = 1,
                           kernel_radius: float = 6.0) -> GridFunction:
    """2^{-j delta} (T_j f + Psi_{2^j}(2^{-2j} L) f) with T_j f = f x K_j.

    T_j is the s-quadrature of Schrödinger propagators exp(i s 2^{-j} L) weighted by
    2^{j/2} e^{i 2^j/4s} a(s); by linearity it is one twisted convolution with the
    summed kernel K_j, which is what is computed.  The remainder term uses the basis
    when given; otherwise `psi_values` (Psi at the eigenvalues of f) may be supplied
    for eigenfunction inputs, and it is dropped when neither is available.
    """
    if j > 8:
        raise ValueError("j > 8 is beyond the supported range")
    tau = 2.0 ** j
    data = data or compute_a_tau(wave_chi(delta), tau)
    if kernel is None:
        radii = np.linspace(0.0, kernel_radius, int(max(2000, 40 * tau * kernel_radius)) + 1)[1:]
        radii = np.concatenate([[1e-9], radii])
        kernel = kernel_Kj(j, radii, data, n=f.grid.n, refine=False)
    span = int(2 ** math.ceil(math.log2(2 * kernel_radius / f.grid.h + 4)))
    kgrid = f.grid.with_points(max(8, span))
    Tj = twisted_conv(f, radial_to_grid(kernel, kgrid, kernel_radius), workers=workers)
    out = Tj
    if basis is not None:
        out = out + multiplier_apply(f, psi_multiplier(data), basis, workers)
    elif psi_values is not None:
        out = out + f * complex(psi_values)
    return out * tau ** (-delta)
