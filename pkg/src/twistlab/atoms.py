"""Atoms with twisted moment cancellation and the modulated polynomial projection.

The moments of an atom are taken against the phase omega(z0, z) = exp((i/2) Im(z0 . conj(z)))
of its cube center, so cancellation is twisted rather than Euclidean.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Cube, Grid, GridFunction

MOMENT_RTOL = 1e-8


def n0_of(n: int, p: float) -> int:
    """Cancellation order floor(2n(1/p - 1))."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    return int(math.floor(2 * n * (1.0 / p - 1.0) + 1e-9))


def monomial_exponents(dim: int, degree: int) -> list:
    """Exponent tuples of all monomials of total degree <= degree, graded order."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), d):
            e = [0] * dim
            for c in combo:
                e[c] += 1
            out.append(tuple(e))
    return out


def complex_exponents(n: int, degree: int) -> list:
    """Pairs (alpha, beta) of multi-indices in N^n with |alpha| + |beta| <= degree."""
    return [(e[:n], e[n:]) for e in monomial_exponents(2 * n, degree)]


def omega(grid: Grid, center, mask=None) -> np.ndarray:
    """exp((i/2) Im(z0 . conj(z))) on the grid (or on the masked points)."""
    c = np.atleast_1d(np.asarray(center, dtype=complex))
    n = grid.n
    arg = np.zeros(grid.shape)
    coords = grid.coords()
    for j in range(n):
        arg = arg + c[j].imag * coords[j] - c[j].real * coords[n + j]
    w = np.exp(0.5j * arg)
    return w if mask is None else w[mask]


@dataclass
class ProjectionBasis:
    """Orthonormal real polynomials e_k on a cube under (1/|Q|) sum_Q . h^{2n}, built by
    modified Gram-Schmidt (two passes) on monomials in cube-local coordinates.

    `phase_center` defaults to the cube center; the modulated family is
    h_k = e_k exp(-(i/2) Im(phase_center . conj(w))).
    """
    grid: Grid
    cube: Cube
    degree: int
    phase_center: tuple | None = None
    mask: np.ndarray = field(init=False, repr=False)
    e: np.ndarray = field(init=False, repr=False)  # (J, points in Q)
    exponents: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.cube.n != self.grid.n:
            raise ValueError("cube and grid dimensions differ")
        if self.phase_center is None:
            self.phase_center = self.cube.center
        self.mask = self.cube.mask(self.grid)
        npts = int(self.mask.sum())
        self.exponents = monomial_exponents(self.grid.dim, self.degree)
        if npts < 2 * len(self.exponents):
            raise ValueError("cube holds too few samples for the polynomial degree")
        half = self.cube.side / 2
        local = [(c - c0) / half for c, c0 in zip(self.grid.coords(), self.cube.real_center())]
        local = [np.broadcast_to(t, self.grid.shape)[self.mask] for t in local]
        V = np.array([np.prod([t ** k for t, k in zip(local, ex)], axis=0) for ex in self.exponents])
        basis = []
        for v in V:
            u = v.astype(float).copy()
            for _ in range(2):
                for b in basis:
                    u -= self._ip(u, b) * b
            nrm = math.sqrt(self._ip(u, u))
            if nrm < 1e-10 * math.sqrt(self._ip(v, v)):
                raise ValueError("Gram-Schmidt breakdown: cube too coarse for the degree")
            basis.append(u / nrm)
        self.e = np.array(basis)

    def _ip(self, u, v) -> float:
        return float(np.dot(u, v)) / u.size

    @property
    def J(self) -> int:
        return self.e.shape[0]

    def gram(self) -> np.ndarray:
        return (self.e @ self.e.T) / self.e.shape[1]

    def modulation(self) -> np.ndarray:
        """exp(-(i/2) Im(phase_center . conj(w))) at the cube samples."""
        return np.conj(omega(self.grid, self.phase_center, self.mask))

    def h(self, k: int) -> GridFunction:
        out = np.zeros(self.grid.shape, dtype=complex)
        out[self.mask] = self.e[k] * self.modulation()
        return GridFunction(self.grid, out)


def projection_PiQ(f: GridFunction, basis: ProjectionBasis) -> GridFunction:
    """sum_k (f, h_k)_Q e_k exp(-(i/2) Im(z0 . conj(z))) chi_Q(z)."""
    if f.grid != basis.grid:
        raise ValueError("basis was built on a different grid")
    mod = basis.modulation()
    vals = f.values[basis.mask]
    coef = (basis.e @ (vals * np.conj(mod))) / vals.size
    out = np.zeros(f.grid.shape, dtype=complex)
    out[basis.mask] = (coef @ basis.e) * mod
    return GridFunction(f.grid, out)


def projection_split(f: GridFunction, Q: Cube, N0: int, basis: ProjectionBasis | None = None):
    """f = a + b with b = Pi_Q f (twisted moments of a up to degree N0 vanish)."""
    basis = basis or ProjectionBasis(f.grid, Q, N0)
    b = projection_PiQ(f, basis)
    return f - b, b


def twisted_moment(f: GridFunction, center, alpha, beta) -> complex:
    """int f(z) z^alpha conj(z)^beta omega(center, z) dz (midpoint rule)."""
    g = f.grid
    n = g.n
    coords = g.coords()
    mono = np.ones(g.shape, dtype=complex)
    for j in range(n):
        z = coords[j] + 1j * coords[n + j]
        mono = mono * z ** alpha[j] * np.conj(z) ** beta[j]
    return complex(np.sum(f.values * mono * omega(g, center)) * g.cell_volume)


@dataclass
class Atom:
    f: GridFunction
    cube: Cube
    p: float
    sigma: float
    N0: int

    @property
    def r(self) -> float:
        return self.cube.side


def bump1d(t):
    """exp(1 - 1/(1 - t^2)) on |t| < 1, zero elsewhere; equals 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t * t, 1.0)), 0.0)


def seed_profile(grid: Grid, cube: Cube, seed: int = 0) -> GridFunction:
    """Smooth bump on the cube with a seeded smooth complex perturbation."""
    rng = np.random.default_rng(seed)
    half = cube.side / 2
    local = [(c - c0) / half for c, c0 in zip(grid.coords(), cube.real_center())]
    g = np.ones(grid.shape, dtype=complex)
    for t in local:
        g = g * bump1d(t)
    pert = np.ones(grid.shape, dtype=complex)
    for t in local:
        a, b = rng.normal(size=2) * 0.4
        pert = pert + (a + 1j * b) * t + 0.2 * rng.normal() * t * t
    return GridFunction(grid, g * pert)


def make_atom(grid: Grid, z0, r: float, p: float, sigma: float, seed=0) -> Atom:
    """a = c (g - Pi_Q g) for r < sigma, a = c g otherwise, with sup|a| = r^{-2n/p}.

    `seed` is an int (seeded profile) or a GridFunction used as g.
    """
    if r < 8 * grid.h:
        raise ValueError(f"cube side {r} is below 8 grid spacings ({8 * grid.h})")
    cube = Cube(z0, r)
    N0 = n0_of(grid.n, p)
    g = seed if isinstance(seed, GridFunction) else seed_profile(grid, cube, seed)
    g = GridFunction(grid, np.where(cube.mask(grid), g.values, 0.0))
    if r < sigma:
        g, _ = projection_split(g, cube, N0)
    peak = float(np.max(np.abs(g.values)))
    if peak == 0:
        raise ValueError("seed profile vanishes on the cube")
    f = g * (r ** (-2 * grid.n / p) / peak)
    return Atom(f, cube, p, sigma, N0)


def moment_tolerance(n: int, r: float, p: float, order: int) -> float:
    return MOMENT_RTOL * r ** (2 * n + order - 2 * n / p)


@dataclass
class ValidationReport:
    support_leak: float
    sup_ratio: float
    moments: list
    degenerate: bool = False

    @property
    def support_ok(self) -> bool:
        return self.support_leak < 1e-14

    @property
    def sup_ok(self) -> bool:
        return self.sup_ratio <= 1 + 1e-12

    @property
    def moments_ok(self) -> bool:
        return all(abs(v) < tol for _, _, v, tol in self.moments)

    @property
    def passed(self) -> bool:
        return self.support_ok and self.sup_ok and self.moments_ok

    def worst_moment_ratio(self) -> float:
        return max((abs(v) / tol for _, _, v, tol in self.moments), default=0.0)


def validate_atom(a: Atom) -> ValidationReport:
    f, cube, n = a.f, a.cube, a.f.grid.n
    mask = cube.mask(f.grid)
    absf = np.abs(f.values)
    leak = float(np.max(absf[~mask], initial=0.0))
    peak = float(np.max(absf, initial=0.0))
    degenerate = peak == 0.0
    sup_ratio = peak / a.r ** (-2 * n / a.p)
    moments = []
    if a.r < a.sigma:
        for alpha, beta in complex_exponents(n, a.N0):
            val = twisted_moment(f, cube.center, alpha, beta)
            moments.append((alpha, beta, val, moment_tolerance(n, a.r, a.p, sum(alpha) + sum(beta))))
    return ValidationReport(leak, sup_ratio, moments, degenerate)


def cancelled_profile(grid: Grid, cube: Cube, theta, degree: int, seed: int = 0, p: float = 0.5) -> GridFunction:
    """A profile on the cube whose twisted moments about `theta` vanish up to `degree`,
    sup-normalized to r^{-2n/p}."""
    g = seed_profile(grid, cube, seed)
    basis = ProjectionBasis(grid, cube, degree, phase_center=tuple(np.atleast_1d(theta)))
    f = g - projection_PiQ(g, basis)
    return f * (cube.side ** (-2 * grid.n / p) / float(np.max(np.abs(f.values))))
