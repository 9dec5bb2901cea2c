"""Heat, non-tangential, tangential and grand maximal functions on sampled data.

Scales follow the heat-time convention s = t^2: the profile stores heat times s, and
the cone over z at heat time s has aperture sqrt(s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atoms import bump1d
from .grid import Grid, GridFunction, shift_values
from .propagators import heat_apply
from .twisted_conv import twisted_conv

CONE_FRACTIONS = (0.0, 0.25, 0.5, 0.75)
TANGENT_MULTIPLES = (1.0, 2.0, 4.0, 8.0)


def _directions(n: int) -> np.ndarray:
    if n == 1:
        ang = np.arange(8) * math.pi / 4
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    eye = np.eye(2 * n)
    return np.concatenate([eye, -eye])


def lattice_offsets(grid: Grid, radii, strict_below: float | None = None) -> np.ndarray:
    """Integer lattice steps for offsets at the given radii in every direction, rounded
    to the lattice and deduplicated; w = 0 is always first."""
    dirs = _directions(grid.n)
    steps = {tuple([0] * grid.dim)}
    for rho in radii:
        for d in dirs:
            st = tuple(int(v) for v in np.rint(rho * d / grid.h))
            if strict_below is not None and np.linalg.norm(st) * grid.h >= strict_below:
                continue
            steps.add(st)
    out = sorted(steps, key=lambda s: (sum(v * v for v in s), s))
    return np.array(out, dtype=int)


def _derivative_sup(phi_fine: np.ndarray, h: float, order: int) -> float:
    """max over |alpha| <= order of sup |d^alpha phi| by repeated centered differences."""
    best = float(np.max(np.abs(phi_fine)))
    frontier = {(0,) * phi_fine.ndim: phi_fine}
    for _ in range(order):
        nxt = {}
        for key, arr in frontier.items():
            for ax in range(arr.ndim):
                k = list(key)
                k[ax] += 1
                k = tuple(k)
                if k not in nxt:
                    nxt[k] = np.gradient(arr, h, axis=ax, edge_order=2)
                    best = max(best, float(np.max(np.abs(nxt[k]))))
        frontier = nxt
    return best


def _generators(n: int):
    """Twelve test bumps on Q(0, 1) as functions of real coordinates (x_1..x_n, y_1..y_n)."""
    def prod(*c, scale=2.0):
        out = 1.0
        for t in c:
            out = out * bump1d(scale * t)
        return out

    def x(c): return c[0]
    def y(c): return c[n]
    return [
        lambda *c: prod(*c),
        lambda *c: prod(*c) * np.cos(2 * math.pi * x(c)),
        lambda *c: prod(*c) * np.sin(2 * math.pi * x(c)),
        lambda *c: prod(*c) * np.cos(2 * math.pi * y(c)),
        lambda *c: prod(*c) * np.sin(2 * math.pi * (x(c) - y(c))),
        lambda *c: prod(*c) * x(c),
        lambda *c: prod(*c) * y(c),
        lambda *c: prod(*c) * x(c) * y(c),
        lambda *c: bump1d(2 * np.sqrt(sum(t * t for t in c))),
        lambda *c: prod(*c) ** 2,
        lambda *c: prod(*c, scale=4.0),
        lambda *c: prod(*c) * np.cos(2 * math.pi * (x(c) + y(c))),
    ]


@dataclass
class TestBump:
    """phi on Q(0, 1) rescaled so |d^alpha phi| <= 1 for |alpha| <= N."""
    func: object = field(repr=False)
    scale: float
    index: int

    def __call__(self, *coords):
        return self.scale * self.func(*coords)


def build_dictionary(n: int, N: int, fine: int = 129) -> list:
    ax = np.linspace(-0.5, 0.5, fine)
    h = ax[1] - ax[0]
    grids = np.meshgrid(*([ax] * (2 * n)), indexing="ij")
    out = []
    for i, g in enumerate(_generators(n)):
        vals = np.asarray(g(*grids), dtype=float)
        bound = _derivative_sup(vals, h, N)
        out.append(TestBump(g, 1.0 / bound, i))
    return out


@dataclass
class MaximalProfile:
    t_grid: np.ndarray = field(default_factory=lambda: np.geomspace(1e-2, 1e2, 25))
    N: int = 0
    cone_fractions: tuple = CONE_FRACTIONS
    tangent_multiples: tuple = TANGENT_MULTIPLES
    dictionary: list = field(default=None, repr=False)
    n: int = 1

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.size < 25 or t.min() > 1e-2 * (1 + 1e-12) or t.max() < 1e2 * (1 - 1e-12):
            raise ValueError("t_grid must cover [1e-2, 1e2] with at least 25 points")
        self.t_grid = t
        if self.dictionary is None:
            self.dictionary = build_dictionary(self.n, self.N)


def heat_stack(f: GridFunction, profile: MaximalProfile, route: str = "kernel", basis=None,
               workers: int = 1) -> np.ndarray:
    """|exp(-s L) f| for every heat time s in the profile, stacked along axis 0."""
    return np.stack([np.abs(heat_apply(f, float(s), route, basis, workers).values)
                     for s in profile.t_grid])


def heat_maximal(f: GridFunction, profile: MaximalProfile, route: str = "kernel", basis=None,
                 stack: np.ndarray | None = None, workers: int = 1) -> GridFunction:
    stack = heat_stack(f, profile, route, basis, workers) if stack is None else stack
    return GridFunction(f.grid, stack.max(axis=0))


def nontangential_maximal(f: GridFunction, profile: MaximalProfile, route: str = "kernel", basis=None,
                          stack: np.ndarray | None = None, workers: int = 1) -> GridFunction:
    """sup over heat times s and lattice offsets |w| < sqrt(s) of |exp(-s L) f(z - w)|."""
    g = f.grid
    stack = heat_stack(f, profile, route, basis, workers) if stack is None else stack
    out = np.zeros(g.shape)
    for s, u in zip(profile.t_grid, stack):
        a = math.sqrt(s)
        for st in lattice_offsets(g, [c * a for c in profile.cone_fractions], strict_below=a):
            out = np.maximum(out, shift_values(u, st))
    return GridFunction(g, out)


def tangential_maximal(f: GridFunction, N: int, profile: MaximalProfile, route: str = "kernel",
                       basis=None, stack: np.ndarray | None = None, workers: int = 1) -> GridFunction:
    """sup over s and offsets w of |exp(-s L) f(z - w)| (1 + |w|/sqrt(s))^{-N}.  The offsets
    contain every cone offset of nontangential_maximal, so M* <= 2^N M** holds sample by sample."""
    g = f.grid
    stack = heat_stack(f, profile, route, basis, workers) if stack is None else stack
    out = np.zeros(g.shape)
    for s, u in zip(profile.t_grid, stack):
        a = math.sqrt(s)
        cone = lattice_offsets(g, [c * a for c in profile.cone_fractions], strict_below=a)
        far = lattice_offsets(g, [c * a for c in profile.tangent_multiples])
        steps = {tuple(v) for v in cone} | {tuple(v) for v in far}
        for st in steps:
            w = math.sqrt(sum(v * v for v in st)) * g.h
            wt = (1.0 + w / a) ** (-N)
            out = np.maximum(out, shift_values(u, st) * wt)
    return GridFunction(g, out)


def scaled_bump(phi: TestBump, t: float, grid: Grid) -> GridFunction:
    """phi_t(z) = t^{-2n} phi(z/t) on a small kernel grid with the spacing of `grid`."""
    span = 2 ** math.ceil(math.log2(t / grid.h + 4))
    kg = grid.with_points(max(8, span))
    vals = phi(*[c / t for c in kg.coords()]) * t ** (-2 * grid.n)
    return GridFunction(kg, np.broadcast_to(vals, kg.shape))


def grand_scales(profile: MaximalProfile, grid: Grid, sigma: float) -> np.ndarray:
    """Length scales t from the profile grid with 4h <= t < sigma (finer bumps are unresolved)."""
    t = profile.t_grid
    return t[(t < sigma) & (t >= 4 * grid.h)]


def grand_maximal(f: GridFunction, profile: MaximalProfile, sigma: float, workers: int = 1) -> GridFunction:
    """max over the finite dictionary and resolvable scales t < sigma of |f x phi_t|."""
    out = np.zeros(f.grid.shape)
    for t in grand_scales(profile, f.grid, sigma):
        for phi in profile.dictionary:
            out = np.maximum(out, np.abs(twisted_conv(f, scaled_bump(phi, float(t), f.grid),
                                                      workers=workers).values))
    return GridFunction(f.grid, out)
