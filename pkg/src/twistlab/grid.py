"""Uniform lattices on C^n = R^{2n}, sampled functions, and the magnetic vector fields.

Coordinates are ordered (x_1..x_n, y_1..y_n) with z = x + iy.  The lattice is the
vertex lattice x_i = (i - M/2) h, i = 0..M-1, so that it contains the origin and
is closed under the differences z - w needed by twisted convolution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

FD_ORDER = 8


@dataclass(frozen=True)
class Grid:
    n: int
    M: int
    L: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"complex dimension must be >= 1, got {self.n}")
        if self.M < 8 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of two >= 8, got {self.M}")
        if not math.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be finite and positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.M,) * self.dim

    @property
    def size(self) -> int:
        return self.M ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axis(self) -> np.ndarray:
        return (np.arange(self.M) - self.M // 2) * self.h

    def coords(self) -> list:
        """Broadcastable coordinate arrays [x_1..x_n, y_1..y_n]."""
        ax = self.axis()
        out = []
        for d in range(self.dim):
            shp = [1] * self.dim
            shp[d] = self.M
            out.append(ax.reshape(shp))
        return out

    def radius_sq(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for c in self.coords():
            r2 = r2 + c * c
        return r2

    def extended(self, factor: int = 2) -> "Grid":
        """Same spacing and origin, `factor` times the extent."""
        return Grid(self.n, self.M * factor, self.L * factor)

    def with_points(self, M: int) -> "Grid":
        """Same spacing, M points per axis."""
        return Grid(self.n, M, M * self.h)

    def compatible(self, other: "Grid") -> bool:
        return self.n == other.n and math.isclose(self.h, other.h, rel_tol=1e-12)


def make_grid(n: int, M: int, L: float) -> Grid:
    return Grid(int(n), int(M), float(L))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise ValueError(f"expected {self.grid.size} samples, got {v.size}")
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite samples")
        object.__setattr__(self, "values", v)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def abs(self) -> np.ndarray:
        return np.abs(self.values)


def zeros(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.shape, dtype=complex))


def sample(grid: Grid, func) -> GridFunction:
    """Sample func(*coords) on the grid; func receives the 2n broadcast coordinate arrays."""
    vals = np.broadcast_to(func(*grid.coords()), grid.shape)
    return GridFunction(grid, np.array(vals, dtype=complex))


def sample_radial(grid: Grid, func) -> GridFunction:
    """Sample func(|z|^2) on the grid."""
    return GridFunction(grid, np.asarray(func(grid.radius_sq()), dtype=complex))


def restrict(f: GridFunction, grid: Grid) -> GridFunction:
    """Copy the samples of f onto another grid with the same spacing, zero outside."""
    if not f.grid.compatible(grid):
        raise ValueError("restrict needs grids with equal n and spacing")
    out = np.zeros(grid.shape, dtype=complex)
    src, dst = [], []
    for _ in range(grid.dim):
        off = f.grid.M // 2 - grid.M // 2  # source index of destination index 0
        lo = max(0, -off)
        hi = min(grid.M, f.grid.M - off)
        dst.append(slice(lo, hi))
        src.append(slice(lo + off, hi + off))
    out[tuple(dst)] = f.values[tuple(src)]
    return GridFunction(grid, out)


@dataclass(frozen=True)
class Cube:
    center: tuple
    side: float

    def __post_init__(self):
        c = tuple(complex(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        if not self.side > 0:
            raise ValueError("cube side must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    def real_center(self) -> np.ndarray:
        c = np.asarray(self.center)
        return np.concatenate([c.real, c.imag])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """pts has trailing axis of length 2n (real coordinates)."""
        d = np.abs(np.asarray(pts) - self.real_center())
        return np.all(d <= self.side / 2, axis=-1)

    def mask(self, grid: Grid) -> np.ndarray:
        m = np.ones(grid.shape, dtype=bool)
        for c, c0 in zip(grid.coords(), self.real_center()):
            m = m & (np.abs(c - c0) <= self.side / 2)
        return m

    @property
    def volume(self) -> float:
        return self.side ** (2 * self.n)


def lp_norm(f: GridFunction, p: float) -> float:
    if not p > 0:
        raise ValueError("p must be positive")
    a = np.abs(f.values).ravel()
    return float(np.sum(a ** p) * f.grid.cell_volume) ** (1.0 / p)


def inner(f: GridFunction, g: GridFunction) -> complex:
    f._check(g)
    return complex(np.vdot(g.values.ravel(), f.values.ravel()) * f.grid.cell_volume)


def rel_l2(a: GridFunction, b: GridFunction) -> float:
    """||a - b||_2 / ||b||_2."""
    nb = lp_norm(b, 2)
    return lp_norm(a - b, 2) / nb if nb > 0 else lp_norm(a, 2)


# ---------------------------------------------------------------------------
# finite differences


def fd_weights(offsets, deriv: int = 1) -> np.ndarray:
    """Weights w with sum_k w_k f(x + o_k h) ~ h^deriv f^(deriv)(x)."""
    o = np.asarray(offsets, dtype=float)
    A = np.vander(o, len(o), increasing=True).T
    b = np.zeros(len(o))
    b[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, b)


@lru_cache(maxsize=None)
def _stencils(M: int, order: int):
    half = order // 2
    interior = fd_weights(np.arange(-half, half + 1))
    rows = {}
    for i in list(range(half)) + list(range(M - half, M)):
        lo = min(max(i - half, 0), M - order - 1)
        idx = np.arange(lo, lo + order + 1)
        rows[i] = (idx, fd_weights(idx - i))
    return interior, rows


def diff_axis(values: np.ndarray, axis: int, h: float, order: int = FD_ORDER,
              boundary: str = "closure") -> np.ndarray:
    """First derivative along one axis by centered differences.

    boundary="closure" uses one-sided stencils of the same order near the edges, so only
    samples inside the box enter; boundary="zero" treats the outside as zero.
    """
    if order % 2 or order < 2:
        raise ValueError("order must be even and >= 2")
    v = np.moveaxis(values, axis, -1)
    M = v.shape[-1]
    if M <= order + 1:
        raise ValueError("grid too small for the stencil")
    half = order // 2
    out = np.zeros_like(v)
    interior, rows = _stencils(M, order)
    if boundary == "zero":
        pad = np.zeros(v.shape[:-1] + (M + 2 * half,), dtype=v.dtype)
        pad[..., half:half + M] = v
        for k, wk in enumerate(interior):
            if wk != 0.0:
                out += wk * pad[..., k:k + M]
    elif boundary == "closure":
        for k, wk in enumerate(interior):
            if wk != 0.0:
                out[..., half:M - half] += wk * v[..., k:M - 2 * half + k]
        for i, (idx, w) in rows.items():
            out[..., i] = v[..., idx] @ w
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return np.moveaxis(out / h, -1, axis)


def apply_vector_field(f: GridFunction, j: int, kind: str, lam: int = 1,
                       order: int = FD_ORDER, boundary: str = "closure") -> GridFunction:
    """X_j(lam) = d/dx_j + (i lam/2) y_j  or  Y_j(lam) = d/dy_j - (i lam/2) x_j.

    j is 1-based as in the usual notation.
    """
    g = f.grid
    if not 1 <= j <= g.n:
        raise ValueError(f"vector field index must be in 1..{g.n}")
    if lam not in (1, -1):
        raise ValueError("lam must be +1 or -1")
    coords = g.coords()
    x, y = coords[j - 1], coords[g.n + j - 1]
    if kind == "X":
        d = diff_axis(f.values, j - 1, g.h, order, boundary)
        return GridFunction(g, d + 0.5j * lam * y * f.values)
    if kind == "Y":
        d = diff_axis(f.values, g.n + j - 1, g.h, order, boundary)
        return GridFunction(g, d - 0.5j * lam * x * f.values)
    raise ValueError(f"kind must be 'X' or 'Y', got {kind!r}")


def field_by_index(f: GridFunction, i: int, lam: int = -1, **kw) -> GridFunction:
    """Vector field number i in 0..2n-1: X_1..X_n then Y_1..Y_n."""
    n = f.grid.n
    return apply_vector_field(f, i % n + 1, "X" if i < n else "Y", lam, **kw)


def apply_twisted_laplacian(f: GridFunction, lam: int = 1, order: int = FD_ORDER,
                            boundary: str = "closure") -> GridFunction:
    acc = np.zeros(f.grid.shape, dtype=complex)
    for j in range(1, f.grid.n + 1):
        for kind in ("X", "Y"):
            once = apply_vector_field(f, j, kind, lam, order, boundary)
            acc += apply_vector_field(once, j, kind, lam, order, boundary).values
    return GridFunction(f.grid, -acc)


# ---------------------------------------------------------------------------
# twisted translation


def symplectic(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Im(z . conj(w)) for real coordinate vectors with trailing axis 2n."""
    n = z.shape[-1] // 2
    return np.sum(z[..., n:] * w[..., :n] - z[..., :n] * w[..., n:], axis=-1)


def lattice_shift(grid: Grid, w) -> np.ndarray:
    """Nearest lattice vector (integer steps per real axis) to w in C^n."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.shape != (grid.n,):
        raise ValueError(f"offset must have {grid.n} complex components")
    wr = np.concatenate([w.real, w.imag])
    steps = np.rint(wr / grid.h).astype(int)
    if np.linalg.norm(wr - steps * grid.h) > grid.h / 2:
        log.warning("offset %s rounded to the lattice by more than h/2", w)
    if np.linalg.norm(wr) > grid.L / 4:
        log.warning("offset %s exceeds L/4; support will be lost at the box edge", w)
    return steps


def shift_values(values: np.ndarray, steps) -> np.ndarray:
    """out[i] = values[i - steps] with zero fill."""
    out = np.zeros_like(values)
    src, dst = [], []
    for s, M in zip(steps, values.shape):
        s = int(s)
        if abs(s) >= M:
            return out
        dst.append(slice(max(s, 0), M + min(s, 0)))
        src.append(slice(max(-s, 0), M - max(s, 0)))
    out[tuple(dst)] = values[tuple(src)]
    return out


def twisted_translate(f: GridFunction, w) -> GridFunction:
    """tau_w f(z) = f(z - w) exp((i/2) Im(z . conj(w))), w rounded to the lattice."""
    g = f.grid
    steps = lattice_shift(g, w)
    wr = steps * g.h
    phase_arg = np.zeros(g.shape)
    coords = g.coords()
    n = g.n
    for j in range(n):
        phase_arg = phase_arg + coords[n + j] * wr[j] - coords[j] * wr[n + j]
    return GridFunction(g, shift_values(f.values, steps) * np.exp(0.5j * phase_arg))
