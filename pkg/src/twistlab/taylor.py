"""Taylor expansion along twisted translations and the atom remainder identity.

With z' = z - z_j and u = w - z_j (read as a vector in R^{2n}),

    g(z' - u) e^{(i/2) Im(z' . conj(u))}
        = sum_{k <= N} (-1)^k / k! (u . X~)^k g(z')  +  Phi_N(g, z, w),

    Phi_N = (-1)^{N+1} / N! int_0^1 (1 - s)^N (u . X~)^{N+1} g(z' - s u) e^{(i/2) s Im(z' . conj(u))} ds,

where X~ are the lambda = -1 vector fields.  The k-th power expands into all
index strings i_1..i_k with weight u_{i_1}..u_{i_k}.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy.ndimage import map_coordinates

from .grid import GridFunction, field_by_index

MAX_STRING = 6
S_NODES = 32
INTERP_ORDER = 5


class FieldStrings:
    """X~_{i_1} .. X~_{i_k} g on the grid for every string of length <= N + 1."""

    def __init__(self, g: GridFunction, N: int):
        if N < 0:
            raise ValueError("N must be >= 0")
        if N + 1 > MAX_STRING:
            raise ValueError(f"strings of length {N + 1} exceed the guard {MAX_STRING}")
        self.g, self.N = g, N
        dim = g.grid.dim
        self.table = {(): g}
        for k in range(1, N + 2):
            for idx in itertools.product(range(dim), repeat=k):
                # X~_{i_1} applied last: the string acts right to left
                self.table[idx] = field_by_index(self.table[idx[1:]], idx[0], lam=-1)

    def strings(self, k: int):
        return [s for s in self.table if len(s) == k]

    def at(self, idx: tuple, pts: np.ndarray) -> np.ndarray:
        """Values of string `idx` at real points pts of shape (..., 2n)."""
        return interpolate(self.table[idx], pts)


def interpolate(f: GridFunction, pts: np.ndarray) -> np.ndarray:
    """Order-5 spline interpolation of f at real points (..., 2n); zero outside the box."""
    g = f.grid
    pts = np.asarray(pts, dtype=float)
    idx = (pts + g.L / 2) / g.h
    coords = np.moveaxis(idx, -1, 0).reshape(g.dim, -1)
    kw = dict(order=INTERP_ORDER, mode="constant", cval=0.0)
    out = map_coordinates(f.values.real, coords, **kw) + 1j * map_coordinates(f.values.imag, coords, **kw)
    return out.reshape(pts.shape[:-1])


def _real(z) -> np.ndarray:
    """C^n (complex array, last axis n) -> R^{2n} as (x_1..x_n, y_1..y_n)."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def _sympl(a, b) -> np.ndarray:
    """Im(a . conj(b)) along the last axis."""
    return np.sum(np.imag(np.asarray(a) * np.conj(np.asarray(b))), axis=-1)


@lru_cache(maxsize=None)
def _gl01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1), 0.5 * w


def _as_points(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return a.reshape(-1, n) if a.ndim <= 1 else a.reshape(-1, n)


def _string_sum(fs: FieldStrings, k: int, u_real: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """sum over strings of length k of u_{i_1}..u_{i_k} (X~ string g)(pts)."""
    out = 0.0
    for idx in fs.strings(k):
        weight = np.prod([u_real[..., i] for i in idx], axis=0) if idx else 1.0
        out = out + weight * fs.at(idx, pts)
    return out


def taylor_polynomial_part(g, z_j, N: int, w, z, strings: FieldStrings | None = None) -> np.ndarray:
    """sum_{k <= N} (-1)^k / k! (u . X~)^k g(z - z_j) with u = w - z_j, for arrays of w."""
    n = g.grid.n
    fs = strings or FieldStrings(g, N)
    zp = _as_points(z, n)[0] - np.asarray(z_j, dtype=complex).reshape(n)
    u = _as_points(w, n) - np.asarray(z_j, dtype=complex).reshape(n)
    ur = _real(u)
    at = np.broadcast_to(_real(zp), ur.shape)
    return sum((-1) ** k / math.factorial(k) * _string_sum(fs, k, ur, at) for k in range(N + 1))


def taylor_twisted_remainder(g: GridFunction, z_j, N: int, w, z, strings: FieldStrings | None = None,
                             nodes: int = S_NODES) -> np.ndarray:
    """Phi_N(g, z, w) for one z and an array of w (shape (P,) for n = 1 or (P, n))."""
    if nodes < 32:
        raise ValueError("the s-quadrature uses at least 32 Gauss-Legendre nodes")
    n = g.grid.n
    fs = strings or FieldStrings(g, N)
    zj = np.asarray(z_j, dtype=complex).reshape(n)
    zp = _as_points(z, n)[0] - zj
    u = _as_points(w, n) - zj
    ur = _real(u)
    s, ws = _gl01(nodes)
    phase_rate = _sympl(zp[None, :], u)                      # (P,)
    pts = _real(zp)[None, None, :] - s[:, None, None] * ur[None, :, :]   # (S, P, 2n)
    vals = _string_sum(fs, N + 1, ur[None, :, :], pts)       # (S, P)
    kern = ((1 - s) ** N * ws)[:, None] * np.exp(0.5j * s[:, None] * phase_rate[None, :])
    return (-1) ** (N + 1) / math.factorial(N) * np.sum(kern * vals, axis=0)


def twisted_pair(g: GridFunction, z, w) -> np.ndarray:
    """g(z - w) e^{(i/2) Im(z . conj(w))} for one z and an array of w, by interpolation."""
    n = g.grid.n
    zz = _as_points(z, n)[0]
    ww = _as_points(w, n)
    return interpolate(g, _real(zz[None, :] - ww)) * np.exp(0.5j * _sympl(zz[None, :], ww))


def remainder_identity(f: GridFunction, g: GridFunction, z_j, N: int, z_points, nodes: int = S_NODES):
    """Both sides of f x g(z) = e^{-(i/2) Im(z_j . conj z)} int f(w) Phi_N(g, z, w) e^{(i/2) Im(z_j . conj w)} dw
    at each z in z_points, with f supported near z_j and g sampled on its own grid.

    The left side is the midpoint rule for the twisted convolution, with g read off its
    grid by the same interpolation the right side uses.  Returns (lhs, rhs) arrays.
    """
    grid = f.grid
    n = grid.n
    nz = np.flatnonzero(f.values.ravel())
    coords = [np.broadcast_to(c, grid.shape).ravel()[nz] for c in grid.coords()]
    w = np.stack([coords[j] + 1j * coords[n + j] for j in range(n)], axis=-1)
    fw = f.values.ravel()[nz]
    zj = np.asarray(z_j, dtype=complex).reshape(n)
    fs = FieldStrings(g, N)
    lhs, rhs = [], []
    for z in np.atleast_1d(np.asarray(z_points, dtype=complex)).reshape(-1, n):
        lhs.append(np.sum(fw * twisted_pair(g, z, w)) * grid.cell_volume)
        phi = taylor_twisted_remainder(g, zj, N, w, z, fs, nodes)
        pre = np.exp(-0.5j * _sympl(zj, z))
        rhs.append(pre * np.sum(fw * phi * np.exp(0.5j * _sympl(zj[None, :], w))) * grid.cell_volume)
    return np.array(lhs), np.array(rhs)
