"""On-disk formats: twgf grid functions, the Laguerre basis cache, atom bundles, decay reports."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .grid import Cube, Grid, GridFunction

TWGF_MAGIC = "twgf"
TWGF_VERSION = 1
MANIFEST = "manifest.txt"


def write_twgf(f: GridFunction, path) -> Path:
    """Header `twgf 1 n M L`, then one `re im` line per sample in row-major order."""
    path = Path(path)
    g = f.grid
    flat = f.values.ravel()
    lines = [f"{TWGF_MAGIC} {TWGF_VERSION} {g.n} {g.M} {g.L!r}"]
    lines.extend(f"{v.real:.17g} {v.imag:.17g}" for v in flat)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write twgf file {path}: {exc}") from exc
    return path


def read_twgf(path) -> GridFunction:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            head = fh.readline().split()
            if len(head) != 5 or head[0] != TWGF_MAGIC:
                raise ValueError(f"{path}: not a twgf file")
            if int(head[1]) != TWGF_VERSION:
                raise ValueError(f"{path}: unsupported twgf version {head[1]}")
            grid = Grid(int(head[2]), int(head[3]), float(head[4]))
            data = np.loadtxt(fh, dtype=float, ndmin=2)
    except OSError as exc:
        raise OSError(f"cannot read twgf file {path}: {exc}") from exc
    if data.shape != (grid.size, 2):
        raise ValueError(f"{path}: expected {grid.size} samples, found {data.shape[0]}")
    return GridFunction(grid, (data[:, 0] + 1j * data[:, 1]).reshape(grid.shape))


# ---------------------------------------------------------------------------
# Laguerre basis cache


def _basis_dir(root: Path, grid: Grid) -> Path:
    return Path(root) / f"n{grid.n}_M{grid.M}_L{grid.L!r}"


def save_basis(basis, root) -> Path:
    """One twgf file per phi_k plus `manifest.txt` with lines `k eigenvalue filename`."""
    d = _basis_dir(root, basis.grid)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, phi in enumerate(basis.phi):
        name = f"phi_{k:03d}.twgf"
        write_twgf(phi, d / name)
        rows.append(f"{k} {int(basis.eigenvalues[k])} {name}")
    tmp = d / (MANIFEST + ".tmp")
    tmp.write_text("\n".join(rows) + "\n", encoding="utf-8")
    os.replace(tmp, d / MANIFEST)
    return d


def load_basis(root, grid: Grid, K_max: int):
    """The cached basis for `grid` if it holds at least K_max + 1 functions, else None."""
    from .laguerre import LaguerreBasis

    d = _basis_dir(root, grid)
    man = d / MANIFEST
    if not man.exists():
        return None
    rows = [line.split() for line in man.read_text(encoding="utf-8").splitlines() if line.strip()]
    if len(rows) < K_max + 1:
        return None
    phi, eig = [], []
    for k, (kk, lam, name) in enumerate(rows[:K_max + 1]):
        if int(kk) != k or int(lam) != 2 * k + grid.n:
            raise ValueError(f"{man}: bad manifest row {k}")
        f = read_twgf(d / name)
        if f.grid != grid:
            raise ValueError(f"{d / name}: grid mismatch")
        phi.append(f)
        eig.append(int(lam))
    return LaguerreBasis(grid.n, K_max, grid, phi, np.array(eig))


# ---------------------------------------------------------------------------
# atoms and decay reports


def save_atom(atom, path) -> tuple:
    """Writes `<path>` (twgf) and `<path>.meta` with the line `z0 r p sigma N0`."""
    path = Path(path)
    write_twgf(atom.f, path)
    z0 = ",".join(f"{c.real:.17g}{c.imag:+.17g}j" for c in np.atleast_1d(atom.cube.center))
    meta = path.with_name(path.name + ".meta")
    meta.write_text(f"{z0} {atom.r:.17g} {atom.p:.17g} {atom.sigma:.17g} {atom.N0}\n", encoding="utf-8")
    return path, meta


def load_atom(path):
    from .atoms import Atom

    path = Path(path)
    f = read_twgf(path)
    meta = path.with_name(path.name + ".meta")
    parts = meta.read_text(encoding="utf-8").split()
    if len(parts) != 5:
        raise ValueError(f"{meta}: expected `z0 r p sigma N0`")
    z0 = tuple(complex(c) for c in parts[0].split(","))
    r, p, sigma = float(parts[1]), float(parts[2]), float(parts[3])
    cube = Cube(z0 if len(z0) > 1 else z0[0], r)
    return Atom(f, cube, p, sigma, int(parts[4]))


def save_decay_report(report, path) -> Path:
    path = Path(path)
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    return path


def load_decay_report(path):
    from .subordination import DecayReport

    return DecayReport.from_json(Path(path).read_text(encoding="utf-8"))
