import numpy as np
import pytest

from twistlab.atoms import make_atom, validate_atom
from twistlab.grid import GridFunction, make_grid
from twistlab.io import load_atom, load_basis, load_decay_report, read_twgf, save_atom, save_basis, \
    save_decay_report, write_twgf
from twistlab.laguerre import build_basis
from twistlab.subordination import DecayReport


def _f(grid, seed=0):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))


@pytest.mark.parametrize("n,M,L", [(1, 8, 8.0), (1, 16, 0.1), (2, 8, 3.0)])
def test_twgf_roundtrip(tmp_path, n, M, L):
    f = _f(make_grid(n, M, L))
    back = read_twgf(write_twgf(f, tmp_path / "f.twgf"))
    assert back.grid == f.grid and np.array_equal(back.values, f.values)


def test_twgf_header_and_order(tmp_path):
    g = make_grid(1, 8, 8.0)
    v = np.zeros(g.shape, dtype=complex)
    v[0, 1] = 2 - 1j
    path = write_twgf(GridFunction(g, v), tmp_path / "f.twgf")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "twgf 1 1 8 8.0"
    assert len(lines) == 1 + 64
    assert lines[2].split() == ["2", "-1"]  # row-major: index (0, 1) is sample 1


@pytest.mark.parametrize("text", ["nope 1 1 8 8.0\n", "twgf 2 1 8 8.0\n", "twgf 1 1 8 8.0\n0 0\n"])
def test_twgf_rejects(tmp_path, text):
    p = tmp_path / "bad.twgf"
    p.write_text(text, encoding="utf-8")
    with pytest.raises(ValueError):
        read_twgf(p)


def test_twgf_missing_file(tmp_path):
    with pytest.raises(OSError, match="missing.twgf"):
        read_twgf(tmp_path / "missing.twgf")


def test_basis_manifest(tmp_path):
    b = build_basis(make_grid(1, 8, 4.0), 2)
    d = save_basis(b, tmp_path)
    rows = (d / "manifest.txt").read_text(encoding="utf-8").split("\n")
    assert rows[:3] == ["0 1 phi_000.twgf", "1 3 phi_001.twgf", "2 5 phi_002.twgf"]
    back = load_basis(tmp_path, b.grid, 2)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(b.phi, back.phi))
    assert load_basis(tmp_path, b.grid, 5) is None
    assert load_basis(tmp_path / "empty", b.grid, 1) is None


def test_atom_bundle(tmp_path):
    g = make_grid(1, 64, 2.0)
    a = make_atom(g, 0.1 - 0.05j, 0.5, 0.5, 1.0, seed=4)
    path, meta = save_atom(a, tmp_path / "atom.twgf")
    assert meta.name == "atom.twgf.meta"
    assert len(meta.read_text(encoding="utf-8").split()) == 5
    b = load_atom(path)
    assert b.cube == a.cube and (b.p, b.sigma, b.N0) == (a.p, a.sigma, a.N0)
    assert np.array_equal(b.f.values, a.f.values)
    assert validate_atom(b).passed


def test_decay_report_json(tmp_path):
    rep = DecayReport(7, -5.25, 0.125, 4096, 0)
    back = load_decay_report(save_decay_report(rep, tmp_path / "k.json"))
    assert back == rep
    assert set(__import__("json").loads(rep.to_json())) == {"j", "slope", "residual", "node_budget", "flags"}
