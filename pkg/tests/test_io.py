import numpy as np
import pytest

from germcanop.canop import Grid, WaveFunction
from germcanop.errors import InvalidInput
from germcanop.families import circle_germ, point_germ, polynomial_germ, product_circle_germ
from germcanop.germ import ZAction
from germcanop.io import (germ_from_dict, germ_to_dict, load_germ, load_wavefunction, save_germ,
                          save_wavefunction, wavefunction_from_csv, wavefunction_to_csv)
from germcanop.transform import CanonicalTransform, apply_canonical_transform


def _same_germ(a, b):
    assert a.n == b.n and len(a.atlas) == len(b.atlas)
    for m in a.gamma_samples[:5]:
        assert abs(float(a.dissipation(m)) - float(b.dissipation(m))) <= 1e-14
    for ca, cb in zip(a.atlas, b.atlas):
        assert ca.I.members == cb.I.members
        assert np.allclose(ca.box, cb.box)


@pytest.mark.parametrize("make", [
    lambda: circle_germ(0.7),
    lambda: product_circle_germ(0.5, 1.5),
    lambda: point_germ(2, 2.0),
    lambda: polynomial_germ([0, 0.1, 0.5j, 0.1 + 0.05j], 0.2, 0.4),
    lambda: apply_canonical_transform(CanonicalTransform.quarter_turn(1), circle_germ(0.5)),
])
def test_germ_roundtrip(make, tmp_path):
    g = make()
    save_germ(g, tmp_path / "g.json")
    _same_germ(g, load_germ(tmp_path / "g.json"))


def test_germ_without_family_rejected(circle):
    g, _ = circle
    from dataclasses import replace
    with pytest.raises(InvalidInput):
        germ_to_dict(replace(g, family=None))


def test_germ_document_checks():
    doc = germ_to_dict(circle_germ(0.5))
    with pytest.raises(InvalidInput):
        germ_from_dict({**doc, "format": "other"})
    with pytest.raises(InvalidInput):
        germ_from_dict({**doc, "version": 99})
    with pytest.raises(InvalidInput):
        germ_from_dict({**doc, "family": {"name": "nonsense"}})


@pytest.mark.parametrize("dtype,tol", [("complex128", 0.0), ("complex64", 1e-7)])
def test_wavefunction_binary_roundtrip(dtype, tol, tmp_path):
    grid = Grid.uniform([-1.0, 0.0], [1.0, 2.0], [5, 7])
    rng = np.random.default_rng(1)
    psi = WaveFunction(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), 0.05)
    save_wavefunction(psi, tmp_path / "w.bin", dtype)
    back = load_wavefunction(tmp_path / "w.bin")
    assert back.h == psi.h and back.values.shape == psi.values.shape
    assert np.abs(back.values - psi.values).max() <= tol * np.abs(psi.values).max()
    for a, b in zip(grid.axes, back.grid.axes):
        assert np.allclose(a, b)


def test_wavefunction_bad_files(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"nope")
    with pytest.raises(InvalidInput):
        load_wavefunction(tmp_path / "x.bin")
    grid = Grid.uniform([0.0], [1.0], [4])
    with pytest.raises(InvalidInput):
        save_wavefunction(WaveFunction(grid, np.zeros(4, dtype=complex), 0.1), tmp_path / "y.bin", "float32")


def test_wavefunction_csv_roundtrip(tmp_path):
    grid = Grid.uniform([-1.0], [1.0], [11])
    q = grid.axes[0]
    psi = WaveFunction(grid, np.exp(1j * q) * (1 + q), 0.1)
    wavefunction_to_csv(psi, tmp_path / "w.csv")
    header = (tmp_path / "w.csv").read_text().splitlines()[0]
    assert header == "q1,re,im"
    back = wavefunction_from_csv(tmp_path / "w.csv", 0.1)
    assert np.array_equal(back.values, psi.values)
