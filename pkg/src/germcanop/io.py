"""Serialization of germs (named families) and wave functions.

Germs are stored as JSON documents naming a built-in family and its
parameters; germs built from arbitrary callables cannot be serialized.
Wave functions are stored either as a binary file (a JSON header followed by
little-endian complex samples) or as CSV with columns ``q_1..q_n, re, im``.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .canop import Grid, WaveFunction
from .errors import InvalidInput
from .germ import Germ

GERM_FORMAT = "germcanop.germ"
WAVE_MAGIC = b"GCWF"
FORMAT_VERSION = 1


def _build_family(fam: dict) -> Germ:
    from . import families

    name = fam.get("name")
    if name == "circle":
        return families.circle_germ(float(fam["energy"]))
    if name == "product_circle":
        e1, e2 = fam["energies"]
        return families.product_circle_germ(float(e1), float(e2))
    if name == "point":
        return families.point_germ(int(fam.get("n", 1)), float(fam.get("half_width", 3.0)))
    if name == "polynomial":
        return families.polynomial_germ([complex(*c) for c in fam["coefficients"]],
                                        float(fam.get("center", 0.0)), float(fam.get("half_width", 1.0)))
    if name == "transformed":
        from .transform import CanonicalTransform, apply_canonical_transform

        U = np.array(fam["U"], dtype=complex) if not _is_split(fam["U"]) else _join(fam["U"])
        return apply_canonical_transform(CanonicalTransform(U, name=fam.get("transform", "unitary")),
                                         _build_family(fam["base"]))
    raise InvalidInput(f"unknown germ family {name!r}")


def _is_split(u):
    return isinstance(u, dict) and set(u) == {"re", "im"}


def _join(u):
    return np.array(u["re"], dtype=float) + 1j * np.array(u["im"], dtype=float)


def _jsonable(obj):
    """Family dictionaries with complex entries split into ``[re, im]``."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if any(isinstance(x, complex) for x in np.ravel(np.array(obj, dtype=object))):
            arr = np.array(obj, dtype=complex)
            return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
        return [_jsonable(x) for x in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def germ_to_dict(germ: Germ) -> dict:
    """JSON-ready description of a germ built from a named family.

    Raises
    ------
    InvalidInput
        If the germ has no family record (it was built from arbitrary callables).
    """
    if not germ.family:
        raise InvalidInput("germ was not built from a named family and cannot be serialized")
    return {"format": GERM_FORMAT, "version": FORMAT_VERSION, "n": germ.n,
            "family": _jsonable(germ.family), "cycles": [c.cycle_id for c in germ.cycles],
            "charts": [{"I": list(ch.I.members), "sheet": ch.sheet_id, "box": ch.box.tolist()}
                       for ch in germ.atlas]}


def germ_from_dict(doc: dict) -> Germ:
    if doc.get("format") != GERM_FORMAT:
        raise InvalidInput("not a germ document")
    if doc.get("version") != FORMAT_VERSION:
        raise InvalidInput(f"unsupported germ document version {doc.get('version')}")
    germ = _build_family(doc["family"])
    if germ.n != doc.get("n", germ.n):
        raise InvalidInput("stored dimension disagrees with the family")
    return germ


def save_germ(germ: Germ, path) -> None:
    Path(path).write_text(json.dumps(germ_to_dict(germ), indent=2, sort_keys=True))


def load_germ(path) -> Germ:
    return germ_from_dict(json.loads(Path(path).read_text()))


def save_wavefunction(psi: WaveFunction, path, dtype: str = "complex128") -> None:
    """Binary dump: magic, header length, JSON header, raw samples."""
    if dtype not in ("complex64", "complex128"):
        raise InvalidInput("dtype must be complex64 or complex128")
    header = {"version": FORMAT_VERSION, "h": psi.h, "dtype": dtype,
              "axes": [[float(a[0]), float(a[-1]), len(a)] for a in psi.grid.axes]}
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WAVE_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(psi.values.astype("<" + ("c8" if dtype == "complex64" else "c16")).tobytes())


def load_wavefunction(path) -> WaveFunction:
    data = Path(path).read_bytes()
    if data[:4] != WAVE_MAGIC:
        raise InvalidInput("not a wave-function file")
    (k,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + k])
    grid = Grid.uniform(*zip(*header["axes"]))
    code = "<c8" if header["dtype"] == "complex64" else "<c16"
    vals = np.frombuffer(data[8 + k:], dtype=code)
    if vals.size != int(np.prod(grid.shape)):
        raise InvalidInput("sample count does not match the grid header")
    return WaveFunction(grid, vals.astype(complex), float(header["h"]))


def wavefunction_to_csv(psi: WaveFunction, path) -> None:
    n = psi.grid.n
    pts = psi.grid.points().reshape(-1, n)
    vals = psi.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"q{j + 1}" for j in range(n)] + ["re", "im"])
        for q, v in zip(pts, vals):
            w.writerow([repr(float(x)) for x in q] + [repr(float(v.real)), repr(float(v.imag))])


def wavefunction_from_csv(path, h: float) -> WaveFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], dtype=float)
    n = len(head) - 2
    axes = [np.unique(body[:, j]) for j in range(n)]
    grid = Grid(axes)
    if body.shape[0] != int(np.prod(grid.shape)):
        raise InvalidInput("CSV rows do not form a tensor grid")
    return WaveFunction(grid, body[:, n] + 1j * body[:, n + 1], h)
