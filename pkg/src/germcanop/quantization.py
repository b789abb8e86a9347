"""Variations along cycles, the quantization condition and admissible parameters.

The condition for a cycle ``gamma`` reads

    w = Var_gamma Phi / h + (i/2) Var_gamma ln a  in  2 pi Z,

and the residual is the distance from ``w`` to ``2 pi Z`` in the complex plane.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .canop import VolumeForm
from .errors import BranchFailure, InvalidInput
from .germ import Cycle, Germ


def _cover_check(germ: Germ, points, step=1):
    for m in points[::step]:
        if not germ.charts_covering(m, tol=1e-6):
            raise InvalidInput(f"cycle point {m} is not covered by the atlas")


def var_phi(germ: Germ, cycle: Cycle, check_cover: bool = False, start_sheet=None) -> complex:
    """Increment of the z-action along a closed polyline on Γ.

    Branches are reconciled by switching to a sheet that covers both ends of
    a step; each sheet is continuous on its domain, so the sum telescopes
    within a sheet.

    Raises
    ------
    InvalidInput
        If ``check_cover`` is set and a point is not covered by a chart.
    """
    if check_cover:
        _cover_check(germ, cycle.points, step=max(1, len(cycle.points) // 64))
    sheet = start_sheet if start_sheet is not None else cycle.start_sheet
    return germ.zaction.variation(cycle.points, sheet)


def line_integral_pdq(points) -> float:
    """``oint p dq`` along a polyline by the trapezoid rule (independent check)."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[1] // 2
    p, q = pts[:, :n], pts[:, n:]
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(q, axis=0)))


def var_ln_a(form: VolumeForm, germ: Germ, cycle: Cycle, max_depth: int = 30) -> complex:
    """Continuous-branch increment of ``ln a`` along the cycle.

    Each polyline step is bisected until the argument of ``a`` changes by
    less than ``pi/2``.

    Raises
    ------
    BranchFailure
        If ``|a| < 1e-12`` on the path.
    """
    pts = cycle.points
    sheet = cycle.start_sheet

    def a(m):
        v = form.a(m, sheet)
        if not np.isfinite(v) or abs(v) < 1e-12:
            raise BranchFailure(f"density vanishes at {m}")
        return v

    def step(m0, a0, m1, depth):
        a1 = a(m1)
        d = np.angle(a1 / a0)
        if abs(d) < np.pi / 2:
            return d, a1
        if depth >= max_depth:
            raise BranchFailure("argument continuation did not resolve")
        mm = 0.5 * (m0 + m1)
        d1, am = step(m0, a0, mm, depth + 1)
        d2, a1 = step(mm, am, m1, depth + 1)
        return d1 + d2, a1

    a0 = a(pts[0])
    cur = a0
    arg = 0.0
    for m0, m1 in zip(pts[:-1], pts[1:]):
        d, cur = step(m0, cur, m1, 0)
        arg += d
    return complex(np.log(abs(cur) / abs(a0)) + 1j * arg)


def residual_to_lattice(w: complex) -> float:
    """Distance from ``w`` to ``2 pi Z``."""
    k = np.round(w.real / (2 * np.pi))
    return float(abs(w - 2 * np.pi * k))


@dataclass
class QuantizationRow:
    cycle_id: str
    var_phi: complex
    var_ln_a: complex
    residual: float
    winding: float


@dataclass
class QuantizationReport:
    """Per-cycle rows plus the verdict at tolerance ``tol``."""

    rows: List[QuantizationRow]
    tol: float
    h: float
    sheet_ratio_spread: Optional[float] = None

    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)

    @property
    def holds(self) -> bool:
        return self.max_residual <= self.tol


def sheet_ratio_spread(form: VolumeForm, germ: Germ) -> Optional[float]:
    """Spread of ``a_s2/a_s1`` over Γ samples where two sheets overlap.

    ``None`` when the form has a single density or no overlaps exist.
    """
    if not isinstance(form._a, dict) or len(form._a) < 2:
        return None
    za = germ.zaction
    spreads = []
    ids = list(form._a)
    for i, s1 in enumerate(ids):
        for s2 in ids[i + 1:]:
            ratios = [form.a(m, s2) / form.a(m, s1) for m in germ.gamma_samples
                      if za.sheets[s1].domain(m) and za.sheets[s2].domain(m)]
            if len(ratios) > 1:
                r = np.array(ratios)
                spreads.append(float(np.abs(r - r[0]).max() / abs(r[0])))
    return max(spreads) if spreads else None


def check_quantization(germ: Germ, form: VolumeForm, h: float, tol: float = 1e-8) -> QuantizationReport:
    """Quantization residuals of every stored cycle at Planck constant ``h``.

    A germ without cycles satisfies the condition vacuously.
    """
    if h <= 0:
        raise InvalidInput("h must be positive")
    rows = []
    for c in germ.cycles:
        vp = var_phi(germ, c)
        vl = var_ln_a(form, germ, c)
        w = vp / h + 0.5j * vl
        rows.append(QuantizationRow(c.cycle_id, vp, vl, residual_to_lattice(w), w.real / (2 * np.pi)))
    return QuantizationReport(rows, tol, h, sheet_ratio_spread(form, germ))


def admissible_parameters(family: Callable, lo: float, hi: float, which: str = "E",
                          tol: float = 1e-8, n_scan: int = 200) -> List[float]:
    """Parameter values in ``(lo, hi)`` at which every cycle is quantized.

    Parameters
    ----------
    family : callable
        ``value -> (germ, form, h)``.
    which : {'E', 'h'}
        Name of the scanned parameter (used for messages only).

    Notes
    -----
    The lifted residual ``g(v) = Re w(v) / 2 pi`` of the first cycle is
    scanned; each integer crossing is refined by ``brentq`` and accepted if
    all cycle residuals are below ``tol``.
    """
    if which not in ("E", "h"):
        raise InvalidInput("which must be 'E' or 'h'")
    if not hi > lo:
        return []

    def g(v, k=0):
        germ, form, h = family(v)
        rep = check_quantization(germ, form, h, tol)
        return rep.rows[0].winding if rep.rows else 0.0

    eps = 1e-9 * (hi - lo)
    vs = np.linspace(lo + eps, hi - eps, n_scan)
    gs = np.array([g(v) for v in vs])
    found = []
    for (v0, g0), (v1, g1) in zip(zip(vs[:-1], gs[:-1]), zip(vs[1:], gs[1:])):
        a, b = sorted((g0, g1))
        for k in range(int(np.ceil(a)), int(np.floor(b)) + 1):
            if k == g0:
                root = v0
            elif k == g1:
                continue
            else:
                root = brentq(lambda v: g(v) - k, v0, v1, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            germ, form, h = family(root)
            if check_quantization(germ, form, h, tol).holds:
                found.append(float(root))
    if len(gs) and np.isclose(gs[-1], np.round(gs[-1]), atol=0, rtol=0):
        found.append(float(vs[-1]))
    return sorted(set(found))
