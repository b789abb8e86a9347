"""Named germ families with closed-form dissipations and z-actions.

These are the fixtures used by tests, demos, the CLI and serialization:

* ``circle_germ(E)``: the energy level ``(p^2 + q^2)/2 = E`` of the harmonic
  oscillator, ``R^2 = 2E``, with ``D = (|z|^2 - R^2)^2/(4R^2)`` and
  ``Z* = R^2/z``.
* ``product_circle_germ(E1, E2)``: the torus that is the product of two circles.
* ``point_germ(n)``: the Gaussian point germ at the origin, phase ``(i/2)|q|^2``.
* ``polynomial_germ(coeffs)``: a one-dimensional germ with phase
  ``S(q) = sum c_k q^k``.
"""
from __future__ import annotations

import numpy as np

from .dissipation import Dissipation
from .errors import InvalidInput
from .fields import ScalarField, VectorField
from .germ import (Cycle, Germ, IndexSet, Sheet, ZAction, build_chart_from_zaction,
                   phase_dissipation, zaction_from_phase)

CHART_HALF_ANGLE = 3 * np.pi / 8
SHEET_HALF_WIDTH = 3 * np.pi / 4


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def _z(m, n, j):
    m = np.asarray(m)
    return m[..., n + j] - 1j * m[..., j]


# ------------------------------------------------------------ circle pieces

def _circle_parts(R2, n, j):
    """Dissipation, Z* component and sheet maker for factor ``j`` of ``n``."""

    def D(m):
        m = np.asarray(m)
        r2 = m[..., j] ** 2 + m[..., n + j] ** 2
        return (r2 - R2) ** 2 / (4 * R2)

    def Dg(m):
        m = np.asarray(m, dtype=float)
        r2 = m[j] ** 2 + m[n + j] ** 2
        g = np.zeros(2 * n, dtype=complex)
        g[j] = (r2 - R2) * m[j] / R2
        g[n + j] = (r2 - R2) * m[n + j] / R2
        return g

    def DH(m):
        m = np.asarray(m, dtype=float)
        r2 = m[j] ** 2 + m[n + j] ** 2
        H = np.zeros((2 * n, 2 * n), dtype=complex)
        idx = [j, n + j]
        v = m[idx]
        H[np.ix_(idx, idx)] = (2 * np.outer(v, v) + (r2 - R2) * np.eye(2)) / R2
        return H

    def Zs(m):
        return R2 / _z(m, n, j)

    def Zg(m):
        z = _z(m, n, j)
        g = np.zeros(2 * n, dtype=complex)
        g[j] = 1j * R2 / z ** 2
        g[n + j] = -R2 / z ** 2
        return g

    def ZH(m):
        z = _z(m, n, j)
        H = np.zeros((2 * n, 2 * n), dtype=complex)
        idx = [j, n + j]
        H[np.ix_(idx, idx)] = 2 * R2 / z ** 3 * np.array([[-1, -1j], [-1j, 1]])
        return H

    def phi(theta):
        def f(m):
            z = _z(m, n, j)
            arg = theta + _wrap(np.angle(z) - theta)
            # constant chosen so that Im Phi = -|z|^2/4 on the circle
            return (R2 / 2j) * (np.log(np.abs(z) / np.sqrt(R2)) + 0.5 + 1j * arg)

        def g(m):
            z = _z(m, n, j)
            out = np.zeros(2 * n, dtype=complex)
            out[n + j] = (R2 / 2j) / z
            out[j] = -R2 / (2 * z)
            return out

        def H(m):
            z = _z(m, n, j)
            out = np.zeros((2 * n, 2 * n), dtype=complex)
            out[n + j, n + j] = -(R2 / 2j) / z ** 2
            out[n + j, j] = out[j, n + j] = R2 / (2 * z ** 2)
            out[j, j] = -1j * R2 / (2 * z ** 2)
            return out

        return f, g, H

    return (D, Dg, DH), (Zs, Zg, ZH), phi


def _chart_spec(theta):
    """Index membership (q-chart?) of the circle chart centered at angle ``theta``."""
    k = int(round(theta / (np.pi / 2))) % 4
    return k % 2 == 1


def circle_point(R, t):
    """Point of the circle of radius ``R`` with ``z = R e^{it}``, as ``(p, q)``."""
    t = np.asarray(t, dtype=float)
    return np.stack([-R * np.sin(t), R * np.cos(t)], axis=-1)


def circle_germ(energy: float = 0.5, n_cycle: int = 400, n_samples: int = 64) -> Germ:
    """Harmonic-oscillator energy circle ``(p^2 + q^2)/2 = energy``.

    Four charts centered at ``arg z = 0, pi/2, pi, 3pi/2`` (p-, q-, p-, q-chart),
    each with its own sheet of ``Phi = (R^2/2i)(Log(z/R) + 1/2)``; the constant
    makes ``Im Phi = -|z|^2/4`` on Γ, so the chart phases are real there.  The cycle ``'a'`` runs
    in the direction of increasing ``arg z`` (the Hamiltonian flow direction)
    and carries monodromy ``pi R^2``.
    """
    if energy <= 0:
        raise InvalidInput("circle energy must be positive")
    R2 = 2.0 * energy
    R = np.sqrt(R2)
    (D, Dg, DH), (Zs, Zg, ZH), phi = _circle_parts(R2, 1, 0)
    Dfield = Dissipation(ScalarField(2, D, grad=Dg, hess=DH, name="D_circle"))
    zstar = VectorField([ScalarField(2, Zs, grad=Zg, hess=ZH, name="Z*")])
    angles = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
    sheets = []
    for k, th in enumerate(angles):
        f, g, H = phi(th)

        def dom(m, th=th):
            z = _z(m, 1, 0)
            return bool(abs(z) > 1e-12 and abs(_wrap(np.angle(z) - th)) < SHEET_HALF_WIDTH)

        sheets.append(Sheet(k, ScalarField(2, f, grad=g, hess=H, name=f"Phi_{k}"), dom))
    za = ZAction(sheets, zstar, monodromy={"a": np.pi * R2})
    hw = R * np.sin(CHART_HALF_ANGLE)
    atlas = []
    for k, th in enumerate(angles):
        base = circle_point(R, th)
        I = IndexSet.full(1) if _chart_spec(th) else IndexSet.empty(1)
        box = np.array([[-hw, hw]])
        atlas.append(build_chart_from_zaction(za, k, I, base, Dfield, box=box))
    t = np.linspace(0.0, 2 * np.pi, n_cycle + 1)
    cyc = circle_point(R, t)
    cyc[-1] = cyc[0]
    gs = circle_point(R, np.linspace(0, 2 * np.pi, n_samples, endpoint=False))

    def tangent(m):
        m = np.asarray(m, dtype=float)
        v = np.array([-m[1], m[0]])
        return (v / np.linalg.norm(v))[:, None]

    return Germ(1, Dfield, za, atlas, gs, [Cycle("a", cyc, 0)],
                family={"name": "circle", "energy": float(energy)}, tangent=tangent)


def product_circle_germ(e1: float = 0.5, e2: float = 0.5, n_cycle: int = 200) -> Germ:
    """Product of two energy circles in ``R^4``.

    Sheets are indexed ``4 k1 + k2`` by the chart angles of both factors; the
    atlas holds the sixteen product charts.  Cycles ``'a1'`` and ``'a2'`` wind
    once around each factor.
    """
    Rs2 = [2.0 * e1, 2.0 * e2]
    if min(Rs2) <= 0:
        raise InvalidInput("circle energies must be positive")
    parts = [_circle_parts(Rs2[j], 2, j) for j in range(2)]

    def D(m):
        return parts[0][0][0](m) + parts[1][0][0](m)

    def Dg(m):
        return parts[0][0][1](m) + parts[1][0][1](m)

    def DH(m):
        return parts[0][0][2](m) + parts[1][0][2](m)

    Dfield = Dissipation(ScalarField(4, D, grad=Dg, hess=DH, name="D_torus"))
    zstar = VectorField([ScalarField(4, parts[j][1][0], grad=parts[j][1][1], hess=parts[j][1][2])
                         for j in range(2)])
    angles = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
    sheets = []
    for k1, t1 in enumerate(angles):
        for k2, t2 in enumerate(angles):
            f1, g1, H1 = parts[0][2](t1)
            f2, g2, H2 = parts[1][2](t2)

            def dom(m, t1=t1, t2=t2):
                z1, z2 = _z(m, 2, 0), _z(m, 2, 1)
                return bool(min(abs(z1), abs(z2)) > 1e-12
                            and abs(_wrap(np.angle(z1) - t1)) < SHEET_HALF_WIDTH
                            and abs(_wrap(np.angle(z2) - t2)) < SHEET_HALF_WIDTH)

            sheets.append(Sheet(4 * k1 + k2, ScalarField(
                4, lambda m, f1=f1, f2=f2: f1(m) + f2(m),
                grad=lambda m, g1=g1, g2=g2: g1(m) + g2(m),
                hess=lambda m, H1=H1, H2=H2: H1(m) + H2(m)), dom))
    mono = {"a1": np.pi * Rs2[0], "a2": np.pi * Rs2[1]}
    za = ZAction(sheets, zstar, monodromy=mono)
    R = np.sqrt(Rs2)
    atlas = []
    for k1, t1 in enumerate(angles):
        for k2, t2 in enumerate(angles):
            b1, b2 = circle_point(R[0], t1), circle_point(R[1], t2)
            base = np.array([b1[0], b2[0], b1[1], b2[1]])
            mem = tuple(j for j, th in enumerate((t1, t2)) if _chart_spec(th))
            hw = R * np.sin(CHART_HALF_ANGLE)
            box = np.column_stack([-hw, hw])
            atlas.append(build_chart_from_zaction(za, 4 * k1 + k2, IndexSet(2, mem), base, Dfield,
                                                  box=box))
    t = np.linspace(0, 2 * np.pi, n_cycle + 1)
    c1 = circle_point(R[0], t)
    c2 = circle_point(R[1], t)
    f1 = circle_point(R[0], 0.0)
    f2 = circle_point(R[1], 0.0)
    cyc1 = np.column_stack([c1[:, 0], np.full_like(t, f2[0]), c1[:, 1], np.full_like(t, f2[1])])
    cyc2 = np.column_stack([np.full_like(t, f1[0]), c2[:, 0], np.full_like(t, f1[1]), c2[:, 1]])
    cyc1[-1] = cyc1[0]
    cyc2[-1] = cyc2[0]
    s = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    T1, T2 = np.meshgrid(s, s)
    P1, P2 = circle_point(R[0], T1.ravel()), circle_point(R[1], T2.ravel())
    gs = np.column_stack([P1[:, 0], P2[:, 0], P1[:, 1], P2[:, 1]])
    return Germ(2, Dfield, za, atlas, gs, [Cycle("a1", cyc1, 0), Cycle("a2", cyc2, 0)],
                family={"name": "product_circle", "energies": [float(e1), float(e2)]})


# ------------------------------------------------------------ point germ

def point_germ(n: int = 1, half_width: float = 3.0) -> Germ:
    """Gaussian point germ at the origin: ``S(q) = (i/2)|q|^2``, ``Phi = 0``, ``Z* = 0``.

    Its phase dissipation is ``D = |q|^2/2 + |p - iq|^2 = |p|^2 + 3|q|^2/2``.
    """
    n = int(n)

    def D(m):
        m = np.asarray(m)
        return np.sum(m[..., :n] ** 2, axis=-1) + 1.5 * np.sum(m[..., n:] ** 2, axis=-1)

    def Dg(m):
        m = np.asarray(m, dtype=float)
        return np.concatenate([2 * m[:n], 3 * m[n:]]).astype(complex)

    def DH(m):
        return np.diag(np.concatenate([np.full(n, 2.0), np.full(n, 3.0)])).astype(complex)

    Dfield = Dissipation(ScalarField(2 * n, D, grad=Dg, hess=DH, name="D_point"))
    zero = [ScalarField(2 * n, lambda m: np.zeros(np.asarray(m).shape[:-1], dtype=complex),
                        grad=lambda m: np.zeros(2 * n, dtype=complex),
                        hess=lambda m: np.zeros((2 * n, 2 * n), dtype=complex))
            for _ in range(n)]
    phi = ScalarField(2 * n, lambda m: np.zeros(np.asarray(m).shape[:-1], dtype=complex),
                      grad=lambda m: np.zeros(2 * n, dtype=complex),
                      hess=lambda m: np.zeros((2 * n, 2 * n), dtype=complex), name="Phi")
    za = ZAction([Sheet(0, phi)], VectorField(zero))
    base = np.zeros(2 * n)
    box = np.column_stack([np.full(n, -half_width), np.full(n, half_width)])
    chart = build_chart_from_zaction(za, 0, IndexSet.full(n), base, Dfield, box=box)
    return Germ(n, Dfield, za, [chart], base[None, :], [], family={"name": "point", "n": n, "half_width": float(half_width)},
                real_submanifold=True)


# ------------------------------------------------------------ polynomial germ

def polynomial_phase(coeffs) -> ScalarField:
    """``S(q) = sum_k c_k q^k`` on the line, with exact derivatives."""
    c = np.asarray(coeffs, dtype=complex)
    P = np.polynomial.Polynomial(c)
    P1, P2 = P.deriv(1), P.deriv(2)
    return ScalarField(1, lambda x: P(np.asarray(x)[..., 0]),
                       grad=lambda x: np.array([P1(x[0])]),
                       hess=lambda x: np.array([[P2(x[0])]]), name="S_poly")


def polynomial_germ(coeffs, center: float = 0.0, half_width: float = 1.0) -> Germ:
    """One-dimensional germ generated by the polynomial phase ``S``.

    ``Im S >= 0`` near ``center`` is required; the z-action comes from the
    phase-to-z-action formula and ``D = Im S + |p - S'|^2``.
    """
    S = polynomial_phase(coeffs)
    P3 = np.polynomial.Polynomial(np.asarray(coeffs, dtype=complex)).deriv(3)
    za = zaction_from_phase(S, 0, third=lambda q: np.array([[[P3(q[0])]]]))
    Dfield = phase_dissipation(S)
    g = S.gradient(np.array([center]))
    base = np.array([g[0].real, center])
    box = np.array([[center - half_width, center + half_width]])
    chart = build_chart_from_zaction(za, 0, IndexSet.full(1), base, Dfield, box=box)
    return Germ(1, Dfield, za, [chart], base[None, :], [],
                family={"name": "polynomial", "coefficients": [[float(v.real), float(v.imag)]
                                                               for v in np.asarray(coeffs, dtype=complex)],
                        "center": float(center), "half_width": float(half_width)},
                real_submanifold=bool(np.all(np.abs(np.imag(coeffs)) == 0)))


# ------------------------------------------------------------ volume forms

def circle_volume_form(germ: Germ, modulation: float = 0.0):
    """Density ``a = rho/(i z)`` on the circle germ, one log branch per sheet.

    ``rho = 1 + modulation (q^2 - p^2)/(q^2 + p^2)``; with ``modulation = 0``
    the form is the flow-invariant measure ``dt`` (``z = R e^{it}``).
    """
    from .canop import VolumeForm

    if abs(modulation) >= 1:
        raise InvalidInput("modulation must satisfy |modulation| < 1")

    def rho(m):
        m = np.asarray(m, dtype=float)
        p, q = m[..., 0], m[..., 1]
        return 1.0 + modulation * (q ** 2 - p ** 2) / (q ** 2 + p ** 2)

    def a(m):
        return rho(m) / (1j * _z(m, 1, 0))

    logs = {}
    for sid, sheet in germ.zaction.sheets.items():
        theta = sid * np.pi / 2

        def la(m, theta=theta):
            z = _z(m, 1, 0)
            arg = theta + _wrap(np.angle(z) - theta)
            return np.log(rho(m)) - 0.5j * np.pi - np.log(np.abs(z)) - 1j * arg

        logs[sid] = ScalarField(2, la, name=f"ln a_{sid}")
    return VolumeForm(ScalarField(2, a, name="a"), log_a=logs)
