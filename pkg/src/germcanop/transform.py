"""Complex stationary values and positive canonical transformations.

The stationary-value kernel reduces a complex phase ``F(p, q)`` with
``Im F >= 0`` over ``q``: the foot ``q(p)`` minimizes
``D_mu = Im F + (mu/2) |F_q|^2`` and the reduced phase is
``F - 1/2 <F_q, F_qq^{-1} F_q>`` there.

Canonical transformations are positive Lagrangian germs in
``R^{4n} = R^{2n}_{(p,q)} + R^{2n}_{(xi,x)}``.  This module covers the graphs
of unitary linear maps ``z = U w`` (``z = q - ip``, ``w = x - i xi``), whose
z-action is the Fock reproducing-kernel phase

    Psi(xi, x, p, q) = (1/2i) ((U^H z) . conj(w) - |w|^2)

with dissipation ``|z - U w|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._optim import newton_minimize
from ._stationary import reduced_value, stationary_foot
from .dissipation import Dissipation
from .errors import (DegenerateChart, InsufficientData, InvalidInput, NumericalFailure,
                     PositivityViolation)
from .fields import ScalarField, VectorField, eval_jet, pointwise
from .germ import (Cycle, Germ, IndexSet, Sheet, ZAction, build_chart_from_zaction,
                   chart_coords, select_nonsingular_index)


# ---------------------------------------------------------------- stationary value

@dataclass
class HessianBlocks:
    """``E = F_qq = E1 + i E2`` and ``E^{-1} = A + i B``."""

    E: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    A: np.ndarray
    B: np.ndarray


@dataclass
class StationaryResult:
    """Foot ``q(p)``, reduced dissipation ``d(p)`` and reduced phase of a stationary reduction."""

    F: ScalarField
    n_p: int
    mu: float
    p0: np.ndarray
    q0: np.ndarray
    foot: Callable
    dissipation: Dissipation
    phase: ScalarField

    def matrices(self, p=None, q=None) -> HessianBlocks:
        """Blocks of F_qq and its inverse at ``(p, q)`` (default: the base point)."""
        p = self.p0 if p is None else np.asarray(p, dtype=float)
        q = self.q0 if q is None else np.asarray(q, dtype=float)
        return hessian_blocks(self.F, self.n_p, p, q)


def hessian_blocks(F: ScalarField, n_p: int, p, q) -> HessianBlocks:
    x = np.concatenate([np.atleast_1d(p), np.atleast_1d(q)]).astype(float)
    _, _, H = eval_jet(F, x)
    E = np.asarray(H, dtype=complex)[n_p:, n_p:]
    E = 0.5 * (E + E.T)
    Einv = np.linalg.inv(E)
    A, B = Einv.real, Einv.imag
    return HessianBlocks(E, E.real, E.imag, 0.5 * (A + A.T), 0.5 * (B + B.T))


def complex_stationary_value(F: ScalarField, p0, q0, mu: float = 2.0, radius: Optional[float] = None,
                             crit_tol: float = 1e-10, n_probe: int = 32, seed: int = 0) -> StationaryResult:
    """Reduce ``F(p, q)`` over ``q`` near a critical point ``(p0, q0)``.

    Parameters
    ----------
    F : ScalarField
        Phase on ``R^{n_p} x R^{n_q}``, variables ordered ``(p, q)``.
    p0, q0 : array_like
        Base point with ``F_q = 0`` and ``det F_qq != 0``.
    mu : float
        Weight of ``|F_q|^2`` in ``D_mu``; ``mu = 2`` is the default.
    radius : float, optional
        Trust radius for the foot around ``q0``; a foot outside it is a
        Newton failure.

    Raises
    ------
    InvalidInput
        If the preconditions fail at the base point.
    PositivityViolation
        If the Hessian of ``D_mu`` is indefinite at a foot.
    NumericalFailure
        If Newton's method diverges.
    """
    if mu <= 0:
        raise InvalidInput("mu must be positive")
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    n_p, n_q = len(p0), len(q0)
    if F.dim != n_p + n_q:
        raise InvalidInput("F dimension differs from len(p0) + len(q0)")
    x0 = np.concatenate([p0, q0])
    _, g0, H0 = eval_jet(F, x0)
    if np.abs(g0[n_p:]).max(initial=0.0) > crit_tol:
        raise InvalidInput(f"F_q(p0, q0) = {np.abs(g0[n_p:]).max():.2e} is not zero")
    if abs(np.linalg.det(np.asarray(H0)[n_p:, n_p:])) < 1e-12:
        raise InvalidInput("F_qq is singular at the base point")
    rng = np.random.default_rng(seed)
    probe = x0 + 0.05 * rng.standard_normal((n_probe, len(x0)))
    imv = np.imag(np.asarray(F(probe)))
    if imv.min() < -1e-12:
        raise InvalidInput(f"Im F < 0 near the base point (min {imv.min():.2e})")
    if radius is None:
        radius = np.inf

    def jet_at(p):
        def jet(q):
            v, g, H = eval_jet(F, np.concatenate([p, q]))
            return complex(v), np.asarray(g)[n_p:], np.asarray(H)[n_p:, n_p:]
        return jet

    cache = {}

    def solve(p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        key = p.tobytes()
        if key not in cache:
            q, (v, g, H), dval = stationary_foot(jet_at(p), q0, mu=mu)
            if np.linalg.norm(q - q0) > radius:
                raise NumericalFailure(f"foot left the trust region (|q - q0| = {np.linalg.norm(q - q0):.3e})",
                                       point=q)
            cache[key] = (q, reduced_value(v, g, H), dval)
        return cache[key]

    foot = lambda p: solve(p)[0]
    d = Dissipation(pointwise(n_p, lambda p: solve(p)[2], name="d(p)"))
    phase = pointwise(n_p, lambda p: complex(solve(p)[1]), name="F~(p)")
    return StationaryResult(F, n_p, mu, p0, q0, foot, d, phase)


def dissipativity_bounds(res: StationaryResult, samples, floor: float = 1e-8):
    """Fitted ``c, C`` with ``c d <= Im F~ <= C d`` on samples with ``d >= floor``.

    Raises
    ------
    InsufficientData
        If no sample has ``d >= floor``.
    PositivityViolation
        If ``Im F~ <= 0`` where ``d >= floor`` (the witness is attached).
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[1] != res.n_p:
        pts = pts.reshape(-1, res.n_p)
    ratios, where = [], []
    for p in pts:
        d = float(res.dissipation(p))
        if d < floor:
            continue
        ratios.append(float(np.imag(res.phase(p))) / d)
        where.append(p)
    if not ratios:
        raise InsufficientData("no samples with positive reduced dissipation")
    r = np.array(ratios)
    k = int(np.argmin(r))
    if r[k] <= 0:
        raise PositivityViolation(f"Im F~ / d = {r[k]:.3e} at p = {where[k]}", witness=where[k])
    return float(r.min()), float(r.max())


# ---------------------------------------------------------------- canonical transforms

def _quadratic_matrix(f, dim):
    """Complex symmetric ``M`` with ``f(v) = 1/2 v^T M v`` for a quadratic form ``f``."""
    e = np.eye(dim)
    diag = np.array([f(e[i]) for i in range(dim)], dtype=complex)
    M = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        M[i, i] = 2 * diag[i]
        for j in range(i + 1, dim):
            M[i, j] = M[j, i] = f(e[i] + e[j]) - diag[i] - diag[j]
    return M


def _complex(v, n):
    """``q - i p`` from a real vector ordered ``(p, q)``."""
    return v[n:2 * n] - 1j * v[:n]


def _real(z):
    return np.concatenate([-z.imag, z.real])


@dataclass
class CanonicalTransform:
    """Positive canonical transformation given by the graph of ``z = U w``.

    Attributes
    ----------
    U : ndarray
        Unitary ``n x n`` matrix.
    psi : ScalarField
        Z-action of the graph on ``R^{4n}``, variables ``(xi, x, p, q)``.
    delta : ScalarField
        Dissipation ``|z - U w|^2`` of the graph.
    witnesses : dict
        Determinants of the projections of Γ_Λ to ``(p, q)`` and ``(xi, x)``.
    """

    U: np.ndarray
    name: str = "unitary"
    psi: ScalarField = field(init=False)
    delta: ScalarField = field(init=False)
    witnesses: dict = field(init=False)

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=complex))
        n = U.shape[0]
        if U.shape != (n, n) or not np.allclose(U.conj().T @ U, np.eye(n), atol=1e-12):
            raise InvalidInput("U must be a square unitary matrix")
        self.U = U
        self.n = n
        self._R = self._real_matrix()

        def psi_val(v):
            w, z = _complex(v[:2 * n], n), _complex(v[2 * n:], n)
            return (U.conj().T @ z) @ w.conj() / 2j - (w @ w.conj()) / 2j

        def delta_val(v):
            w, z = _complex(v[:2 * n], n), _complex(v[2 * n:], n)
            r = z - U @ w
            return float(np.real(r @ r.conj()))

        self._Mpsi = _quadratic_matrix(psi_val, 4 * n)
        self._Mdelta = _quadratic_matrix(delta_val, 4 * n).real
        Mp, Md = self._Mpsi, self._Mdelta
        vec = lambda f: (lambda v: np.einsum("...i,ij,...j->...", v, f, v) / 2)
        self.psi = ScalarField(4 * n, vec(Mp), grad=lambda v: Mp @ v, hess=lambda v: Mp.copy(), name="Psi")
        self.delta = ScalarField(4 * n, vec(Md), grad=lambda v: (Md @ v).astype(complex),
                                 hess=lambda v: Md.astype(complex), name="delta")
        # coordinate conditions on Γ_Λ: both projections of the graph are nonsingular
        self.witnesses = {"det_pq": float(np.linalg.det(self._R)), "det_xix": 1.0}
        if abs(self.witnesses["det_pq"]) < 1e-12:
            raise InvalidInput("the (p, q) projection of the graph is singular")

    @classmethod
    def identity(cls, n: int = 1):
        return cls(np.eye(n), name="identity")

    @classmethod
    def quarter_turn(cls, n: int = 1):
        """Harmonic flow for time ``pi/2``: ``q' = xi``, ``p' = -x``."""
        return cls(1j * np.eye(n), name="quarter_turn")

    def _real_matrix(self):
        n = self.U.shape[0]
        R = np.zeros((2 * n, 2 * n))
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = 1.0
            R[:, i] = _real(self.U @ _complex(e, n))
        return R

    def forward(self, w):
        """Image points ``(p, q)`` of real source points ``(xi, x)``."""
        return np.asarray(w, dtype=float) @ self._R.T

    def inverse(self, m):
        return np.asarray(m, dtype=float) @ np.linalg.inv(self._R).T

    @property
    def log_det(self) -> complex:
        """Principal ``ln det U``."""
        return complex(np.log(np.linalg.det(self.U)))

    def check_coordinates(self, samples_w) -> dict:
        """Projection Jacobians at sampled graph points (constant for linear graphs)."""
        dets = [float(np.linalg.det(self._R)) for _ in np.atleast_2d(samples_w)]
        if min(abs(d) for d in dets) < 1e-12:
            raise InvalidInput("coordinate condition fails on Γ_Λ")
        return {"det_pq": dets, "det_xix": [1.0] * len(dets)}


class _Pushforward:
    """Foot, image dissipation and image z-action sheets of ``g[L]``."""

    def __init__(self, g: CanonicalTransform, L: Germ):
        self.g, self.L = g, L
        self.n = L.n
        self._foot_cache = {}

    def foot(self, m):
        m = np.asarray(m, dtype=float)
        key = m.tobytes()
        if key in self._foot_cache:
            return self._foot_cache[key]
        n2 = 2 * self.n
        Md = self.g._Mdelta
        D = self.L.dissipation

        def jet(w):
            v, gD, HD = D.jet(w)
            vv = np.concatenate([w, m])
            gd = Md @ vv
            val = float(np.real(v)) + 0.5 * vv @ Md @ vv
            return val, np.real(gD) + gd[:n2], np.real(HD) + Md[:n2, :n2]

        w, val, _ = newton_minimize(jet, self.g.inverse(m), check_pd=False)
        out = (w, float(val))
        if len(self._foot_cache) > 200000:
            self._foot_cache.clear()
        self._foot_cache[key] = out
        return out

    def dissipation(self) -> Dissipation:
        n2 = 2 * self.n
        Md = self.g._Mdelta

        def value(m):
            return self.foot(m)[1]

        def grad(m):
            # envelope theorem: only the explicit m-dependence of delta survives
            w, _ = self.foot(m)
            vv = np.concatenate([w, np.asarray(m, dtype=float)])
            return (Md @ vv)[n2:].astype(complex)

        return Dissipation(ScalarField(n2, lambda x: _vectorize(value, x, n2), grad=grad, name="g[D]"))

    def _jets(self, sheet_id, m):
        n2 = 2 * self.n
        m = np.asarray(m, dtype=float)
        w, _ = self.foot(m)
        vv = np.concatenate([w, m])
        Mp = self.g._Mpsi
        phi = self.L.zaction.sheets[sheet_id].phi
        v, gP, HP = eval_jet(phi, w)
        F = complex(v) + 0.5 * vv @ Mp @ vv
        gF = Mp @ vv
        Fw = np.asarray(gP) + gF[:n2]
        Fww = np.asarray(HP) + Mp[:n2, :n2]
        Fwm = Mp[:n2, n2:]
        return F, Fw, Fww, gF[n2:], Fwm

    def phi_value(self, sheet_id, m):
        F, Fw, Fww, _, _ = self._jets(sheet_id, m)
        return complex(reduced_value(F, Fw, Fww))

    def phi_grad(self, sheet_id, m):
        _, Fw, Fww, Fm, Fwm = self._jets(sheet_id, m)
        try:
            sol = np.linalg.solve(Fww, Fw)
        except np.linalg.LinAlgError as exc:
            raise DegenerateChart("F_ww is singular at the foot") from exc
        return Fm - Fwm.T @ sol

    def zstar(self, m):
        n = self.n
        sid = self.L.zaction.sheet_at(self.g.inverse(m))
        gr = self.phi_grad(sid, m)
        return 1j * gr[n:] - gr[:n]


def _vectorize(fn, x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return fn(x)
    flat = x.reshape(-1, dim)
    return np.array([fn(v) for v in flat]).reshape(x.shape[:-1])


def push_volume_form(g: CanonicalTransform, form):
    """Density of the pushed form: ``a'(m) = a(g^{-1} m) / det U``.

    For a linear graph ``dz'(Dg V) = U dz(V)``, so
    ``a' = a det dz(V) / det dz'(Dg V) = a / det U`` and each sheet's
    logarithm shifts by the constant ``ln det U``.
    """
    from .canop import VolumeForm

    n2 = 2 * g.n
    inv = np.linalg.inv(g._R)
    ld = g.log_det
    dU = np.exp(ld)

    def pull(fn):
        return lambda m: fn(np.asarray(m, dtype=float) @ inv.T)

    def wrap_a(f):
        return ScalarField(n2, lambda m: np.asarray(pull(f)(m)) / dU, name="a'")

    def wrap_log(f):
        return ScalarField(n2, lambda m: np.asarray(pull(f)(m)) - ld, name="ln a'")

    a = {k: wrap_a(v) for k, v in form._a.items()} if isinstance(form._a, dict) else wrap_a(form._a)
    if form._log is None:
        base, val = form._base
        return VolumeForm(a, ln_branch_base=(g.forward(base), val - ld))
    logs = ({k: wrap_log(v) for k, v in form._log.items()} if isinstance(form._log, dict)
            else wrap_log(form._log))
    return VolumeForm(a, log_a=logs)


def apply_canonical_transform(g: CanonicalTransform, L: Germ, check: bool = True) -> Germ:
    """Image germ ``g[L]``.

    ``g[D](m) = min_w D(w) + delta(w, m)``; ``g[Phi]`` is the reduced value of
    ``F = Phi(w) + Psi(w, m)`` at that foot and ``Z*`` follows from the
    envelope gradient.  Charts are rebuilt from ``(g[D], g[Phi])`` around the
    images of the original chart centers, with index sets chosen from the
    pushed tangent spaces.

    Raises
    ------
    InvalidInput
        If Γ_L is not inside the source projection of Γ_Λ.
    """
    if g.n != L.n:
        raise InvalidInput("transform and germ dimensions differ")
    n, n2 = L.n, 2 * L.n
    push = _Pushforward(g, L)
    if check:
        g.check_coordinates(L.gamma_samples)
    Dn = push.dissipation()

    sheets = []
    for sid, s in L.zaction.sheets.items():
        phi = ScalarField(n2, lambda m, sid=sid: _vectorize(lambda x: push.phi_value(sid, x), m, n2),
                          grad=lambda m, sid=sid: push.phi_grad(sid, m), name=f"g[Phi_{sid}]")
        dom = (lambda m, s=s: s.domain(g.inverse(m)))
        sheets.append(Sheet(sid, phi, dom))
    zs = VectorField([pointwise(n2, lambda m, j=j: complex(push.zstar(m)[j]), name=f"g[Z*]_{j}")
                      for j in range(n)])
    za = ZAction(sheets, zs, monodromy=dict(L.zaction.monodromy))

    tangent = None
    if L.tangent is not None:
        tangent = lambda m: g._R @ L.tangent(g.inverse(m))

    atlas = []
    for ch in L.atlas:
        c = ch.center if ch.center is not None else ch.foot(ch.box.mean(axis=1))
        cn = g.forward(c)
        if tangent is not None:
            T = tangent(cn)
            I = select_nonsingular_index(T[:n], T[n:])
        else:
            I = ch.I
        half = 0.5 * (ch.box[:, 1] - ch.box[:, 0])
        yb = chart_coords(I, cn)
        box = np.column_stack([yb - half, yb + half])
        atlas.append(build_chart_from_zaction(za, ch.sheet_id, I, cn, Dn, box=box))

    cycles = [Cycle(c.cycle_id, g.forward(c.points), c.start_sheet) for c in L.cycles]
    fam = {"name": "transformed", "transform": g.name, "U": np.asarray(g.U).tolist(), "base": L.family}
    out = Germ(n, Dn, za, atlas, g.forward(L.gamma_samples), cycles, family=fam,
               real_submanifold=L.real_submanifold, tangent=tangent)
    return out


def transform_nonsingular_phase(S: ScalarField, S1: ScalarField, xi0, mu: float = 2.0) -> ScalarField:
    """Nonsingular phase ``S_2(q)`` of the image of a germ with phase ``S(xi)``.

    ``Λ`` is given by a phase ``S_1(xi, q)`` (variables ordered ``(xi, q)``);
    ``F(q, xi) = S_1(xi, q) + S(xi)`` is reduced over ``xi`` with the
    stationary kernel.  The identity transform has ``S_1 = q . xi``.
    """
    n = S.dim
    if S1.dim != 2 * n:
        raise InvalidInput("S1 must be a function of (xi, q)")
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))

    def value(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))

        def jet(xi):
            v1, g1, H1 = eval_jet(S1, np.concatenate([xi, q]))
            v, gs, Hs = eval_jet(S, xi)
            return (complex(v1 + v), np.asarray(g1)[:n] + np.asarray(gs),
                    np.asarray(H1)[:n, :n] + np.asarray(Hs))

        xi, (F, gF, HF), _ = stationary_foot(jet, xi0, mu=mu)
        return complex(reduced_value(F, gF, HF))

    return pointwise(n, value, name="S_2")
