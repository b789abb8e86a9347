"""Positive asymptotic Lagrangian germs: index sets, charts, I-phases and z-actions.

Phase-space points are stored as ``m = (p_1..p_n, q_1..q_n)`` and the complex
coordinate is ``z = q - i p``.  A chart with index set ``I`` uses the
coordinates ``y = (q_I, p_Ibar)`` kept in natural index order, i.e. the
position part of the rotation ``gamma_I(p, q) = ((p_I, -q_Ibar), (q_I, p_Ibar))``.
The derivative of the I-phase is then ``dS_I/dy = (p_I, -q_Ibar)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ._optim import newton_minimize
from ._stationary import reduced_value, stationary_foot
from .dissipation import Dissipation
from .errors import (BranchFailure, DegenerateChart, InsufficientData, InvalidInput,
                     NumericalFailure, PositivityViolation)
from .fields import ScalarField, VectorField, eval_jet, pointwise


# ---------------------------------------------------------------- index sets

@dataclass(frozen=True)
class IndexSet:
    """A subset ``I`` of ``{0, .., n-1}`` (zero-based) and its complement."""

    n: int
    members: Tuple[int, ...] = ()

    def __post_init__(self):
        mem = tuple(sorted(set(int(i) for i in self.members)))
        if any(i < 0 or i >= self.n for i in mem):
            raise InvalidInput(f"index set members {mem} out of range for n={self.n}")
        object.__setattr__(self, "members", mem)

    @classmethod
    def full(cls, n):
        return cls(n, tuple(range(n)))

    @classmethod
    def empty(cls, n):
        return cls(n, ())

    @property
    def complement(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n) if i not in self.members)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.members)] = True
        return m

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        return f"IndexSet(n={self.n}, I={set(i + 1 for i in self.members) or '{}'})"

    # indices into m = (p, q) of the chart coordinates y and fibre variables u
    def y_index(self) -> np.ndarray:
        return np.where(self.mask, np.arange(self.n) + self.n, np.arange(self.n))

    def u_index(self) -> np.ndarray:
        return np.where(self.mask, np.arange(self.n), np.arange(self.n) + self.n)


def gamma(I: IndexSet, m):
    """Rotate ``m = (p, q)`` to ``(p', q') = ((p_I, -q_Ibar), (q_I, p_Ibar))``."""
    m = np.asarray(m)
    n = I.n
    p, q = m[..., :n], m[..., n:]
    mk = I.mask
    pp = np.where(mk, p, -q)
    qq = np.where(mk, q, p)
    return np.concatenate([pp, qq], axis=-1)


def gamma_inv(I: IndexSet, mp):
    """Inverse of :func:`gamma`."""
    mp = np.asarray(mp)
    n = I.n
    pp, qq = mp[..., :n], mp[..., n:]
    mk = I.mask
    p = np.where(mk, pp, qq)
    q = np.where(mk, qq, -pp)
    return np.concatenate([p, q], axis=-1)


def chart_coords(I: IndexSet, m):
    """Chart coordinates ``y = (q_I, p_Ibar)`` of a phase-space point."""
    return np.asarray(m)[..., I.y_index()]


def assemble(I: IndexSet, y, u):
    """Phase-space point with chart coordinates ``y`` and fibre part ``u = (p_I, q_Ibar)``."""
    m = np.empty(2 * I.n, dtype=float)
    m[I.y_index()] = y
    m[I.u_index()] = u
    return m


def select_nonsingular_index(dP, dQ) -> IndexSet:
    """Index set maximizing ``|det d(Q_I, P_Ibar)/d alpha|``.

    Ties (relative 1e-12) go to the lexicographically smallest ``I``.

    Raises
    ------
    DegenerateChart
        If every determinant is below 1e-12.
    """
    dP = np.atleast_2d(np.asarray(dP, dtype=complex))
    dQ = np.atleast_2d(np.asarray(dQ, dtype=complex))
    n, mdim = dQ.shape
    if dP.shape != dQ.shape:
        raise InvalidInput("dP and dQ must have the same shape")
    if mdim != n:
        raise InvalidInput("a Lagrangian chart needs m = n parameters")
    if n > 12:
        raise InvalidInput("exhaustive index selection supports n <= 12")
    if np.linalg.matrix_rank(np.vstack([dP, dQ]), tol=1e-10) < n:
        raise DegenerateChart("rank of (dP, dQ) is below n")
    subsets = []
    for k in range(n + 1):
        subsets.extend(itertools.combinations(range(n), k))
    subsets.sort()
    best, best_val = None, -1.0
    for s in subsets:
        mk = np.zeros(n, dtype=bool)
        mk[list(s)] = True
        M = np.where(mk[:, None], dQ, dP)
        v = abs(np.linalg.det(M))
        if v > best_val * (1.0 + 1e-12) + 1e-300:
            best, best_val = s, v
    if best_val < 1e-12:
        raise DegenerateChart("all index-set determinants vanish")
    return IndexSet(n, best)


# ---------------------------------------------------------------- charts

@dataclass
class IChart:
    """An I-nonsingular chart: the I-phase ``S_I`` and its dissipation ``d_I``.

    Attributes
    ----------
    I : IndexSet
    S : ScalarField
        I-phase on the ``y = (q_I, p_Ibar)`` space.
    d : Dissipation
        ``d_I`` on the same space.
    box : ndarray, shape (n, 2)
        Domain box in ``y``.
    sheet_id : int
    foot : callable, optional
        ``y -> m``, the phase-space point over ``y`` minimizing ``D``.
    center : ndarray, optional
        Phase-space point the chart was built around.
    """

    I: IndexSet
    S: ScalarField
    d: Dissipation
    box: np.ndarray
    sheet_id: int = 0
    foot: Optional[Callable] = None
    center: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.I.n

    def in_box(self, y, shrink=1.0):
        y = np.asarray(y, dtype=float)
        c = self.box.mean(axis=1)
        r = 0.5 * (self.box[:, 1] - self.box[:, 0]) * shrink
        return bool(np.all(np.abs(y - c) <= r))

    def covers(self, m, tol=1e-6, shrink=1.0):
        """True if ``m`` lies in the box and on the branch of Γ this chart sees."""
        y = chart_coords(self.I, m)
        if not self.in_box(y, shrink):
            return False
        if self.foot is None:
            return True
        try:
            mf = self.foot(y)
        except Exception:
            return False
        return bool(np.linalg.norm(mf - np.asarray(m)) <= tol * max(1.0, np.linalg.norm(m)))

    def point(self, y):
        """Real phase-space point ``gamma_I^{-1}(Re dS_I/dy, y)``."""
        g = np.real(self.S.gradient(y))
        return gamma_inv(self.I, np.concatenate([g, np.asarray(y, dtype=float)]))


@dataclass
class LagrangianChart:
    """A Lagrangian chart ``(U, d, P, Q, W)`` with parameter ``alpha`` in a box.

    ``P`` and ``Q`` are callables ``alpha -> C^n``; ``W`` and ``d`` are scalar
    callables.  Jacobians are taken by central differences.
    """

    box: np.ndarray
    d: Callable
    P: Callable
    Q: Callable
    W: Callable
    step: float = 1e-6

    def jac(self, f, a):
        a = np.asarray(a, dtype=float)
        cols = []
        for i in range(len(a)):
            e = np.zeros(len(a))
            e[i] = self.step * max(1.0, abs(a[i]))
            cols.append((np.asarray(f(a + e)) - np.asarray(f(a - e))) / (2 * e[i]))
        return np.array(cols).T

    @classmethod
    def from_ichart(cls, chart: IChart) -> "LagrangianChart":
        """Lagrangian chart parametrized by the chart coordinates themselves."""
        I = chart.I
        mk = I.mask

        def PQ(y):
            g = chart.S.gradient(y)
            y = np.asarray(y, dtype=complex)
            P = np.where(mk, g, y)
            Q = np.where(mk, y, -g)
            return P, Q

        def W(y):
            P, Q = PQ(y)
            return chart.S.value(y) + np.sum(np.where(mk, 0.0, P * Q))

        return cls(np.asarray(chart.box, dtype=float), lambda y: float(chart.d(np.asarray(y))),
                   lambda y: PQ(y)[0], lambda y: PQ(y)[1], W)


@dataclass
class ConsistencyReport:
    """Residuals of the chart consistency conditions on matched samples."""

    passed: bool
    dissipation_ratio: Tuple[float, float]
    pq_residual: float
    symplectic_residual: float
    w_constant: complex
    w_residual: float
    matched: np.ndarray


def consistency_check(r: LagrangianChart, rt: LagrangianChart, samples, identification=None,
                      match_tol=1e-6, bound=10.0, floor=1e-12) -> ConsistencyReport:
    """Check that two Lagrangian charts are consistent on matched samples.

    Parameters
    ----------
    identification : callable, optional
        ``alpha -> alpha~``.  If omitted it is fitted by nearest-point matching
        of ``(P, Q)`` from several starts; distinct admissible matches are
        reported as an error rather than resolved.
    bound : float
        Tolerance on normalized residuals (``|.|/d^k``).

    Raises
    ------
    InvalidInput
        If a sample has no matching point in the other chart, or the fitted
        identification is ambiguous.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise InvalidInput("no samples")

    def pq(ch, a):
        return np.concatenate([np.asarray(ch.P(a)), np.asarray(ch.Q(a))])

    matched, dr, pqr, sr, wd, ds = [], [], [], [], [], []
    for a in samples:
        target = pq(r, a)
        if identification is not None:
            at = np.asarray(identification(a), dtype=float)
        else:
            lo, hi = rt.box[:, 0], rt.box[:, 1]
            x0 = np.clip(a, lo, hi)

            def res(b):
                v = pq(rt, b) - target
                return np.concatenate([v.real, v.imag])

            starts = [x0] + [lo + t * (hi - lo) for t in (0.1, 0.5, 0.9)]
            sols = [least_squares(res, x, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15).x
                    for x in starts]
            gaps = [np.linalg.norm(pq(rt, b) - target) for b in sols]
            at = sols[int(np.argmin(gaps))]
        d0 = r.d(a)
        gap = np.linalg.norm(pq(rt, at) - target)
        if identification is None:
            ok = [b for b, g in zip(sols, gaps) if g <= match_tol + bound * np.sqrt(max(d0, 0.0))]
            width = np.max(hi - lo)
            if any(np.linalg.norm(b - at) > 1e-3 * width for b in ok):
                raise InvalidInput(f"identification is ambiguous at sample {a}: "
                                   f"{len(ok)} matches, supply it explicitly")
        if gap > match_tol + bound * np.sqrt(max(d0, 0.0)):
            raise InvalidInput(f"zero images do not overlap at sample {a} (gap {gap:.2e})")
        matched.append(at)
        dt = rt.d(at)
        ds.append(d0)
        if d0 > floor:
            dr.append(dt / d0)
        P, Q = np.asarray(r.P(a)), np.asarray(r.Q(a))
        Pt, Qt = np.asarray(rt.P(at)), np.asarray(rt.Q(at))
        half = np.sqrt(max(d0, floor))
        pqr.append(max(np.abs(P - Pt).max(), np.abs(Q - Qt).max()) / half)
        dQ = r.jac(r.Q, a)
        dP = r.jac(r.P, a)
        form = (Pt - P) @ dQ - (Qt - Q) @ dP
        sr.append(np.abs(form).max() / max(d0, floor ** 0.5))
        wd.append(rt.W(at) - r.W(a) - 0.5 * np.dot(P + Pt, Qt - Q))
    ds = np.array(ds)
    wd = np.array(wd)
    k0 = int(np.argmin(ds))
    const = complex(wd[k0])
    wres = float(np.max(np.abs(wd - const) / np.maximum(ds, floor ** (2 / 3)) ** 1.5))
    ratio = (float(min(dr)), float(max(dr))) if dr else (1.0, 1.0)
    passed = (ratio[0] > 0 and ratio[1] < np.inf and max(pqr) <= bound
              and max(sr) <= bound and wres <= bound)
    return ConsistencyReport(bool(passed), ratio, float(max(pqr)), float(max(sr)), const, wres,
                             np.array(matched))


# ---------------------------------------------------------------- z-action

@dataclass
class Sheet:
    """One branch ``Phi`` of the z-action over the region where ``domain(m)`` holds."""

    sheet_id: int
    phi: ScalarField
    domain: Callable = field(default=lambda m: True)


class ZAction:
    """A z-action: branches of ``Phi`` sharing one ``Z* = 2i dPhi/dz``.

    Parameters
    ----------
    sheets : sequence of Sheet
    zstar : VectorField
        ``R^{2n} -> C^n``.
    monodromy : dict, optional
        ``cycle_id -> Delta Phi``.
    """

    def __init__(self, sheets: Sequence[Sheet], zstar: VectorField, monodromy=None):
        self.sheets: Dict[int, Sheet] = {s.sheet_id: s for s in sheets}
        if not self.sheets:
            raise InvalidInput("a z-action needs at least one sheet")
        self.zstar = zstar
        self.monodromy: Dict = dict(monodromy or {})
        self.n = zstar.codim
        if zstar.dim != 2 * self.n:
            raise InvalidInput("Z* must map R^{2n} to C^n")

    def phi(self, sheet_id, m) -> complex:
        return self.sheets[sheet_id].phi.value(m)

    def sheet_at(self, m, prefer=None) -> int:
        if prefer is not None and self.sheets[prefer].domain(m):
            return prefer
        for sid, s in self.sheets.items():
            if s.domain(m):
                return sid
        raise BranchFailure(f"no sheet of the z-action covers {m}")

    def zstar_jet(self, m):
        """``Z*(m)`` and its Jacobian ``(n, 2n)``."""
        m = np.asarray(m, dtype=float)
        vals = np.asarray(self.zstar(m), dtype=complex).reshape(self.n)
        return vals, self.zstar.jacobian(m)

    def variation(self, points, start_sheet=None) -> complex:
        """Sum of increments of ``Phi`` along a polyline, hopping between sheets."""
        pts = np.asarray(points, dtype=float)
        sid = self.sheet_at(pts[0], start_sheet)
        total = 0.0 + 0.0j
        for a, b in zip(pts[:-1], pts[1:]):
            if not (self.sheets[sid].domain(a) and self.sheets[sid].domain(b)):
                cands = [k for k, s in self.sheets.items() if s.domain(a) and s.domain(b)]
                if not cands:
                    raise BranchFailure(f"no sheet covers the step {a} -> {b}")
                sid = cands[0]
            ph = self.sheets[sid].phi
            total += ph.value(b) - ph.value(a)
        return total

    def invariant_residuals(self, D: Dissipation, samples, floor=1e-14):
        """Normalized residuals of the z-action conditions on samples.

        Returns
        -------
        dict
            ``'form'``: max ``|dPhi - (1/2i) Z* dz| / D``;
            ``'zbar'``: max ``|zbar - Z*| / D^{1/2}``.
        """
        n = self.n
        form, zb = [], []
        for m in np.atleast_2d(samples):
            sid = self.sheet_at(m)
            _, g, _ = eval_jet(self.sheets[sid].phi, m)
            zs = np.asarray(self.zstar(m), dtype=complex).reshape(n)
            p, q = m[:n], m[n:]
            # (1/2i) Z* dz with dz = dq - i dp
            expected = np.concatenate([zs * (-1j) / 2j, zs / 2j])
            d = max(float(D(m)), floor)
            form.append(np.abs(g - expected).max() / d)
            zb.append(np.abs((q + 1j * p) - zs).max() / np.sqrt(d))
        return {"form": float(max(form)), "zbar": float(max(zb))}


def zstar_from_phi(phi: ScalarField, n: int) -> VectorField:
    """``Z* = i Phi_q - Phi_p`` as a difference-quotient vector field."""

    def comp(j):
        return pointwise(2 * n, lambda m: complex(1j * eval_jet(phi, m)[1][n + j]
                                                  - eval_jet(phi, m)[1][j]))

    return VectorField([comp(j) for j in range(n)])


def zaction_from_phase(S: ScalarField, sheet_id=0, third: Optional[Callable] = None,
                       domain: Optional[Callable] = None) -> ZAction:
    """z-action of the germ generated by a nonsingular phase ``S(q)``.

    With ``w = p - S'``, ``K = (1 - i S'')^{-1}`` and ``delta = -i K w``::

        Phi = S - p.q/2 + (q.q + 2 p.S' - S'.S')/(4i) - (1/4i) <w, K (1 + iS'') w>
              - 1/4 sum_j (q + iS')_j S'''_jkl delta_k delta_l
        Z*  = q + iS' - i (1 + iS'') K w

    Parameters
    ----------
    third : callable, optional
        ``q -> S'''`` of shape ``(n, n, n)``; central differences of the
        Hessian otherwise.

    Raises
    ------
    PositivityViolation
        If ``1 - i S''`` is singular.
    """
    n = S.dim
    h3 = 1e-4

    def S3(q):
        if third is not None:
            return np.asarray(third(q), dtype=complex)
        T = np.zeros((n, n, n), dtype=complex)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h3 * max(1.0, abs(q[i]))
            T[i] = (S.hessian(q + e) - S.hessian(q - e)) / (2 * e[i])
        return T

    def parts(m):
        m = np.asarray(m, dtype=float)
        p, q = m[:n], m[n:]
        s, g, H = eval_jet(S, q)
        A = np.eye(n) - 1j * H
        if abs(np.linalg.det(A)) < 1e-14:
            raise PositivityViolation("1 - i S'' is singular", witness=m)
        w = p - g
        Kw = np.linalg.solve(A, w)
        return p, q, s, g, H, w, Kw

    def phi(m):
        p, q, s, g, H, w, Kw = parts(m)
        val = s - p @ q / 2 + (q @ q + 2 * p @ g - g @ g) / 4j
        val -= (w @ ((np.eye(n) + 1j * H) @ Kw)) / 4j
        delta = -1j * Kw
        val -= 0.25 * np.einsum("j,jkl,k,l->", q + 1j * g, S3(q), delta, delta)
        return complex(val)

    def zs(j):
        def f(m):
            p, q, s, g, H, w, Kw = parts(m)
            return complex((q + 1j * g - 1j * (np.eye(n) + 1j * H) @ Kw)[j])
        return pointwise(2 * n, f)

    sheet = Sheet(sheet_id, pointwise(2 * n, phi, name="Phi"), domain or (lambda m: True))
    return ZAction([sheet], VectorField([zs(j) for j in range(n)]))


def phase_dissipation(S: ScalarField) -> Dissipation:
    """``D(p, q) = Im S(q) + |p - S'(q)|^2`` for a nonsingular phase."""
    n = S.dim

    def f(m):
        m = np.asarray(m, dtype=float)
        s, g, _ = eval_jet(S, m[n:])
        return float(s.imag + np.sum(np.abs(m[:n] - g) ** 2))

    return Dissipation(pointwise(2 * n, f, name="D"))


def _foot_solver(D: Dissipation, I: IndexSet):
    yi, ui = I.y_index(), I.u_index()

    def solve(y, u0):
        def jet(u):
            m = assemble(I, y, u)
            v, g, H = D.jet(m)
            return v, g[ui], H[np.ix_(ui, ui)]
        u, _, _ = newton_minimize(jet, u0, max_iter=80)
        return assemble(I, y, u)

    return solve


def build_chart_from_zaction(za: ZAction, sheet_id, I: IndexSet, base, D: Dissipation,
                             box=None, half_width=0.5) -> IChart:
    """I-phase and ``d_I`` of the germ presented by ``(D, Phi)``.

    At the foot ``m*`` minimizing ``D`` over ``(p_I, q_Ibar)`` with ``y`` fixed,
    ``Q = (Z* + z)/2``, ``P = (Z* - z)/(2i)``,
    ``W = Phi + P.Q/2 - (P.P + Q.Q)/(4i)``.  In rotated variables
    ``Y = (Q_I, P_Ibar)``, ``Pi = (P_I, -Q_Ibar)`` the matrix ``E`` fits
    ``dPi = E dY`` and

    ``S_I(y) = W - P_Ibar.Q_Ibar + <Pi, y - Y> + 1/2 <y - Y, E (y - Y)>``,
    ``d_I(y) = D(m*)``.  The returned phase reports the chart-data
    derivatives ``Pi + E (y - Y)`` and ``E``.

    Raises
    ------
    NumericalFailure
        If the foot minimization fails.
    DegenerateChart
        If the ``E`` fit is singular.
    """
    n = I.n
    base = np.asarray(base, dtype=float)
    yb = chart_coords(I, base)
    u0 = base[I.u_index()]
    if box is None:
        box = np.column_stack([yb - half_width, yb + half_width])
    box = np.asarray(box, dtype=float)
    solve = _foot_solver(D, I)
    mk = I.mask
    cache: Dict[bytes, tuple] = {}

    def foot(y):
        y = np.asarray(y, dtype=float)
        return solve(y, u0)

    def data(y):
        y = np.asarray(y, dtype=float)
        key = y.tobytes()
        if key in cache:
            return cache[key]
        m = foot(y)
        p, q = m[:n], m[n:]
        z = q - 1j * p
        zs, J = za.zstar_jet(m)
        dz = np.hstack([-1j * np.eye(n), np.eye(n)])
        Q = (zs + z) / 2
        P = (zs - z) / 2j
        dQ = (J + dz) / 2
        dP = (J - dz) / 2j
        W = za.phi(sheet_id, m) + P @ Q / 2 - (P @ P + Q @ Q) / 4j
        W_I = W - np.sum(np.where(mk, 0.0, P * Q))
        Y = np.where(mk, Q, P)
        Pi = np.where(mk, P, -Q)
        dY = np.where(mk[:, None], dQ, dP)
        dPi = np.where(mk[:, None], dP, -dQ)
        G = dY @ dY.conj().T
        if np.linalg.cond(G) > 1e12:
            raise DegenerateChart(f"rotated Jacobian is singular at y={y}")
        E = dPi @ dY.conj().T @ np.linalg.inv(G)
        E = 0.5 * (E + E.T)
        out = (m, W_I, Y, Pi, E)
        if len(cache) > 4096:
            cache.clear()
        cache[key] = out
        return out

    def S_val(y):
        m, W_I, Y, Pi, E = data(y)
        r = np.asarray(y, dtype=float) - Y
        return complex(W_I + Pi @ r + 0.5 * r @ E @ r)

    def d_val(y):
        return float(D(data(y)[0]))

    def S_grad(y):
        m, W_I, Y, Pi, E = data(y)
        return Pi + E @ (np.asarray(y, dtype=float) - Y)

    def S_hess(y):
        return data(y)[4]

    # derivatives from the chart data; exact on a real Γ, O(d^{1/2}) otherwise
    S_I = pointwise(n, S_val, grad=S_grad, hess=S_hess, name=f"S_{I}")
    d_I = Dissipation(pointwise(n, d_val, name=f"d_{I}"))
    return IChart(I, S_I, d_I, box, sheet_id, foot=foot, center=base)


def transition_phase(S: ScalarField, I: IndexSet, base_q, mu=2.0) -> ScalarField:
    """I-phase obtained from a full q-phase ``S(q)``.

    ``S_I(y) = F - 1/2 <F_w, F_ww^{-1} F_w>`` with
    ``F(w; y) = S(q_I, w) - w.p_Ibar`` and the foot ``w = q_Ibar`` chosen by
    minimizing ``Im F + (mu/2)|F_w|^2``.

    Raises
    ------
    DegenerateChart
        If ``d^2 S/dq_Ibar^2`` is singular at the foot.
    """
    n = S.dim
    if I.n != n:
        raise InvalidInput("index set dimension mismatch")
    Ib = list(I.complement)
    if not Ib:
        return S
    mk = I.mask
    w0 = np.asarray(base_q, dtype=float)[Ib]

    def value(y):
        y = np.asarray(y, dtype=float)
        pb = y[Ib]

        def jet(w):
            q = np.where(mk, y, 0.0)
            q[Ib] = w
            s, g, H = eval_jet(S, q)
            return s - w @ pb, g[Ib] - pb, H[np.ix_(Ib, Ib)]

        w, (F, g, H), _ = stationary_foot(jet, w0, mu=mu)
        return complex(reduced_value(F, g, H))

    return pointwise(n, value, name=f"S_{I}")


def positivity_check(chart, samples, floor=1e-14):
    """Fit ``c d_I <= Im S_I <= C d_I`` on samples.

    ``chart`` is an :class:`IChart` or a pair ``(S, d)`` of callables.

    Returns
    -------
    (c, C) : tuple of float

    Raises
    ------
    PositivityViolation
        If ``c <= 0``; the witness is the worst sample.
    InsufficientData
        If ``d_I`` vanishes on every sample.
    """
    if isinstance(chart, IChart):
        S, d = chart.S, chart.d
    else:
        S, d = chart
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    ratios, kept = [], []
    for y in pts:
        dv = float(np.real(d(y)))
        if dv <= floor:
            continue
        ratios.append(float(np.imag(S(y))) / dv)
        kept.append(y)
    if not ratios:
        raise InsufficientData("d_I vanishes on every sample")
    ratios = np.array(ratios)
    k = int(np.argmin(ratios))
    if ratios[k] <= 0.0:
        raise PositivityViolation(f"Im S_I / d_I = {ratios[k]:.3e} <= 0", witness=kept[k])
    return float(ratios.min()), float(ratios.max())


# ---------------------------------------------------------------- germs

@dataclass
class Cycle:
    """Closed polyline on Γ (first and last points coincide)."""

    cycle_id: str
    points: np.ndarray
    start_sheet: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or len(self.points) < 3:
            raise InvalidInput("a cycle needs at least three points")
        if np.linalg.norm(self.points[0] - self.points[-1]) > 1e-8 * max(
                1.0, np.abs(self.points).max()):
            raise InvalidInput("cycle polyline is not closed")


@dataclass
class Germ:
    """A positive Lagrangian germ in ``R^{2n}`` presented by ``(D, Phi)`` and an atlas.

    Attributes
    ----------
    dissipation : Dissipation
    zaction : ZAction
    atlas : list of IChart
    gamma_samples : ndarray
    cycles : list of Cycle
    family : dict, optional
        Named constructor data used for serialization.
    real_submanifold : bool
        Γ is a real submanifold (so the z-action variation equals ∮ p dq).
    """

    n: int
    dissipation: Dissipation
    zaction: ZAction
    atlas: List[IChart]
    gamma_samples: np.ndarray
    cycles: List[Cycle] = field(default_factory=list)
    family: Optional[dict] = None
    real_submanifold: bool = True
    tangent: Optional[Callable] = None

    def charts_covering(self, m, tol=1e-6, shrink=1.0) -> List[int]:
        return [k for k, ch in enumerate(self.atlas) if ch.covers(m, tol, shrink)]

    def check_coverage(self):
        """Indices of Γ samples not covered by any chart (empty if covered)."""
        return [i for i, m in enumerate(self.gamma_samples) if not self.charts_covering(m)]

    def cycle(self, cycle_id) -> Cycle:
        for c in self.cycles:
            if c.cycle_id == cycle_id:
                return c
        raise InvalidInput(f"unknown cycle {cycle_id!r}")

    def monodromy_residual(self, cycle_id) -> complex:
        """Variation of ``Phi`` around the cycle minus the stored monodromy."""
        c = self.cycle(cycle_id)
        var = self.zaction.variation(c.points, c.start_sheet)
        stored = self.zaction.monodromy.get(cycle_id)
        if stored is None:
            raise InvalidInput(f"no stored monodromy for cycle {cycle_id!r}")
        return var - stored


def tangent_from_dissipation(D: Dissipation, k: int):
    """Basis of ``T_m Γ`` as the ``k`` smallest Hessian eigenvectors of ``D``."""

    def tangent(m):
        _, _, H = D.jet(m)
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        return V[:, :k]

    return tangent
