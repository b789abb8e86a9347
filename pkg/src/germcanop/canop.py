"""Volume forms, chart densities and the canonical operator on grids.

The local operator of a chart ``I`` is

    K_I phi (q) = (i / 2 pi h)^{|Ibar|/2} int exp((i/h)(S_I(q_I, p_Ibar) + p_Ibar.q_Ibar))
                  phi_I(q_I, p_Ibar) sqrt(a_I(q_I, p_Ibar)) dp_Ibar,

evaluated by the trapezoid rule on a uniform ``p_Ibar`` grid.  Square roots
of densities are always ``exp(ln a_I / 2)`` with a tracked branch of the log.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .errors import (BranchFailure, InvalidInput, NumericalFailure, PositivityViolation,
                     QuantizationError, ResolutionError)
from .fields import ScalarField, eval_jet, pointwise
from .germ import Germ, IChart, chart_coords

MAX_NODES = 2 ** 20
NODES_PER_WAVELENGTH = 16
MIN_NODES = 64


# ---------------------------------------------------------------- densities

def continue_log(values, start_log=None):
    """Continuous branch of ``log`` along a sequence of nonzero complex values.

    Consecutive values must differ in argument by less than ``pi/2``.

    Raises
    ------
    BranchFailure
        If a value is (nearly) zero or a step is too coarse.
    """
    v = np.asarray(values, dtype=complex)
    if np.any(np.abs(v) < 1e-12) or not np.all(np.isfinite(v)):
        raise BranchFailure("density vanishes or is non-finite on the path")
    steps = np.angle(v[1:] / v[:-1])
    if np.any(np.abs(steps) >= np.pi / 2):
        raise BranchFailure("argument step of pi/2 or more; refine the path")
    arg0 = np.angle(v[0]) if start_log is None else np.imag(start_log)
    args = arg0 + np.concatenate([[0.0], np.cumsum(steps)])
    return np.log(np.abs(v)) + 1j * args


def continue_log_path(fun: Callable, a, b, start_log, max_depth=40):
    """Continue ``log fun`` along the straight segment from ``a`` to ``b``.

    The segment is bisected until every step changes the argument by less
    than ``pi/2``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va = complex(fun(a))
    if abs(va) < 1e-12 or not np.isfinite(va):
        raise BranchFailure(f"density vanishes at {a}")

    def rec(x0, v0, x1, depth):
        v1 = complex(fun(x1))
        if abs(v1) < 1e-12 or not np.isfinite(v1):
            raise BranchFailure(f"density vanishes at {x1}")
        d = np.angle(v1 / v0)
        if abs(d) < np.pi / 2:
            return d, v1
        if depth >= max_depth:
            raise BranchFailure("argument continuation did not resolve")
        xm = 0.5 * (x0 + x1)
        d1, vm = rec(x0, v0, xm, depth + 1)
        d2, v1 = rec(xm, vm, x1, depth + 1)
        return d1 + d2, v1

    d, vb = rec(a, va, b, 0)
    return np.log(abs(vb)) + 1j * (np.imag(start_log) + d)


class VolumeForm:
    """The form ``mu = a dz_1 ^ ... ^ dz_n`` restricted to the germ.

    Parameters
    ----------
    a : ScalarField or dict
        Density on ``R^{2n}``, either one field or one per sheet.
    log_a : ScalarField or dict, optional
        Continuous branches of ``ln a`` per sheet.  Without it the branch is
        continued along straight segments from ``ln_branch_base``.
    ln_branch_base : tuple, optional
        ``(point, ln a(point))`` fixing the branch.
    """

    def __init__(self, a, log_a=None, ln_branch_base=None):
        self._a = a
        self._log = log_a
        if ln_branch_base is None:
            self._base = None
        else:
            pt, val = ln_branch_base
            self._base = (np.asarray(pt, dtype=float), complex(val))
        if log_a is None and ln_branch_base is None:
            raise InvalidInput("either log_a or ln_branch_base is required")

    def _pick(self, obj, sheet):
        if isinstance(obj, dict):
            if sheet is None:
                sheet = next(iter(obj))
            return obj[sheet]
        return obj

    def a(self, m, sheet=None) -> complex:
        return complex(self._pick(self._a, sheet)(np.asarray(m, dtype=float)))

    def ln_a(self, m, sheet=None) -> complex:
        m = np.asarray(m, dtype=float)
        if self._log is not None:
            return complex(self._pick(self._log, sheet)(m))
        base, val = self._base
        return complex(continue_log_path(lambda x: self.a(x, sheet), base, m, val))

    def ln_a_many(self, pts, sheet=None) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self._log is not None:
            return np.asarray(self._pick(self._log, sheet)(pts), dtype=complex)
        return np.array([self.ln_a(m, sheet) for m in pts])


def det_log_continuation(S2, tau_end=1.0, max_halvings=50):
    """Continuous ``ln det(I - i tau S2)`` from ``tau = 0`` to ``tau_end``.

    Steps are halved until each changes the argument by less than ``pi/2``.

    Raises
    ------
    PositivityViolation
        If the determinant vanishes on the path.
    """
    S2 = np.atleast_2d(np.asarray(S2, dtype=complex))
    eye = np.eye(S2.shape[0])
    tau, dt = 0.0, 0.25 * tau_end
    Bold = 1.0 + 0.0j
    arg = 0.0
    halvings = 0
    while tau < tau_end - 1e-15:
        t1 = min(tau + dt, tau_end)
        B = np.linalg.det(eye - 1j * t1 * S2)
        if abs(B) < 1e-14:
            raise PositivityViolation(f"det(I - i tau S'') vanishes at tau={t1:.3g}")
        d = np.angle(B / Bold)
        if abs(d) >= np.pi / 2:
            dt *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise PositivityViolation("determinant continuation stalled")
            continue
        arg += d
        tau, Bold = t1, B
    return np.log(abs(Bold)) + 1j * arg


def chart_density(form: VolumeForm, chart: IChart, germ: Optional[Germ] = None):
    """Density of ``mu`` in the chart coordinates and its tracked logarithm.

    ``ln a_I = ln a(foot) + ln det(I - i S_I'')|_{continued} - i pi |Ibar|/2``.

    Returns
    -------
    a_I, ln_a_I : ScalarField
    """
    if chart.foot is None:
        raise InvalidInput("chart has no foot map")
    nb = chart.n - len(chart.I)

    def ln_aI(y):
        y = np.asarray(y, dtype=float)
        m = chart.foot(y)
        la = form.ln_a(m, chart.sheet_id)
        H = chart.S.hessian(y)
        return complex(la + det_log_continuation(H) - 1j * np.pi * nb / 2)

    ln_field = pointwise(chart.n, ln_aI, name="ln a_I")
    a_field = pointwise(chart.n, lambda y: np.exp(ln_aI(y)), name="a_I")
    return a_field, ln_field


# ---------------------------------------------------------------- grids

@dataclass
class Grid:
    """Uniform tensor grid; ``axes[k]`` are the nodes along axis ``k``."""

    axes: List[np.ndarray]

    @classmethod
    def uniform(cls, lo, hi, num):
        lo, hi, num = np.atleast_1d(lo), np.atleast_1d(hi), np.atleast_1d(num)
        return cls([np.linspace(a, b, int(k)) for a, b, k in zip(lo, hi, num)])

    @property
    def n(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self):
        return np.array([a[1] - a[0] for a in self.axes])

    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass
class WaveFunction:
    """Samples of a function on a uniform grid at Planck constant ``h``."""

    grid: Grid
    values: np.ndarray
    h: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise NumericalFailure("wave function has non-finite samples")

    def __add__(self, other):
        return WaveFunction(self.grid, self.values + other.values, self.h)

    def __sub__(self, other):
        return WaveFunction(self.grid, self.values - other.values, self.h)

    def scale(self, c):
        return WaveFunction(self.grid, c * self.values, self.h)

    def norm(self) -> float:
        return hh_norm(self, 0, check_decay=False)


@dataclass
class Amplitude:
    """Chart representative ``phi_I`` of an amplitude, vectorized over ``y``."""

    chart_id: int
    phi: Callable


def _trapz_weights(x):
    w = np.full(len(x), x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def hh_norm(psi: WaveFunction, k: int = 0, check_decay: bool = True, decay_tol: float = 1e-12) -> float:
    """``|| (1 - h^2 Laplacian + q^2)^{k/2} psi ||_{L^2}``.

    The Laplacian is the second-order centered difference with zero exterior;
    the integral is the trapezoid rule.

    Raises
    ------
    ResolutionError
        If ``psi`` does not decay below ``decay_tol`` (relative) at the boundary.
    """
    if k < 0 or k % 2:
        raise InvalidInput("k must be an even nonnegative integer")
    v = psi.values
    if check_decay:
        scale = max(np.abs(v).max(), 1e-300)
        for ax in range(v.ndim):
            edge = max(np.abs(np.take(v, 0, axis=ax)).max(), np.abs(np.take(v, -1, axis=ax)).max())
            if edge > decay_tol * scale:
                raise ResolutionError(f"wave function does not decay at the grid boundary (axis {ax})")
    pts = psi.grid.points()
    q2 = np.sum(pts ** 2, axis=-1)
    h = psi.h
    for _ in range(k // 2):
        lap = np.zeros_like(v)
        for ax, dx in enumerate(psi.grid.spacing):
            pad = [(0, 0)] * v.ndim
            pad[ax] = (1, 1)
            vp = np.pad(v, pad)
            sl = lambda a, b: tuple(slice(a, b) if i == ax else slice(None) for i in range(v.ndim))
            lap += (vp[sl(2, None)] - 2 * v + vp[sl(0, -2)]) / dx ** 2
        v = v - h ** 2 * lap + q2 * v
    w = np.ones(v.shape)
    for ax, a in enumerate(psi.grid.axes):
        shp = [1] * v.ndim
        shp[ax] = -1
        w = w * _trapz_weights(a).reshape(shp)
    return float(np.sqrt(np.sum(w * np.abs(v) ** 2)))


# ---------------------------------------------------------------- chart tabulation

class ChartTable:
    """Chebyshev tabulation of a one-dimensional chart's smooth data.

    Tabulates ``S_I``, ``ln a_I`` and the foot point ``m(y)`` on Chebyshev
    nodes of the chart box and interpolates barycentrically.  The
    interpolant is validated at intermediate points.
    """

    def __init__(self, chart: IChart, ln_a: Optional[ScalarField], n_nodes: int = 129,
                 tol: float = 1e-11):
        if chart.n != 1:
            raise InvalidInput("chart tabulation is one-dimensional")
        self.chart = chart
        lo, hi = chart.box[0]
        self.lo, self.hi = float(lo), float(hi)
        k = np.arange(n_nodes)
        nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * k / (n_nodes - 1))[::-1]
        self.nodes = nodes
        vals = self._direct(nodes, ln_a)
        self._interp = BarycentricInterpolator(nodes, vals)
        mids = 0.5 * (nodes[1:] + nodes[:-1])[:: max(1, n_nodes // 8)]
        ref = self._direct(mids, ln_a)
        err = np.abs(self._interp(mids) - ref).max(axis=0)
        scale = np.maximum(1.0, np.abs(vals).max(axis=0))
        if np.any(err > tol * scale):
            raise NumericalFailure(f"chart tabulation inaccurate (max error {err.max():.2e})")

    def _direct(self, ys, ln_a):
        rows = []
        for y in ys:
            yy = np.array([y])
            s = self.chart.S.value(yy)
            la = ln_a.value(yy) if ln_a is not None else 0.0
            m = self.chart.foot(yy)
            rows.append(np.concatenate([[s, la], m.astype(complex)]))
        return np.array(rows)

    def __call__(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        out = self._interp(y)
        return out[:, 0], out[:, 1], np.real(out[:, 2:])

    def inside(self, y):
        return (y >= self.lo) & (y <= self.hi)


# ---------------------------------------------------------------- local operator

def required_nodes(q_span, Q, p_nodes, h, length):
    """Nodes needed for ``NODES_PER_WAVELENGTH`` points per oscillation."""
    dq = np.max(np.abs(q_span[:, None] - Q[None, :])) if len(Q) else 0.0
    return int(np.ceil(NODES_PER_WAVELENGTH * length * dq / (2 * np.pi * h)))


def _eval_chart(chart, ln_a, ys, table):
    """``S_I``, ``ln a_I`` and foot points at chart points ``ys`` (shape (k, n))."""
    if table is not None:
        S, la, m = table(ys[:, 0])
        return S, la, m
    S = np.array([chart.S.value(y) for y in ys])
    la = np.array([ln_a.value(y) for y in ys])
    m = np.array([chart.foot(y) if chart.foot is not None else np.full(2 * chart.n, np.nan)
                  for y in ys])
    return S, la, m


def local_canop(chart: IChart, ln_a_I, phi, h: float, grid: Grid, nodes=None,
                window=None, cutoff: Optional[Callable] = None, table: Optional[ChartTable] = None,
                uses_point: bool = False) -> WaveFunction:
    """The local canonical operator of one chart on an output grid.

    Parameters
    ----------
    ln_a_I : ScalarField
        Tracked logarithm of the chart density (see :func:`chart_density`).
    phi : Amplitude or callable
        Vectorized amplitude.  By default it receives chart points ``y``
        (shape ``(k, n)``); with ``uses_point=True`` it receives
        ``(y, m)`` where ``m`` are the corresponding phase-space feet.
        It must vanish outside a compact subset of the chart box.
    nodes : int or sequence, optional
        Trapezoid nodes per integrated axis; derived from the oscillation
        estimate when omitted.
    window : array_like, optional
        ``(|Ibar|, 2)`` integration window (default: chart box rows).
    cutoff : callable, optional
        Smooth factor on ``p_Ibar`` equal to one near the support of ``phi``.
    table : ChartTable, optional
        Tabulated chart data (one-dimensional charts).

    Raises
    ------
    ResolutionError
        If the requested node count is below the oscillation requirement or
        the requirement exceeds ``2**20`` nodes.
    """
    if not (0 < h <= 1):
        raise InvalidInput("h must lie in (0, 1]")
    n = chart.n
    if grid.n != n:
        raise InvalidInput("grid dimension differs from chart dimension")
    fphi = phi.phi if isinstance(phi, Amplitude) else phi
    I = list(chart.I.members)
    Ib = list(chart.I.complement)
    nb = len(Ib)
    qpts = grid.points().reshape(-1, n)

    def amplitude(ys):
        S, la, m = _eval_chart(chart, ln_a_I, ys, table)
        ph = fphi(ys, m) if uses_point else fphi(ys)
        return S, np.exp(0.5 * la) * np.asarray(ph, dtype=complex)

    if nb == 0:
        inside = np.all((qpts >= chart.box[:, 0]) & (qpts <= chart.box[:, 1]), axis=1)
        out = np.zeros(len(qpts), dtype=complex)
        if np.any(inside):
            ys = qpts[inside]
            S, A = amplitude(ys)
            nz = A != 0
            out_in = np.zeros(len(ys), dtype=complex)
            out_in[nz] = np.exp(1j * S[nz] / h) * A[nz]
            out[inside] = out_in
        return WaveFunction(grid, out.reshape(grid.shape), h)

    win = np.asarray(window if window is not None else chart.box[Ib], dtype=float).reshape(nb, 2)
    lengths = win[:, 1] - win[:, 0]
    # oscillation estimate on a coarse node set
    coarse = [np.linspace(a, b, MIN_NODES) for a, b in win]
    qI_vals = np.unique(qpts[:, I], axis=0) if I else np.zeros((1, 0))
    qIb_span = qpts[:, Ib]

    def chart_points(qI, pnodes):
        mesh = np.stack(np.meshgrid(*pnodes, indexing="ij"), axis=-1).reshape(-1, nb)
        ys = np.empty((len(mesh), n))
        ys[:, Ib] = mesh
        if I:
            ys[:, I] = qI
        return ys, mesh

    needed = []
    for ax in range(nb):
        need = MIN_NODES
        for qI in qI_vals[:: max(1, len(qI_vals) // 4)]:
            ys, mesh = chart_points(qI, coarse)
            S, _, _ = _eval_chart(chart, ln_a_I, ys, table)
            Sg = S.reshape([MIN_NODES] * nb)
            Q = -np.real(np.gradient(Sg, coarse[ax], axis=ax)).reshape(-1)
            need = max(need, required_nodes(qIb_span[:, ax], Q, coarse[ax], h, lengths[ax]))
        needed.append(need)
    total_needed = int(np.prod(needed))
    if total_needed > MAX_NODES:
        raise ResolutionError(f"quadrature needs {total_needed} nodes (> 2^20)", required=total_needed)
    if nodes is None:
        counts = needed
    else:
        counts = list(np.broadcast_to(np.atleast_1d(nodes), (nb,)).astype(int))
        if any(c < r for c, r in zip(counts, needed)):
            raise ResolutionError(f"{counts} nodes below the oscillation requirement {needed}",
                                  required=needed)
        if int(np.prod(counts)) > MAX_NODES:
            raise ResolutionError("node count exceeds 2^20", required=int(np.prod(counts)))
    pnodes = [np.linspace(a, b, int(c)) for (a, b), c in zip(win, counts)]
    weights = np.ones(1)
    for pn in pnodes:
        weights = np.outer(weights, _trapz_weights(pn)).reshape(-1)
    pref = np.exp(0.5 * nb * np.log(1j / (2 * np.pi * h)))
    out = np.zeros(len(qpts), dtype=complex)
    for qI in qI_vals:
        rows = np.all(qpts[:, I] == qI, axis=1) if I else np.ones(len(qpts), dtype=bool)
        ys, mesh = chart_points(qI, pnodes)
        S, A = amplitude(ys)
        if cutoff is not None:
            A = A * np.asarray(cutoff(mesh))
        nz = A != 0
        if not np.any(nz):
            continue
        integrand = weights[nz] * np.exp(1j * S[nz] / h) * A[nz]
        phase = np.exp(1j * (qpts[rows][:, Ib] @ mesh[nz].T) / h)
        out[rows] = pref * (phase @ integrand)
    return WaveFunction(grid, out.reshape(grid.shape), h)


def smooth_cutoff(lo, hi, margin):
    """Smooth function equal to 1 on ``[lo, hi]`` and 0 beyond ``margin``."""
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)

    def step(t):
        t = np.clip(t, 0.0, 1.0)
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        return a / (a + b)

    def cut(p):
        p = np.atleast_2d(p)
        up = step((hi + margin - p) / margin)
        down = step((p - lo + margin) / margin)
        return np.prod(up * down, axis=-1)

    return cut


# ---------------------------------------------------------------- partitions of unity

def bump(t):
    """``exp(-1/(1 - t^2))`` inside ``|t| < 1``, zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


class PartitionOfUnity:
    """Smooth partition of unity on Γ subordinate to an atlas.

    The weight of chart ``K`` at ``m`` is a product of bumps in ``K``'s
    coordinates, scaled to ``shrink`` times the box, and counts only where
    ``m`` lies on the branch of Γ that ``K`` parametrizes.

    Parameters
    ----------
    tables : list of ChartTable, optional
        Tabulations used for fast branch tests (one-dimensional charts).
    """

    def __init__(self, atlas: Sequence[IChart], shrink: float = 1.0, power: float = 1.0,
                 tables: Optional[Sequence[ChartTable]] = None, branch_tol: float = 1e-6):
        if not (0 < shrink <= 1):
            raise InvalidInput("shrink must lie in (0, 1]")
        self.atlas = list(atlas)
        self.shrink = shrink
        self.power = power
        self.tables = tables
        self.branch_tol = branch_tol

    def raw_weights(self, m) -> np.ndarray:
        """Unnormalized weights, shape ``(k, len(atlas))``."""
        m = np.atleast_2d(np.asarray(m, dtype=float))
        W = np.zeros((len(m), len(self.atlas)))
        for k, ch in enumerate(self.atlas):
            y = chart_coords(ch.I, m)
            c = ch.box.mean(axis=1)
            r = 0.5 * (ch.box[:, 1] - ch.box[:, 0]) * self.shrink
            w = np.prod(bump((y - c) / r), axis=-1) ** self.power
            live = w > 0
            if np.any(live):
                if self.tables is not None:
                    _, _, mf = self.tables[k](y[live, 0])
                else:
                    mf = np.array([ch.foot(yy) for yy in y[live]])
                scale = np.maximum(1.0, np.linalg.norm(m[live], axis=1))
                on = np.linalg.norm(mf - m[live], axis=1) <= self.branch_tol * scale
                wl = w[live]
                wl[~on] = 0.0
                w[live] = wl
            W[:, k] = w
        return W

    def weights(self, m) -> np.ndarray:
        """Normalized weights; rows where no chart covers ``m`` are zero."""
        W = self.raw_weights(m)
        s = W.sum(axis=1)
        out = np.zeros_like(W)
        ok = s > 0
        out[ok] = W[ok] / s[ok, None]
        return out

    def check_cover(self, points):
        """Raise :class:`InvalidInput` if some point has no positive weight."""
        s = self.raw_weights(points).sum(axis=1)
        if np.any(s <= 0):
            bad = np.atleast_2d(points)[s <= 0][0]
            raise InvalidInput(f"partition of unity does not cover {bad}")

    def weight(self, k, m) -> np.ndarray:
        return self.weights(m)[:, k]


# ---------------------------------------------------------------- global operator

def chart_tables(germ: Germ, form: VolumeForm, n_nodes: int = 129):
    """Tabulate every chart of a one-dimensional germ."""
    out = []
    for ch in germ.atlas:
        _, ln_a = chart_density(form, ch, germ)
        out.append(ChartTable(ch, ln_a, n_nodes=n_nodes))
    return out


def global_canop(germ: Germ, form: VolumeForm, h: float, grid: Grid, phi: Callable,
                 partition: Optional[PartitionOfUnity] = None, tables=None,
                 charts: Optional[Sequence[int]] = None, check: bool = True,
                 quant_tol: float = 1e-8, shrink: float = 1.0) -> WaveFunction:
    """``sum_I K_I(e_I phi)`` over the atlas.

    Parameters
    ----------
    phi : callable
        Amplitude on Γ, vectorized over phase-space points ``(k, 2n)``.
    partition : PartitionOfUnity, optional
        Defaults to bumps with the given ``shrink``.
    charts : sequence of int, optional
        Restrict the sum to these charts (the partition still uses all).

    Raises
    ------
    QuantizationError
        If the quantization condition fails at this ``h`` (``check=True``).
    """
    if check and germ.cycles:
        from .quantization import check_quantization
        rep = check_quantization(germ, form, h, tol=quant_tol)
        if not rep.holds:
            raise QuantizationError(f"quantization residual {rep.max_residual:.3e} exceeds {quant_tol:g}")
    if tables is None and germ.n == 1:
        tables = chart_tables(germ, form)
    if partition is None:
        partition = PartitionOfUnity(germ.atlas, shrink=shrink, tables=tables)
    total = np.zeros(grid.shape, dtype=complex)
    for k, ch in enumerate(germ.atlas):
        if charts is not None and k not in charts:
            continue
        table = tables[k] if tables is not None else None
        ln_a = None
        if table is None:
            ln_a = chart_density(form, ch, germ)[1]

        def amp(ys, m, k=k):
            return partition.weights(m)[:, k] * np.asarray(phi(m))

        psi = local_canop(ch, ln_a, amp, h, grid, table=table, uses_point=True)
        total += psi.values
    return WaveFunction(grid, total, h)
