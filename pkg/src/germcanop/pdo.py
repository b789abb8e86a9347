"""Hamiltonians on grids, commutation residuals and the transport operator.

Operators use the ordering "differentiate first, multiply second":
``H(q, p) = sum_i f_i(q) g_i(p)`` acts as ``sum_i f_i(q) [g_i(-i h d/dq) psi]``.
Spectra of differently ordered operators differ at ``O(h)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .canop import Grid, VolumeForm, WaveFunction, chart_density, global_canop, hh_norm
from .dissipation import Dissipation, membership_order
from .errors import InvalidInput, QuantizationError, UnsupportedSymbol
from .fields import ScalarField, eval_jet
from .germ import Germ, IChart, chart_coords


# ---------------------------------------------------------------- symbols

class HamiltonianSymbol:
    """A real symbol ``H(p, q)`` on ``R^{2n}`` with a separable representation.

    Parameters
    ----------
    n : int
    terms : list of (f, g)
        ``H = sum f(q) g(p)``; ``f`` and ``g`` are vectorized over ``(..., n)``.
        Omit for a symbol given only by ``H``; such symbols cannot be applied.
    H : ScalarField, optional
        Full symbol on ``m = (p, q)``; assembled from ``terms`` if omitted.
    growth_order : int
        Declared ``m`` in ``|d^{a+b} H| <= C (1 + |q| + |p|)^m``.
    """

    def __init__(self, n: int, terms=None, H: Optional[ScalarField] = None, growth_order: int = 2,
                 p_degree: Optional[int] = None):
        self.n = int(n)
        self.terms = list(terms) if terms is not None else None
        self.growth_order = growth_order
        self.p_degree = p_degree
        if H is None:
            if self.terms is None:
                raise InvalidInput("a symbol needs terms or a full field")
            nn = self.n

            def full(m):
                m = np.asarray(m, dtype=float)
                p, q = m[..., :nn], m[..., nn:]
                return sum(np.asarray(f(q)) * np.asarray(g(p)) for f, g in self.terms)

            H = ScalarField(2 * nn, full, name="H")
        self.H = H

    @classmethod
    def harmonic(cls, energy: float = 0.0, n: int = 1):
        """``(|p|^2 + |q|^2)/2 - energy`` with exact derivatives."""
        one = lambda x: np.ones(np.asarray(x).shape[:-1])
        terms = [(one, lambda p: 0.5 * np.sum(np.asarray(p) ** 2, axis=-1)),
                 (lambda q: 0.5 * np.sum(np.asarray(q) ** 2, axis=-1) - energy, one)]
        H = ScalarField(2 * n, lambda m: 0.5 * np.sum(np.asarray(m) ** 2, axis=-1) - energy,
                        grad=lambda m: np.asarray(m, dtype=complex),
                        hess=lambda m: np.eye(2 * n, dtype=complex), name="H_osc")
        return cls(n, terms, H, growth_order=2, p_degree=2)

    @classmethod
    def polynomial_in_p(cls, n: int, coeffs: dict, growth_order: int = 2):
        """``H = sum_beta c_beta(q) p^beta`` from ``{beta: c_beta}``."""
        terms = []
        for beta, c in coeffs.items():
            beta = tuple(int(b) for b in np.atleast_1d(beta))
            if len(beta) != n:
                raise InvalidInput("multi-index length differs from n")
            terms.append((c, lambda p, beta=beta: np.prod(np.asarray(p) ** np.array(beta), axis=-1)))
        deg = max(sum(np.atleast_1d(b)) for b in coeffs)
        return cls(n, terms, growth_order=growth_order, p_degree=int(deg))

    @classmethod
    def constant(cls, c: float, n: int = 1):
        one = lambda x: np.full(np.asarray(x).shape[:-1], 1.0)
        return cls(n, [(lambda q: c * one(q), one)], p_degree=0)

    def __call__(self, m):
        return self.H(m)

    def check_growth(self, samples, C: float = None) -> float:
        """Largest ``|H|, |dH|, |d^2H|`` relative to ``(1 + |m|)^growth_order`` on samples."""
        worst = 0.0
        for m in np.atleast_2d(samples):
            v, g, Hh = eval_jet(self.H, m)
            bound = (1.0 + np.abs(m).sum()) ** self.growth_order
            worst = max(worst, abs(v) / bound, np.abs(g).max() / bound, np.abs(Hh).max() / bound)
        if C is not None and worst > C:
            raise InvalidInput(f"symbol estimate violated: ratio {worst:.3e} > {C}")
        return worst


def _wavenumbers(grid: Grid):
    ks = [2 * np.pi * np.fft.fftfreq(len(a), d=a[1] - a[0]) for a in grid.axes]
    return np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)


def _fd_derivative(v, dx, axis, order):
    """``d^order/dq^order`` by repeated second-order centered differences."""
    out = v
    while order >= 2:
        pad = [(0, 0)] * v.ndim
        pad[axis] = (1, 1)
        vp = np.pad(out, pad)
        sl = lambda a, b: tuple(slice(a, b) if i == axis else slice(None) for i in range(v.ndim))
        out = (vp[sl(2, None)] - 2 * out + vp[sl(0, -2)]) / dx ** 2
        order -= 2
    if order == 1:
        pad = [(0, 0)] * v.ndim
        pad[axis] = (1, 1)
        vp = np.pad(out, pad)
        sl = lambda a, b: tuple(slice(a, b) if i == axis else slice(None) for i in range(v.ndim))
        out = (vp[sl(2, None)] - vp[sl(0, -2)]) / (2 * dx)
    return out


def apply_hamiltonian(H: HamiltonianSymbol, psi: WaveFunction, method: str = "spectral",
                      ordering: str = "standard") -> WaveFunction:
    """Apply ``H(q, -i h d/dq)`` with differentiation before multiplication.

    Parameters
    ----------
    method : {'spectral', 'fd'}
        ``'spectral'`` applies each ``g_i(p)`` as a discrete Fourier multiplier
        ``g_i(h k)`` (periodic extension of a decayed state).  ``'fd'`` expands
        polynomial-in-``p`` symbols in monomials and uses second-order centered
        differences.
    ordering : {'standard', 'symmetric'}
        ``'symmetric'`` applies ``(f g(D) + g(D) f)/2`` per term, which is
        formally self-adjoint for real terms.

    Raises
    ------
    UnsupportedSymbol
        If the symbol has no separable representation, or ``'fd'`` is asked for
        a symbol that is not polynomial in ``p``.
    """
    if H.terms is None:
        raise UnsupportedSymbol("symbol is neither polynomial in p nor separable")
    if ordering == "symmetric":
        q = psi.grid.points()
        total = np.zeros_like(psi.values)
        for f, g in H.terms:
            part = HamiltonianSymbol(H.n, [(f, g)], H=H.H, p_degree=H.p_degree)
            fq = np.asarray(f(q))
            one = lambda x: np.ones(np.asarray(x).shape[:-1])
            gonly = HamiltonianSymbol(H.n, [(one, g)], H=H.H, p_degree=H.p_degree)
            total += apply_hamiltonian(part, psi, method).values
            total += apply_hamiltonian(gonly, WaveFunction(psi.grid, fq * psi.values, psi.h), method).values
        return WaveFunction(psi.grid, 0.5 * total, psi.h)
    if ordering != "standard":
        raise InvalidInput(f"unknown ordering {ordering!r}")
    if psi.grid.n != H.n:
        raise InvalidInput("grid dimension differs from symbol dimension")
    h = psi.h
    q = psi.grid.points()
    v = psi.values
    out = np.zeros_like(v)
    if method == "spectral":
        P = h * _wavenumbers(psi.grid)
        vf = np.fft.fftn(v)
        for f, g in H.terms:
            mult = np.asarray(g(P), dtype=complex)
            if mult.shape != v.shape:
                mult = np.broadcast_to(mult, v.shape)
            out += np.asarray(f(q)) * np.fft.ifftn(mult * vf)
    elif method == "fd":
        if H.p_degree is None:
            raise UnsupportedSymbol("finite differences need a symbol polynomial in p")
        for f, g in H.terms:
            # identify the monomial p^beta by probing g on unit vectors
            beta = _monomial_degree(g, H.n)
            w = v
            for ax, b in enumerate(beta):
                if b:
                    w = (-1j * h) ** b * _fd_derivative(w, psi.grid.spacing[ax], ax, b)
            c = complex(np.asarray(g(np.ones(H.n))))
            out += np.asarray(f(q)) * c * w
    else:
        raise InvalidInput(f"unknown method {method!r}")
    return WaveFunction(psi.grid, out, h)


def _monomial_degree(g, n):
    """Multi-index ``beta`` with ``g(p) = c p^beta`` (checked at two scales)."""
    beta = []
    base = np.ones(n)
    g1 = complex(np.asarray(g(base)))
    for ax in range(n):
        p = base.copy()
        p[ax] = 2.0
        r = complex(np.asarray(g(p))) / g1 if g1 != 0 else 1.0
        b = np.log2(abs(r)) if r != 0 else 0.0
        if abs(b - round(b)) > 1e-9:
            raise UnsupportedSymbol("p-factor is not a monomial")
        beta.append(int(round(b)))
    return beta


@dataclass
class CommutationResidual:
    gap: float
    raw: float
    norm: float


def commutation_residual(H: HamiltonianSymbol, germ: Germ, form: VolumeForm, phi: Callable, h: float,
                         grid: Grid, method: str = "spectral", **canop_kw) -> CommutationResidual:
    """``||H K phi - K[(H|_Γ) phi]||`` and ``||H K phi||`` in ``L^2``.

    ``H|_Γ`` is evaluated at the phase-space feet of the charts.
    """
    psi = global_canop(germ, form, h, grid, phi, **canop_kw)
    Hpsi = apply_hamiltonian(H, psi, method=method)
    rhs = global_canop(germ, form, h, grid, lambda m: np.real(H(m)) * np.asarray(phi(m)), **canop_kw)
    return CommutationResidual(hh_norm(Hpsi - rhs, 0, check_decay=False),
                               hh_norm(Hpsi, 0, check_decay=False), hh_norm(psi, 0, check_decay=False))


# ---------------------------------------------------------------- divergence and Lie derivative

def hamiltonian_field(H: HamiltonianSymbol):
    """``V(H) = (-H_q, H_p)`` in ``(p, q)`` order."""
    n = H.n

    def V(m):
        g = np.real(eval_jet(H.H, m)[1])
        return np.concatenate([-g[n:], g[:n]])

    return V


def _frame(Q: Sequence[ScalarField], generators: Sequence[ScalarField]):
    fields = list(generators) + list(Q)

    def J(m):
        return np.real(np.array([eval_jet(f, m)[1] for f in fields]))

    return J, len(generators)


def divergence_in_chart(X: Callable, Q: Sequence[ScalarField], generators: Sequence[ScalarField],
                        D: Optional[Dissipation] = None, samples=None, step: float = 1e-6) -> Callable:
    """Divergence of a tangent field in the split frame ``(F_1..F_k, Q)``.

    With ``a_j = X(Psi_j)`` the components of ``X`` in the frame
    ``Psi = (F, Q)``, ``div_Q X = sum_{j > k} da_j/dPsi_j``.

    Parameters
    ----------
    X : callable
        ``m -> R^N`` vector field on the ambient space.
    Q : sequence of ScalarField
        Coordinates on the submanifold.
    generators : sequence of ScalarField
        Functions ``F_j`` generating the ideal of Γ.
    D, samples : optional
        If given, tangency ``X(F_j) = O(D^{1/2})`` is verified first.

    Raises
    ------
    InvalidInput
        If the tangency test fails.
    """
    J, k = _frame(Q, generators)
    if D is not None and samples is not None:
        for Fj in generators:
            xf = ScalarField(Fj.dim, lambda x, Fj=Fj: np.array(
                [np.dot(np.real(eval_jet(Fj, p)[1]), X(p)) for p in np.atleast_2d(x)]).reshape(
                np.asarray(x).shape[:-1]))
            if not membership_order(xf, D, samples, 0.5).holds:
                raise InvalidInput("vector field is not tangent: X(F) is not O(D^{1/2})")

    def a(m):
        return J(m) @ np.asarray(X(m), dtype=float)

    def div(m):
        m = np.asarray(m, dtype=float)
        N = len(m)
        Jinv = np.linalg.inv(J(m))
        da = np.zeros((N, N))
        for i in range(N):
            e = np.zeros(N)
            e[i] = step * max(1.0, abs(m[i]))
            da[:, i] = (a(m + e) - a(m - e)) / (2 * e[i])
        # d a_j / d Psi_j = sum_i (d a_j / d m_i) (J^{-1})_{i j}
        return float(sum(da[j] @ Jinv[:, j] for j in range(k, N)))

    return div


def lie_derivative_volume(X: Callable, density: ScalarField, chart: IChart, point=None,
                          step: float = 1e-5) -> Callable:
    """Density of ``L_X omega`` in chart coordinates: ``X(rho) + rho div_y X``.

    ``omega = rho(y) dy`` on the germ; ``X`` is an ambient field tangent to Γ,
    pushed to the chart by ``y = chart_coords(m)`` at ``m = point(y)``
    (default: the chart's real point over ``y``).
    """
    I = chart.I
    pt = point or chart.point

    def ydot(y):
        return chart_coords(I, np.asarray(X(pt(y)), dtype=float))

    def lie(y):
        y = np.asarray(y, dtype=float)
        n = len(y)
        v = ydot(y)
        rho, grho, _ = eval_jet(density, y)
        div = 0.0
        for j in range(n):
            e = np.zeros(n)
            e[j] = step * max(1.0, abs(y[j]))
            div += (ydot(y + e)[j] - ydot(y - e)[j]) / (2 * e[j])
        return complex(grho @ v + rho * div)

    return lie


# ---------------------------------------------------------------- transport

@dataclass
class TransportCoefficients:
    """``P = V(H) + c``; ``c = -1/2 tr H_pq + 1/2 L_{V(H)} mu / mu`` on Γ."""

    H: HamiltonianSymbol
    germ: Germ
    form: VolumeForm
    flow: Callable
    zeroth: Callable
    lie_ratio: Callable
    trace_ratio: Callable


def _chart_for(germ: Germ, m, tables=None):
    best, best_r = None, np.inf
    for k, ch in enumerate(germ.atlas):
        y = chart_coords(ch.I, m)
        c = ch.box.mean(axis=1)
        r = np.max(np.abs(y - c) / (0.5 * (ch.box[:, 1] - ch.box[:, 0])))
        if r < best_r and r <= 1.0 and np.linalg.norm(ch.point(y) - m) < 0.05 * max(1.0, np.linalg.norm(m)):
            best, best_r = k, r
    if best is None or best_r > 1.0:
        raise InvalidInput(f"no chart covers {m}")
    return best


def check_invariance(H: HamiltonianSymbol, germ: Germ, tol: float = 1e-8, n_off: int = 4, seed: int = 0,
                    cap: float = 1e6) -> float:
    """Verify ``H = 0`` on Γ and that ``V(H) D`` lies in the ideal of ``D``.

    Raises
    ------
    InvalidInput
        With the worst residual if either test fails.
    """
    vals = np.abs(np.real(H(germ.gamma_samples)))
    if vals.max() > tol:
        raise InvalidInput(f"H does not vanish on Γ (max |H| = {vals.max():.3e})")
    rng = np.random.default_rng(seed)
    V = hamiltonian_field(H)
    pts = []
    for m in germ.gamma_samples:
        for s in np.logspace(-3, -1, n_off):
            d = rng.normal(size=m.shape)
            pts.append(m + s * d / np.linalg.norm(d))
    pts = np.array(pts)
    D = germ.dissipation
    vd = np.array([abs(np.dot(np.real(D.jet(p)[1]), V(p))) for p in pts])
    Dv = np.real(D(pts))
    ratio = vd / np.maximum(Dv, 1e-12)
    near = Dv <= np.quantile(Dv, 0.25)
    # V(H) D = O(D): the ratio must not blow up towards Γ
    if ratio.max() > cap or ratio[near].max() > 10 * max(ratio[~near].max(), 1e-6):
        raise InvalidInput(f"Γ is not invariant under V(H): |V(H)D|/D up to {ratio.max():.3e}")
    return float(ratio.max())


def transport_operator(H: HamiltonianSymbol, germ: Germ, form: VolumeForm, check: bool = True,
                       tables=None) -> TransportCoefficients:
    """Assemble the transport operator of ``H`` on ``germ`` with volume form ``form``.

    ``L_{V} mu / mu`` is evaluated in the chart that best covers a point, as
    ``V(ln a_I) + div_y(dy/dt)`` with the divergence differenced along Γ.
    The trace identity ``V(ln a_I) + tr(H_pp S_I'' + H_pq)`` (q-charts, rotated
    by the chart otherwise) is exposed separately as ``trace_ratio``.
    """
    if check:
        check_invariance(H, germ)
    n = H.n
    V = hamiltonian_field(H)
    dens = [chart_density(form, ch, germ)[1] for ch in germ.atlas]

    def lie_ratio(m):
        k = _chart_for(germ, m)
        ch = germ.atlas[k]
        y = chart_coords(ch.I, m)
        la = dens[k]
        rho = ScalarField(n, lambda yy, la=la: np.exp(np.asarray(la(yy))), name="a_I")
        lie = lie_derivative_volume(V, rho, ch)
        return complex(lie(y) / np.exp(la.value(y)))

    def trace_ratio(m):
        k = _chart_for(germ, m)
        ch = germ.atlas[k]
        I = ch.I
        y = chart_coords(I, m)
        _, gla, _ = eval_jet(dens[k], y)
        _, _, Hh = eval_jet(H.H, m)
        Hh = np.real(Hh)
        # rotate H to the chart's canonical coordinates (p', q') = gamma_I(p, q)
        R = _gamma_matrix(I)
        Hr = R @ Hh @ R.T
        Hpp, Hpq = Hr[:n, :n], Hr[:n, n:]
        S2 = np.real(ch.S.hessian(y))
        v = chart_coords(I, V(m))
        return complex(gla @ v + np.trace(Hpp @ S2 + Hpq))

    def zeroth(m):
        _, _, Hh = eval_jet(H.H, m)
        mixed = float(np.trace(np.real(Hh)[:n, n:]))
        return -0.5 * mixed + 0.5 * lie_ratio(m)

    return TransportCoefficients(H, germ, form, V, zeroth, lie_ratio, trace_ratio)


def _gamma_matrix(I):
    """Matrix ``G`` with ``gamma_I(m) = G m`` (so gradients rotate by ``G``)."""
    n = I.n
    G = np.zeros((2 * n, 2 * n))
    for j in range(n):
        if j in I.members:
            G[j, j] = 1.0
            G[n + j, n + j] = 1.0
        else:
            G[j, n + j] = -1.0
            G[n + j, j] = 1.0
    return G


@dataclass
class TransportSolution:
    """Solution of ``P phi = 0`` tabulated along one closed trajectory."""

    times: np.ndarray
    points: np.ndarray
    values: np.ndarray
    period: float
    periodicity_defect: float

    def __post_init__(self):
        t = self.times
        v = self.values.copy()
        v[-1] = v[0]
        pts = self.points.copy()
        pts[-1] = pts[0]
        self._re = CubicSpline(t, v.real, bc_type="periodic")
        self._im = CubicSpline(t, v.imag, bc_type="periodic")
        self._m = CubicSpline(t, pts, bc_type="periodic", axis=0)

    def at_time(self, t):
        t = np.mod(t, self.period)
        return self._re(t) + 1j * self._im(t)

    def __call__(self, m):
        """Amplitude at points of Γ, by nearest trajectory time and Newton refinement."""
        m = np.atleast_2d(np.asarray(m, dtype=float))
        d2 = ((m[:, None, :] - self.points[None, :-1, :]) ** 2).sum(-1)
        t = self.times[np.argmin(d2, axis=1)]
        for _ in range(3):
            r = self._m(t) - m
            dm = self._m(t, 1)
            ddm = self._m(t, 2)
            g = (r * dm).sum(-1)
            H = (dm * dm).sum(-1) + (r * ddm).sum(-1)
            t = t - g / np.where(np.abs(H) > 1e-300, H, 1.0)
        return self.at_time(t)


def solve_transport(coeffs: TransportCoefficients, m0, phi0: complex = 1.0, period: Optional[float] = None,
                    n_steps: int = 512, tol: float = 1e-6, refine_tol: Optional[float] = None) -> TransportSolution:
    """Integrate ``P phi = 0`` along the ``V(H)`` trajectory from ``m0``.

    Hamilton's equations and ``dphi/dt = -c(m) phi`` are advanced together by
    the classical fourth-order Runge-Kutta method over one period.  If
    ``refine_tol`` is given, the step count doubles until two successive
    runs agree to that tolerance.

    Raises
    ------
    QuantizationError
        If the trajectory or the solution fails to close after one period.
    """
    if period is None:
        raise InvalidInput("closed trajectories need their period")

    def rhs(state):
        m = state[:-1].real
        return np.concatenate([coeffs.flow(m), [-coeffs.zeroth(m) * state[-1]]])

    def run(N):
        dt = period / N
        s = np.concatenate([np.asarray(m0, dtype=complex), [complex(phi0)]])
        out = [s]
        for _ in range(N):
            k1 = rhs(s)
            k2 = rhs(s + 0.5 * dt * k1)
            k3 = rhs(s + 0.5 * dt * k2)
            k4 = rhs(s + dt * k3)
            s = s + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            out.append(s)
        return np.array(out)

    N = n_steps
    traj = run(N)
    if refine_tol is not None:
        while True:
            traj2 = run(2 * N)
            if np.abs(traj2[::2, -1] - traj[:, -1]).max() <= refine_tol:
                traj, N = traj2, 2 * N
                break
            traj, N = traj2, 2 * N
            if N > 2 ** 16:
                break
    pts = traj[:, :-1].real
    vals = traj[:, -1]
    gap = np.linalg.norm(pts[-1] - pts[0])
    defect = abs(vals[-1] - vals[0]) / max(abs(vals[0]), 1e-300)
    if gap > 1e-6 * max(1.0, np.linalg.norm(pts[0])):
        raise QuantizationError(f"trajectory does not close after one period (gap {gap:.2e})")
    if defect > tol:
        raise QuantizationError(f"transport solution is not periodic (defect {defect:.2e})")
    return TransportSolution(np.linspace(0.0, period, N + 1), pts, vals, period, defect)


def fd_spectrum(potential: Callable, h: float, half_width: float, n_points: int, k: int) -> np.ndarray:
    """Lowest ``k`` eigenvalues of ``-(h^2/2) d^2/dq^2 + V(q)`` on ``[-L, L]``.

    Second-order differences with Dirichlet ends; an independent check of
    quantized energies (the discretization error is ``O(dx^2)``).
    """
    from scipy.linalg import eigh_tridiagonal

    q = np.linspace(-half_width, half_width, n_points + 2)[1:-1]
    dx = q[1] - q[0]
    diag = h ** 2 / dx ** 2 + np.asarray(potential(q), dtype=float)
    off = np.full(n_points - 1, -0.5 * h ** 2 / dx ** 2)
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1), eigvals_only=True)
