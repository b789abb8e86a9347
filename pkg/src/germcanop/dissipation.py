"""Dissipations, sampled ideal-membership tests and constructive reductions.

A dissipation is a smooth nonnegative function ``D`` whose zero set is the
geometric support of an asymptotic submanifold.  Membership of ``f`` in the
ideal ``D^s`` (``|f| <= c D^s`` near the zero set) is tested numerically on
samples; the tests report fitted constants rather than proofs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._optim import newton_minimize
from .errors import DegenerateChart, InsufficientData, InvalidInput, PositivityViolation
from .fields import ScalarField, VectorField, eval_jet, pointwise


class Dissipation:
    """A real, nonnegative smooth function on a box in R^dim.

    Parameters
    ----------
    field : ScalarField
        Real-valued field; imaginary parts are discarded.
    domain_box : array_like, optional
        ``(dim, 2)`` bounds.
    """

    def __init__(self, field: ScalarField, domain_box=None):
        self.field = field
        self.domain_box = None if domain_box is None else np.asarray(domain_box, float).reshape(field.dim, 2)

    @property
    def dim(self) -> int:
        return self.field.dim

    def __call__(self, x):
        return np.real(self.field(x))

    def jet(self, x):
        """Real value, gradient and Hessian at a point."""
        v, g, H = eval_jet(self.field, x)
        return v.real, g.real, H.real

    def check_nonnegative(self, samples, tol: float = 1e-12) -> None:
        vals = self(np.atleast_2d(samples))
        if np.any(vals < -tol):
            i = int(np.argmin(vals))
            raise InvalidInput(f"dissipation is negative ({vals[i]:.3e}) at {np.atleast_2d(samples)[i]}")

    @classmethod
    def from_callable(cls, dim, func, grad=None, hess=None, domain_box=None, **kw):
        return cls(ScalarField(dim, func, grad=grad, hess=hess, **kw), domain_box)


@dataclass(frozen=True)
class MembershipResult:
    """Outcome of a sampled test of ``|f| <= c D^s``.

    Attributes
    ----------
    holds : bool
    fitted_constant : float
        Least ``c`` valid on all samples (``inf`` if ``f != 0`` where ``D = 0``).
    growth : float
        Ratio of the largest ``|f|/D^s`` over the 10% of samples nearest the
        zero set to the largest over the farthest half.
    slope : float
        Log-log slope of the binned upper envelope of ``|f|/D^s`` against
        ``D``; negative values mean the ratio grows toward the zero set.
    """

    holds: bool
    fitted_constant: float
    growth: float
    slope: float

    def __bool__(self):
        return self.holds

    def __iter__(self):
        return iter((self.holds, self.fitted_constant))


def _envelope_slope(Dv, r, nbins=6):
    order = np.argsort(Dv)
    bins = np.array_split(order, min(nbins, len(order)))
    xs, ys = [], []
    for b in bins:
        env = r[b].max()
        if env > 0 and np.all(Dv[b] > 0):
            xs.append(np.mean(np.log(Dv[b])))
            ys.append(np.log(env))
    if len(xs) < 2 or np.ptp(xs) == 0:
        return 0.0
    return float(np.polyfit(xs, ys, 1)[0])


def membership_order(f, D: Dissipation, samples, s: float, cap: float = 1e6,
                     growth_tol: float = 2.0, slope_tol: float = 0.05) -> MembershipResult:
    """Sampled test of ``f in D^s``.

    The test passes when the fitted constant is at most ``cap`` and the
    ratio ``|f|/D^s`` shows no growth toward the zero set: neither a
    near/far envelope ratio above ``growth_tol`` nor a negative envelope
    log-log slope beyond ``slope_tol``.

    Parameters
    ----------
    f : ScalarField or callable
        Vectorized evaluator.
    samples : array_like, shape (N, dim)

    Raises
    ------
    InsufficientData
        If every sample lies on the zero set of ``D``.
    """
    if s < 0:
        raise InvalidInput("order s must be nonnegative")
    X = np.atleast_2d(np.asarray(samples, float))
    fv = np.abs(np.asarray(f(X), dtype=complex)).reshape(-1)
    Dv = np.asarray(D(X), float).reshape(-1)
    on = Dv <= 0.0
    if np.all(on):
        raise InsufficientData("all samples lie on the zero locus of the dissipation")
    if np.any(fv[on] > 1e-300):
        return MembershipResult(False, np.inf, np.inf, -np.inf)
    Dv, fv = Dv[~on], fv[~on]
    r = fv / Dv ** s
    c = float(r.max())
    if c == 0.0:
        return MembershipResult(True, 0.0, 0.0, 0.0)
    order = np.argsort(Dv)
    k = max(1, len(order) // 10)
    near = r[order[:k]].max()
    far = r[order[len(order) // 2:]].max()
    growth = float(near / far) if far > 0 else (np.inf if near > 0 else 0.0)
    slope = _envelope_slope(Dv, r)
    holds = bool(c <= cap and growth <= growth_tol and slope >= -slope_tol)
    return MembershipResult(holds, c, growth, slope)


def directional_derivative(f: ScalarField, direction: VectorField):
    """Vectorized evaluator of ``Xf = sum_i X_i df/dx_i`` assembled from jets."""

    def xf(x):
        x = np.atleast_2d(np.asarray(x, float))
        out = np.empty(len(x), dtype=complex)
        for k, p in enumerate(x):
            out[k] = np.dot(np.asarray(direction(p)).reshape(-1), eval_jet(f, p)[1])
        return out

    return xf


def derivative_order_check(f: ScalarField, D: Dissipation, s: float, direction: VectorField,
                           samples, loss: Optional[float] = None, **kw) -> bool:
    """Check the order lost by differentiating a member of ``D^s``.

    With ``loss=0.5`` this tests that ``Xf`` lies in ``D^(s-1/2)`` (the
    universal half-order loss).  With ``loss=0`` it tests invariance,
    ``Xf`` in ``D^s``.  The default ``loss=None`` picks invariance when
    ``XD`` itself lies in ``D`` on the samples (the field is tangent to the
    dissipation) and the half-order loss otherwise.  Invariance may fail even
    when ``XD = 0``, e.g. for ``D = exp(-1/x2^2)``, ``f = D sin(x1/x2)``.
    """
    if s < 0.5:
        raise InvalidInput("s must be at least 1/2")
    if not membership_order(f, D, samples, s, **kw).holds:
        raise InvalidInput(f"f is not in D^{s} on the samples")
    if loss is None:
        xd = directional_derivative(D.field, direction)
        try:
            tangent = membership_order(xd, D, samples, 1.0, **kw).holds
        except InsufficientData:
            tangent = False
        loss = 0.0 if tangent else 0.5
    xf = directional_derivative(f, direction)
    return membership_order(xf, D, samples, s - loss, **kw).holds


def equivalence_constants(D1, D2, samples, floor: float = 1e-10, labels=None):
    """Two-sided constants ``c D1 <= D2 <= C D1`` fitted on samples with ``D1, D2 >= floor``.

    Equivalence is a local property, so with ``labels`` (one cluster label
    per sample) the constants are reported per cluster as
    ``{label: (c, C)}`` instead of being merged into one global pair.

    Raises
    ------
    InsufficientData
        If no sample clears the floor.
    """
    X = np.atleast_2d(np.asarray(samples, float))
    a = np.real(np.asarray(D1(X))).reshape(-1)
    b = np.real(np.asarray(D2(X))).reshape(-1)
    keep = (a >= floor) & (b >= floor)
    if not np.any(keep):
        raise InsufficientData("no sample has both dissipations above the floor")
    ratio = b / np.where(keep, a, 1.0)
    if labels is None:
        return float(ratio[keep].min()), float(ratio[keep].max())
    labels = np.asarray(labels)
    out = {}
    for lab in np.unique(labels):
        sel = keep & (labels == lab)
        if np.any(sel):
            out[lab.item() if hasattr(lab, "item") else lab] = (float(ratio[sel].min()), float(ratio[sel].max()))
    return out


@dataclass
class GraphPresentation:
    """Presentation ``D ~ d(x'') + |x' - g(x'')|^2`` near a point of the zero set.

    The first ``k`` coordinates are ``x'``; the remaining ones are ``x''``.
    """

    k: int
    n: int
    reduced_dissipation: Dissipation
    graph_map: VectorField
    foot_map: VectorField
    source: Dissipation = field(repr=False)

    def assembled(self, x):
        """Evaluate ``d(x'') + sum |x'_j - g_j(x'')|^2`` (vectorized)."""
        X = np.atleast_2d(np.asarray(x, float))
        x1, x2 = X[:, :self.k], X[:, self.k:]
        g = np.asarray(self.graph_map(x2)).reshape(len(X), self.k)
        return np.asarray(self.reduced_dissipation(x2)).reshape(-1) + np.sum(np.abs(x1 - g) ** 2, axis=1)

    def equivalence(self, samples, floor: float = 1e-10):
        """Fitted ``(c, C)`` with ``c D <= assembled <= C D`` on samples."""
        return equivalence_constants(self.source, self.assembled, samples, floor)

    def imag_bound(self, samples_xpp, floor: float = 1e-14) -> float:
        """Fitted constant in ``|Im g| <= c d^(1/2)`` on samples of ``x''``."""
        Y = np.atleast_2d(np.asarray(samples_xpp, float))
        g = np.asarray(self.graph_map(Y)).reshape(len(Y), self.k)
        d = np.asarray(self.reduced_dissipation(Y)).reshape(-1)
        im = np.max(np.abs(g.imag), axis=1)
        keep = d > floor
        if np.any(im[~keep] > 1e-8):
            return np.inf
        return float(np.max(im[keep] / np.sqrt(d[keep]))) if np.any(keep) else 0.0


def reduce_to_graph(D: Dissipation, generators: Sequence[ScalarField], x0) -> GraphPresentation:
    """Constructive implicit-function reduction of an asymptotic submanifold.

    Given generators ``f_1..f_k`` whose Jacobian in the first ``k``
    coordinates is invertible at ``x0`` (with ``D(x0) = 0``), returns the
    foot map ``x'(x'')`` solving ``dD/dx' = 0``, the reduced dissipation
    ``d(x'') = D(x'(x''), x'')`` and the graph map
    ``g = x' - [df/dx']^{-1} f`` evaluated at the foot.

    Raises
    ------
    DegenerateChart
        If ``df/dx'`` is singular at ``x0``.
    PositivityViolation
        If ``d^2D/dx'dx'`` is not positive definite at ``x0``.
    """
    gens = list(generators)
    k, n = len(gens), D.dim
    if not 1 <= k < n:
        raise InvalidInput("need 1 <= k < dim generators")
    x0 = np.asarray(x0, float).reshape(n)
    if abs(D(x0)) > 1e-10:
        raise InvalidInput(f"x0 is not on the zero locus (D = {D(x0):.3e})")
    J0 = np.array([eval_jet(f, x0)[1][:k] for f in gens])
    if abs(np.linalg.det(J0)) < 1e-12:
        raise DegenerateChart("generator Jacobian in x' is singular at x0")
    H0 = D.jet(x0)[2][:k, :k]
    if np.linalg.eigvalsh(0.5 * (H0 + H0.T)).min() <= 0:
        raise PositivityViolation("d2D/dx'dx' is not positive definite at x0", witness=x0)
    seed = x0[:k].copy()

    def foot(y):
        y = np.asarray(y, float).reshape(n - k)

        def jet(u):
            v, g, H = D.jet(np.concatenate([u, y]))
            return v, g[:k], H[:k, :k]

        u, _, _ = newton_minimize(jet, seed)
        return u

    def full(y):
        return np.concatenate([foot(y), np.asarray(y, float).reshape(n - k)])

    def graph(y):
        x = full(y)
        F = np.array([eval_jet(f, x)[0] for f in gens])
        J = np.array([eval_jet(f, x)[1][:k] for f in gens])
        return x[:k] - np.linalg.solve(J, F)

    d = Dissipation(pointwise(n - k, lambda y: D(full(y))))
    foot_map = VectorField([pointwise(n - k, (lambda y, j=j: foot(y)[j])) for j in range(k)])
    graph_map = VectorField([pointwise(n - k, (lambda y, j=j: graph(y)[j])) for j in range(k)])
    return GraphPresentation(k, n, d, graph_map, foot_map, D)


def restrict_function(Phi: ScalarField, gp: GraphPresentation) -> ScalarField:
    """Restriction ``phi(x'') = Phi(x', x'') + (g - x') . dPhi/dx'`` at the foot."""
    k, n = gp.k, gp.n

    def phi(y):
        y = np.asarray(y, float).reshape(n - k)
        u = np.real(np.asarray(gp.foot_map(y))).reshape(k)
        g = np.asarray(gp.graph_map(y)).reshape(k)
        v, grad, _ = eval_jet(Phi, np.concatenate([u, y]))
        return v + np.dot(g - u, grad[:k])

    return pointwise(n - k, phi)


@dataclass
class ParametricProjection:
    """Dissipation ``D~(x) = min_alpha d(alpha) + |x - X(alpha)|^2`` and its foot map."""

    dissipation: Dissipation
    foot_map: VectorField
    full: callable = field(repr=False)


def project_parametric(X: VectorField, d: Dissipation, alpha0, samples=None,
                       max_iter: int = 50) -> ParametricProjection:
    """Dissipation of the submanifold parametrized by ``alpha -> X(alpha)``.

    ``D(x, alpha) = d(alpha) + sum_i |x_i - X_i(alpha)|^2``; the foot
    ``alpha(x)`` solves ``dD/dalpha = 0`` by damped Newton from ``alpha0``
    and ``D~(x) = D(x, alpha(x))``.

    Raises
    ------
    DegenerateChart
        If ``Re dX/dalpha`` is rank deficient at ``alpha0``.
    NumericalFailure
        If Newton does not converge in ``max_iter`` iterations.
    """
    m, n = X.dim, X.codim
    alpha0 = np.asarray(alpha0, float).reshape(m)
    _, J0, _ = X.jets(alpha0)
    if np.linalg.matrix_rank(J0.real, tol=1e-10) < m:
        raise DegenerateChart("parametrization is rank deficient at alpha0")
    if samples is not None:
        A = np.atleast_2d(np.asarray(samples, float))

        def im_x(a):
            a = np.atleast_2d(a)
            return np.max(np.abs(np.asarray(X(a)).imag).reshape(len(a), n), axis=1)

        if np.any(im_x(A) > 1e-12) and not membership_order(im_x, d, A, 0.5).holds:
            raise InvalidInput("Im X is not O(d^(1/2)) on the samples")

    def full(x, a):
        x = np.asarray(x, float).reshape(n)
        dv, dg, dH = d.jet(a)
        Xv, XJ, XH = X.jets(a)
        r = x - Xv
        val = dv + np.sum(np.abs(r) ** 2)
        grad = dg - 2.0 * np.real(np.conj(r) @ XJ)
        hess = dH + 2.0 * np.real(XJ.conj().T @ XJ) - 2.0 * np.real(np.einsum("i,ijk->jk", np.conj(r), XH))
        return val, grad, 0.5 * (hess + hess.T)

    def foot(x):
        a, _, _ = newton_minimize(lambda a: full(x, a), alpha0, max_iter=max_iter)
        return a

    Dt = Dissipation(pointwise(n, lambda x: full(x, foot(x))[0]))
    fm = VectorField([pointwise(n, (lambda x, j=j: foot(x)[j])) for j in range(m)])
    return ParametricProjection(Dt, fm, full)


__all__ = [
    "Dissipation", "MembershipResult", "membership_order", "derivative_order_check",
    "directional_derivative", "equivalence_constants", "GraphPresentation", "reduce_to_graph",
    "restrict_function", "ParametricProjection", "project_parametric",
]
