"""Smooth complex-valued fields on R^m with derivative queries up to order two.

Every other module consumes fields through :func:`eval_jet`.  A field is
either *analytic* (the caller supplies gradient and Hessian callables) or
*finite-difference* (central differences of the value callable).

Evaluator convention: the value callable receives an array of shape
``(..., dim)`` and returns an array of shape ``(...)``.  Gradient and
Hessian callables receive a single point of shape ``(dim,)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInput, NumericalFailure

EPS = np.finfo(float).eps
DEFAULT_STEP = EPS ** (1.0 / 3.0)
DEFAULT_HESS_STEP = EPS ** (1.0 / 4.0)


class ScalarField:
    """Smooth map R^dim -> C with value, gradient and Hessian queries.

    Parameters
    ----------
    dim : int
        Dimension of the domain.
    func : callable
        Vectorized evaluator, ``(..., dim) -> (...)``.
    grad, hess : callable, optional
        Analytic derivatives at a single point.  If ``grad`` is given the
        field is analytic; a missing ``hess`` is then obtained by central
        differences of ``grad``.
    step : float, optional
        Relative step for first differences (default ``eps**(1/3)``).
    hess_step : float, optional
        Relative step for second differences (default ``eps**(1/4)``).
    box : array_like, optional
        ``(dim, 2)`` bounds of the domain; finite-difference queries closer
        than two steps to its boundary are rejected.
    """

    def __init__(
        self,
        dim: int,
        func: Callable,
        grad: Optional[Callable] = None,
        hess: Optional[Callable] = None,
        step: Optional[float] = None,
        hess_step: Optional[float] = None,
        box=None,
        name: str = "",
    ):
        if int(dim) < 1:
            raise InvalidInput("dim must be a positive integer")
        if grad is None and hess is not None:
            raise InvalidInput("an analytic Hessian requires an analytic gradient")
        self._dim = int(dim)
        self._func = func
        self._grad = grad
        self._hess = hess
        self._step = float(step) if step is not None else DEFAULT_STEP
        self._hess_step = float(hess_step) if hess_step is not None else (
            float(step) if step is not None else DEFAULT_HESS_STEP)
        self._box = None if box is None else np.asarray(box, dtype=float).reshape(self._dim, 2)
        self.name = name

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def derivative_mode(self) -> str:
        return "analytic" if self._grad is not None else "finite_difference"

    @property
    def step(self) -> float:
        return self._step

    @property
    def box(self):
        return self._box

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self._dim:
            raise InvalidInput(f"expected trailing dimension {self._dim}, got {x.shape}")
        return np.asarray(self._func(x))

    def value(self, x) -> complex:
        return complex(self(np.asarray(x, dtype=float).reshape(self._dim)))

    def gradient(self, x) -> np.ndarray:
        return eval_jet(self, x)[1]

    def hessian(self, x) -> np.ndarray:
        return eval_jet(self, x)[2]

    def with_derivative_mode(self, mode: str, step: Optional[float] = None) -> "ScalarField":
        """Return a copy forced into ``'finite_difference'`` or kept analytic."""
        if mode == "finite_difference":
            return ScalarField(self._dim, self._func, step=step, box=self._box, name=self.name)
        if mode == "analytic":
            if self._grad is None:
                raise InvalidInput("field has no analytic derivatives")
            return self
        raise InvalidInput(f"unknown derivative mode {mode!r}")

    def _steps(self, x, rel):
        return rel * np.maximum(1.0, np.abs(x))

    def _check_boundary(self, x):
        if self._box is None or self._grad is not None:
            return
        margin = 2.0 * self._steps(x, max(self._step, self._hess_step))
        if np.any(x - margin < self._box[:, 0]) or np.any(x + margin > self._box[:, 1]):
            raise InvalidInput(f"point {x} is within two difference steps of the domain boundary")


def _finite(arr, x, what):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite {what} at x={np.array2string(np.asarray(x))}", point=np.asarray(x))
    return arr


def _fd_gradient(f: ScalarField, x: np.ndarray) -> np.ndarray:
    n = f.dim
    hs = f._steps(x, f._step)
    pts = np.repeat(x[None, :], 2 * n, axis=0)
    for i in range(n):
        pts[2 * i, i] += hs[i]
        pts[2 * i + 1, i] -= hs[i]
    vals = np.asarray(f(pts), dtype=complex).reshape(2 * n)
    _finite(vals, x, "value in difference stencil")
    return (vals[0::2] - vals[1::2]) / (2.0 * hs)


def _fd_hessian_from_values(f: ScalarField, x: np.ndarray, f0: complex) -> np.ndarray:
    n = f.dim
    hs = f._steps(x, f._hess_step)
    pts = []
    for i in range(n):
        for s in (1.0, -1.0):
            y = x.copy()
            y[i] += s * hs[i]
            pts.append(y)
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                y = x.copy()
                y[i] += si * hs[i]
                y[j] += sj * hs[j]
                pts.append(y)
    vals = np.asarray(f(np.array(pts)), dtype=complex).reshape(len(pts))
    _finite(vals, x, "value in difference stencil")
    H = np.zeros((n, n), dtype=complex)
    for i in range(n):
        H[i, i] = (vals[2 * i] - 2.0 * f0 + vals[2 * i + 1]) / hs[i] ** 2
    k = 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp, mm = vals[k:k + 4]
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * hs[i] * hs[j])
            k += 4
    return H


def _fd_hessian_from_gradient(f: ScalarField, x: np.ndarray) -> np.ndarray:
    n = f.dim
    hs = f._steps(x, f._step)
    H = np.zeros((n, n), dtype=complex)
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += hs[i]
        xm[i] -= hs[i]
        H[:, i] = (np.asarray(f._grad(xp)) - np.asarray(f._grad(xm))) / (2.0 * hs[i])
    return H


def eval_jet(f: ScalarField, x):
    """Value, gradient and Hessian of ``f`` at a single point.

    Returns
    -------
    value : complex
    gradient : ndarray, shape (dim,)
    hessian : ndarray, shape (dim, dim)
        Symmetrized in finite-difference mode; caller-supplied Hessians are
        returned unmodified.

    Raises
    ------
    NumericalFailure
        If any evaluation is non-finite.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != f.dim:
        raise InvalidInput(f"point has {x.size} coordinates, field dim is {f.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("evaluation point must be finite")
    f._check_boundary(x)
    v = complex(np.asarray(f(x)).reshape(()))
    _finite(np.array([v]), x, "value")
    if f._grad is not None:
        g = np.asarray(f._grad(x), dtype=complex).reshape(f.dim)
        _finite(g, x, "gradient")
        if f._hess is not None:
            H = np.asarray(f._hess(x), dtype=complex).reshape(f.dim, f.dim)
        else:
            H = _fd_hessian_from_gradient(f, x)
            H = 0.5 * (H + H.T)
        _finite(H, x, "Hessian")
        return v, g, H
    g = _fd_gradient(f, x)
    H = _fd_hessian_from_values(f, x, v)
    return v, g, 0.5 * (H + H.T)


class VectorField:
    """Map R^dim -> C^codim assembled from scalar components."""

    def __init__(self, components: Sequence[ScalarField]):
        comps = list(components)
        if not comps:
            raise InvalidInput("a vector field needs at least one component")
        dims = {c.dim for c in comps}
        modes = {c.derivative_mode for c in comps}
        if len(dims) != 1 or len(modes) != 1:
            raise InvalidInput("components must share dim and derivative_mode")
        self.components = tuple(comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def codim(self) -> int:
        return len(self.components)

    @property
    def derivative_mode(self) -> str:
        return self.components[0].derivative_mode

    def __call__(self, x):
        return np.stack([np.asarray(c(x)) for c in self.components], axis=-1)

    def jacobian(self, x) -> np.ndarray:
        """Complex Jacobian, shape ``(codim, dim)``."""
        return np.array([eval_jet(c, x)[1] for c in self.components])

    def jets(self, x):
        """Values, Jacobian and stacked Hessians ``(codim, dim, dim)``."""
        js = [eval_jet(c, x) for c in self.components]
        return (np.array([j[0] for j in js]), np.array([j[1] for j in js]),
                np.array([j[2] for j in js]))


@dataclass(frozen=True)
class FDReport:
    """Analytic-vs-central-difference discrepancies per sample point."""

    points: np.ndarray
    gradient_errors: np.ndarray
    hessian_errors: np.ndarray

    @property
    def max_gradient_error(self) -> float:
        return float(np.max(self.gradient_errors))

    @property
    def max_hessian_error(self) -> float:
        return float(np.max(self.hessian_errors))


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


def fd_consistency(f: ScalarField, sample_points, step: Optional[float] = None) -> FDReport:
    """Compare analytic derivatives of ``f`` with central differences.

    Errors are relative, ``|fd - exact| / max(1, |exact|)``.
    """
    if f.derivative_mode != "analytic":
        raise InvalidInput("fd_consistency needs a field with analytic derivatives")
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.size == 0:
        raise InvalidInput("sample set is empty")
    fd = f.with_derivative_mode("finite_difference", step=step)
    ge, he = [], []
    for x in pts:
        _, g, H = eval_jet(f, x)
        _, gf, Hf = eval_jet(fd, x)
        ge.append(_rel(gf, g))
        he.append(_rel(Hf, H))
    return FDReport(pts, np.array(ge), np.array(he))


def constant_field(dim: int, c: complex) -> ScalarField:
    """The field identically equal to ``c``, with exact derivatives."""
    c = complex(c)
    return ScalarField(
        dim,
        lambda x: np.full(np.asarray(x).shape[:-1], c),
        grad=lambda x: np.zeros(dim, dtype=complex),
        hess=lambda x: np.zeros((dim, dim), dtype=complex),
        name="constant",
    )


def coordinate_field(dim: int, i: int) -> ScalarField:
    """The coordinate function ``x_i``."""
    e = np.zeros(dim)
    e[i] = 1.0
    return ScalarField(dim, lambda x: np.asarray(x)[..., i], grad=lambda x: e.astype(complex),
                       hess=lambda x: np.zeros((dim, dim), dtype=complex), name=f"x{i}")


def pointwise(dim: int, fn: Callable, **kwargs) -> ScalarField:
    """Wrap a single-point function ``(dim,) -> complex`` as a vectorized field.

    Useful for fields defined through an inner solve (argmin, root), which
    cannot be evaluated on whole arrays at once.
    """

    def vec(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, dim)
        out = np.array([fn(p) for p in flat], dtype=complex)
        return out.reshape(x.shape[:-1])

    return ScalarField(dim, vec, **kwargs)
