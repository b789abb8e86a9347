"""Damped Newton minimization used by every argmin in the package."""
from __future__ import annotations

import numpy as np

from .errors import NumericalFailure, PositivityViolation


def newton_minimize(jet, x0, max_iter=50, gtol=1e-13, xtol=1e-15, check_pd=True):
    """Minimize a smooth real function by Newton's method with Armijo backtracking.

    Parameters
    ----------
    jet : callable
        ``x -> (value, gradient, hessian)``, all real.
    x0 : array_like
        Starting point.
    check_pd : bool
        Raise :class:`PositivityViolation` if the Hessian at the accepted
        point is not positive definite.

    Returns
    -------
    x : ndarray
        The minimizer.
    value : float
    hessian : ndarray
    """
    x = np.array(x0, dtype=float).reshape(-1)
    f, g, H = jet(x)
    for _ in range(max_iter):
        gn = np.linalg.norm(g)
        if gn <= gtol * max(1.0, abs(f)):
            break
        try:
            L = np.linalg.cholesky(H)
            step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            # indefinite Hessian away from the minimum: shifted Newton step
            w = np.linalg.eigvalsh(H)
            shift = max(0.0, -w.min()) + 1e-8 * max(1.0, np.abs(w).max())
            step = -np.linalg.solve(H + shift * np.eye(len(x)), g)
        t = 1.0
        slope = float(g @ step)
        while True:
            xn = x + t * step
            fn, gn_, Hn = jet(xn)
            if np.isfinite(fn) and fn <= f + 1e-4 * t * slope + 1e-15 * max(1.0, abs(f)):
                break
            t *= 0.5
            if t < 1e-12:
                xn, fn, gn_, Hn = x, f, g, H
                break
        dx = np.linalg.norm(xn - x)
        x, f, g, H = xn, fn, gn_, Hn
        if dx <= xtol * max(1.0, np.linalg.norm(x)):
            break
    else:
        if np.linalg.norm(g) > 1e-8 * max(1.0, abs(f)):
            raise NumericalFailure(f"Newton did not converge in {max_iter} iterations", point=x)
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("Newton produced non-finite iterate", point=x)
    if check_pd:
        w = np.linalg.eigvalsh(0.5 * (H + H.T))
        if w.min() <= 0.0:
            raise PositivityViolation(
                f"Hessian at the minimizer is not positive definite (min eigenvalue {w.min():.3e})",
                witness=x)
    return x, float(f), H


def newton_root(fun_jac, x0, max_iter=50, tol=1e-14):
    """Solve a square (possibly complex) system by undamped Newton iteration."""
    x = np.array(x0, dtype=complex).reshape(-1)
    for _ in range(max_iter):
        F, J = fun_jac(x)
        dx = np.linalg.solve(J, -F)
        x = x + dx
        if np.linalg.norm(dx) <= tol * max(1.0, np.linalg.norm(x)):
            return x
    raise NumericalFailure(f"Newton root solve did not converge in {max_iter} iterations", point=x)
