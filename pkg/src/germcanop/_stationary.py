"""Complex stationary-phase kernel shared by chart transitions and transforms.

For a complex phase ``F(w)`` with ``Im F >= 0`` the foot ``w*`` minimizes
``D_mu(w) = Im F + (mu/2) |F_w|^2`` over real ``w`` and the reduced value is
``F - 1/2 <F_w, F_ww^{-1} F_w>`` at the foot.
"""
from __future__ import annotations

import numpy as np

from ._optim import newton_minimize
from .errors import DegenerateChart, PositivityViolation


def dmu_value_grad(F, g, H, mu):
    """Value and exact gradient of ``D_mu`` from a jet of ``F``."""
    val = F.imag + 0.5 * mu * float(np.sum(np.abs(g) ** 2))
    grad = g.imag + mu * np.real(H.T @ np.conj(g))
    return val, grad


def gauss_newton_hessian(H, mu):
    """``Im F_ww + mu Re(F_ww^H F_ww)``; exact where ``F_w = 0``."""
    M = H.imag + mu * np.real(H.conj().T @ H)
    return 0.5 * (M + M.T)


def stationary_foot(jet, w0, mu=2.0, max_iter=100, fd_step=1e-6):
    """Minimize ``D_mu`` over real ``w`` starting from ``w0``.

    Parameters
    ----------
    jet : callable
        ``w -> (F, F_w, F_ww)``, complex.

    Returns
    -------
    w : ndarray
    jet_at_foot : tuple
    dmu : float
        ``D_mu`` at the foot.

    Raises
    ------
    PositivityViolation
        If the Hessian of ``D_mu`` at the foot is not positive definite.
    """

    def mjet(w):
        F, g, H = jet(w)
        v, gr = dmu_value_grad(F, g, H, mu)
        return v, gr, gauss_newton_hessian(H, mu)

    w, val, _ = newton_minimize(mjet, w0, max_iter=max_iter, check_pd=False)
    # positivity of the true Hessian at the accepted foot
    k = len(w)
    Hd = np.zeros((k, k))
    for i in range(k):
        e = np.zeros(k)
        e[i] = fd_step * max(1.0, abs(w[i]))
        gp = dmu_value_grad(*jet(w + e), mu)[1]
        gm = dmu_value_grad(*jet(w - e), mu)[1]
        Hd[:, i] = (gp - gm) / (2 * e[i])
    Hd = 0.5 * (Hd + Hd.T)
    if np.linalg.eigvalsh(Hd).min() <= 0:
        raise PositivityViolation("Hessian of D_mu is not positive definite at the foot", witness=w)
    return w, jet(w), val


def reduced_value(F, g, H):
    """``F - 1/2 <F_w, F_ww^{-1} F_w>``."""
    try:
        sol = np.linalg.solve(H, g)
    except np.linalg.LinAlgError as exc:
        raise DegenerateChart("F_ww is singular at the foot") from exc
    if not np.all(np.isfinite(sol)) or abs(np.linalg.det(H)) < 1e-300:
        raise DegenerateChart("F_ww is singular at the foot")
    return F - 0.5 * np.dot(g, sol)
