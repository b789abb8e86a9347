import numpy as np
import pytest

from germcanop.canop import Grid, VolumeForm, WaveFunction
from germcanop.errors import InvalidInput, UnsupportedSymbol
from germcanop.families import circle_volume_form, point_germ
from germcanop.fields import ScalarField, constant_field
from germcanop.pdo import (HamiltonianSymbol, apply_hamiltonian, check_invariance, commutation_residual,
                           divergence_in_chart, fd_spectrum, hamiltonian_field, solve_transport,
                           transport_operator)


def gaussian(h, grid, shift=0.0, k0=0.0):
    q = grid.axes[0]
    return WaveFunction(grid, np.exp(-(q - shift) ** 2 / (2 * h) + 1j * k0 * q / h), h)


def test_plane_wave_eigenvalue():
    h = 0.1
    grid = Grid.uniform([0.0], [2 * np.pi * (1 - 1 / 256)], [256])
    p0 = 3 * h
    psi = WaveFunction(grid, np.exp(1j * p0 * grid.axes[0] / h), h)
    H = HamiltonianSymbol.polynomial_in_p(1, {2: lambda q: 0.5 * np.ones(np.shape(q)[:-1])})
    out = apply_hamiltonian(H, psi)
    assert np.abs(out.values - 0.5 * p0 ** 2 * psi.values).max() <= 1e-12


def test_constant_symbol():
    h = 0.1
    grid = Grid.uniform([-3.0], [3.0], [256])
    psi = gaussian(h, grid)
    out = apply_hamiltonian(HamiltonianSymbol.constant(2.5), psi)
    assert np.abs(out.values - 2.5 * psi.values).max() <= 1e-12


def test_mixed_symbol_on_gaussian():
    # H = p^2 q^2 / 2 + q applied to exp(-q^2/2h)
    h = 0.1
    grid = Grid.uniform([-4.0], [4.0], [2048])
    psi = gaussian(h, grid)
    q = grid.axes[0]
    H = HamiltonianSymbol.polynomial_in_p(1, {2: lambda x: 0.5 * x[..., 0] ** 2, 0: lambda x: x[..., 0]})
    exact = (-(q ** 2) / 2 * (q ** 2 - h) + q) * psi.values
    spec = apply_hamiltonian(H, psi, method="spectral").values
    fd = apply_hamiltonian(H, psi, method="fd").values
    assert np.abs(spec - exact).max() <= 1e-10
    assert np.abs(fd - exact).max() <= 1e-3


def test_unsupported_symbols():
    h = 0.1
    psi = gaussian(h, Grid.uniform([-3.0], [3.0], [128]))
    bare = HamiltonianSymbol(1, H=ScalarField(2, lambda m: np.cos(m[..., 0] * m[..., 1])))
    with pytest.raises(UnsupportedSymbol):
        apply_hamiltonian(bare, psi)
    cosp = HamiltonianSymbol(1, [(lambda q: np.ones(np.shape(q)[:-1]), lambda p: np.cos(p[..., 0]))])
    apply_hamiltonian(cosp, psi)
    with pytest.raises(UnsupportedSymbol):
        apply_hamiltonian(cosp, psi, method="fd")


def test_symmetric_ordering_is_self_adjoint():
    h = 0.1
    grid = Grid.uniform([-5.0], [5.0], [1024])
    a, b = gaussian(h, grid, 0.3, 0.5), gaussian(h, grid, -0.2, -0.4)
    H = HamiltonianSymbol(1, [(lambda q: q[..., 0], lambda p: p[..., 0])])
    dx = grid.spacing[0]
    inner = lambda u, v: np.vdot(u.values, v.values) * dx
    sym = lambda u: apply_hamiltonian(H, u, ordering="symmetric")
    assert abs(inner(a, sym(b)) - inner(sym(a), b)) <= 1e-12
    std = lambda u: apply_hamiltonian(H, u)
    assert abs(inner(a, std(b)) - inner(std(a), b)) > 1e-4


def test_hamiltonian_field():
    V = hamiltonian_field(HamiltonianSymbol.harmonic(0.5))
    assert np.allclose(V(np.array([0.2, 0.7])), [-0.7, 0.2])


def test_divergence_in_chart():
    p = ScalarField(2, lambda m: m[..., 0] + 0j, grad=lambda m: np.array([1.0, 0.0], dtype=complex),
                    hess=lambda m: np.zeros((2, 2), dtype=complex))
    q = ScalarField(2, lambda m: m[..., 1] + 0j, grad=lambda m: np.array([0.0, 1.0], dtype=complex),
                    hess=lambda m: np.zeros((2, 2), dtype=complex))
    m = np.array([0.0, 0.7])
    assert abs(divergence_in_chart(lambda x: np.array([0.0, 1.0]), [q], [p])(m)) <= 1e-8
    assert abs(divergence_in_chart(lambda x: np.array([0.0, x[1]]), [q], [p])(m) - 1) <= 1e-8
    # the normal component of X does not enter the divergence along Γ
    assert abs(divergence_in_chart(lambda x: np.array([x[0], x[1]]), [q], [p])(m) - 1) <= 1e-8


def test_invariance_check(circle):
    g, _ = circle
    assert check_invariance(HamiltonianSymbol.harmonic(0.5), g) < 1e6
    with pytest.raises(InvalidInput):
        check_invariance(HamiltonianSymbol.harmonic(0.6), g)


def test_invariant_measure_has_constant_transport(circle):
    g, form = circle
    tc = transport_operator(HamiltonianSymbol.harmonic(0.5), g, form)
    for t in np.linspace(0, 2 * np.pi, 9)[:-1] + 0.1:
        m = np.array([-np.sin(t), np.cos(t)])
        assert abs(tc.lie_ratio(m)) <= 1e-6
        assert abs(tc.trace_ratio(m)) <= 1e-8
    sol = solve_transport(tc, np.array([0.0, 1.0]), 1.0, period=2 * np.pi, n_steps=128)
    assert np.abs(sol.values - 1).max() <= 1e-6


def test_modulated_transport_solution(circle):
    g, _ = circle
    mod = 0.3
    form = circle_volume_form(g, mod)
    tc = transport_operator(HamiltonianSymbol.harmonic(0.5), g, form)
    # two independent routes to L_V mu / mu
    for t in np.linspace(0, 2 * np.pi, 13)[:-1] + 0.05:
        m = np.array([-np.sin(t), np.cos(t)])
        assert abs(tc.lie_ratio(m) - tc.trace_ratio(m)) <= 1e-6
    sol = solve_transport(tc, np.array([0.0, 1.0]), 1.0, period=2 * np.pi, n_steps=512)
    ts = np.linspace(0, 2 * np.pi, 40)
    pts = np.column_stack([-np.sin(ts), np.cos(ts)])
    rho = 1 + mod * (pts[:, 1] ** 2 - pts[:, 0] ** 2)
    ref = np.sqrt((1 + mod) / rho)
    assert np.abs(sol(pts) - ref).max() <= 1e-7


def test_fd_spectrum_harmonic():
    h = 0.05
    ev = fd_spectrum(lambda q: 0.5 * q ** 2, h, 1.5, 3000, 5)
    assert np.abs(ev - h * (np.arange(5) + 0.5)).max() <= 1e-5


def test_commutation_residual_point_germ():
    h = 0.05
    g = point_germ(1)
    form = VolumeForm(constant_field(2, 1.0), log_a=constant_field(2, 0.0))
    grid = Grid.uniform([-3.0], [3.0], [1024])
    res = commutation_residual(HamiltonianSymbol.harmonic(0.0), g, form,
                               lambda m: np.ones(len(np.atleast_2d(m))), h, grid)
    # H K phi = (h/2) K phi while H at the chart feet is q^2/2, so the gap is
    # ||(h - q^2) psi|| / 2 = sqrt(3) h / 4 relative to ||psi||
    assert res.gap / res.norm == pytest.approx(np.sqrt(3) * h / 4, rel=1e-8)
    assert res.raw / res.norm == pytest.approx(h / 2, rel=1e-8)
