import numpy as np
import pytest

from germcanop.errors import DegenerateChart, InvalidInput, PositivityViolation
from germcanop.families import circle_point, point_germ, polynomial_germ, polynomial_phase
from germcanop.fields import ScalarField, pointwise
from germcanop.germ import (Cycle, IChart, IndexSet, LagrangianChart, Sheet, ZAction,
                            build_chart_from_zaction, chart_coords, consistency_check, gamma,
                            gamma_inv, phase_dissipation, positivity_check, select_nonsingular_index,
                            transition_phase, zaction_from_phase)
from germcanop.dissipation import Dissipation


def test_gamma_roundtrip(rng):
    for members in [(), (0,), (1,), (0, 1)]:
        I = IndexSet(2, members)
        m = rng.normal(size=4)
        assert np.allclose(gamma_inv(I, gamma(I, m)), m)


def test_full_q_chart_selected():
    I = select_nonsingular_index(0.1 * np.array([[0.3, 1.0], [2.0, -1.0]]), np.eye(2))
    assert I.members == (0, 1)


def test_circle_turning_point_selects_p_chart():
    t = 0.0
    dP = np.array([[-np.cos(t)]])
    dQ = np.array([[-np.sin(t)]])
    assert select_nonsingular_index(dP, dQ).members == ()


def test_product_circle_mixed_caustic():
    dP = np.diag([-1.0, 0.0])
    dQ = np.diag([0.0, -1.0])
    assert select_nonsingular_index(dP, dQ).members == (1,)


def test_degenerate_tangent_rejected():
    with pytest.raises(DegenerateChart):
        select_nonsingular_index(np.zeros((1, 1)), np.zeros((1, 1)))


def test_point_germ_chart_is_gaussian():
    g = point_germ(1)
    ch = g.atlas[0]
    s0 = ch.S(np.array([0.0]))
    for q in np.linspace(-1, 1, 11):
        assert abs(ch.S(np.array([q])) - s0 - 0.5j * q * q) <= 1e-8
    qs = np.linspace(0.1, 1, 10)
    ratio = np.array([float(ch.d(np.array([q]))) for q in qs]) / qs ** 2
    assert ratio.max() / ratio.min() <= 1.0 + 1e-8


@pytest.mark.parametrize("k,sign", [(1, -1.0), (3, 1.0)])
def test_circle_q_chart_action(circle, k, sign):
    g, _ = circle
    ch = g.atlas[k]
    assert ch.I.members == (0,)
    ref = lambda q: 0.5 * (q * np.sqrt(1 - q * q) + np.arcsin(q))
    s0 = ch.S(np.array([0.0]))
    for q in np.linspace(-0.9, 0.9, 13):
        s = ch.S(np.array([q]))
        assert abs(s.imag) <= 1e-12
        assert abs((s - s0).real - sign * ref(q)) <= 1e-10


def test_gaussian_zaction_closed_form(rng):
    S = polynomial_phase([0, 0, 0.5j])
    za = zaction_from_phase(S)
    for m in rng.normal(size=(10, 2)):
        assert abs(za.phi(0, m)) <= 1e-12
        assert abs(za.zstar(m)[0]) <= 1e-12


def test_zaction_invariants_cubic(rng):
    coeffs = [0, 0, 0.5j, 0.1]
    g = polynomial_germ(coeffs, half_width=0.5)
    pts = np.array([[0.1 * q * q * 3 + 1j * 0, q] for q in np.linspace(-0.3, 0.3, 7)]).real
    pts = pts + 0.05 * rng.normal(size=pts.shape)
    res = g.zaction.invariant_residuals(g.dissipation, pts)
    assert res["form"] <= 10 and res["zbar"] <= 10


def test_phase_roundtrip_and_stability():
    coeffs = [0, 0, 0.5j, 0.1]
    S = polynomial_phase(coeffs)
    g = polynomial_germ(coeffs, half_width=0.5)
    ch = g.atlas[0]
    ys = np.linspace(-0.4, 0.4, 9)
    diffs = np.array([ch.S(np.array([y])) - S(np.array([y])) for y in ys])
    ds = np.array([float(ch.d(np.array([y]))) for y in ys])
    assert np.all(np.abs(diffs - diffs[4]) <= 10 * ds ** 1.5 + 1e-12)
    # perturbing Phi by O(D^{3/2}) leaves S_I unchanged modulo O(d_I^{3/2})
    D = g.dissipation
    za = g.zaction
    phi0 = za.sheets[0].phi
    bumped = pointwise(2, lambda m: phi0.value(m) + 3.0 * float(D(m)) ** 1.5)
    za2 = ZAction([Sheet(0, bumped)], za.zstar)
    ch2 = build_chart_from_zaction(za2, 0, IndexSet.full(1), ch.center, D, box=ch.box)
    for y, d in zip(ys, ds):
        assert abs(ch2.S(np.array([y])) - ch.S(np.array([y]))) <= 10 * d ** 1.5 + 1e-12


def test_transition_gaussian_and_identity():
    S = polynomial_phase([0, 0, 0.5j])
    S0 = transition_phase(S, IndexSet.empty(1), [0.0])
    for p in np.linspace(-1, 1, 21):
        assert abs(S0(np.array([p])) - 0.5j * p * p) <= 1e-10
    assert transition_phase(S, IndexSet.full(1), [0.0]) is S


def test_transition_legendre():
    S = polynomial_phase([0, 0, 0, 1.0 / 3])
    S0 = transition_phase(S, IndexSet.empty(1), [1.0])
    for p in np.linspace(0.8, 1.2, 9):
        assert abs(S0(np.array([p])) + (2.0 / 3) * p ** 1.5) <= 1e-10


def test_positivity_proportional():
    S = pointwise(1, lambda y: 0.5j * y[0] ** 2)
    d = pointwise(1, lambda y: 0.5 * y[0] ** 2)
    c, C = positivity_check((S, d), np.linspace(-1, 1, 21)[:, None])
    assert abs(c - 1) <= 1e-12 and abs(C - 1) <= 1e-12


def test_positivity_fails_for_real_phase():
    S = pointwise(1, lambda y: y[0] ** 2 + 0j)
    d = pointwise(1, lambda y: y[0] ** 2)
    with pytest.raises(PositivityViolation):
        positivity_check((S, d), np.linspace(-1, 1, 21)[:, None])


def test_positivity_quartic_with_own_dissipation():
    g = polynomial_germ([0, 0, 0, 0, 0.5j], half_width=0.5)
    ch = g.atlas[0]
    ys = np.linspace(-0.4, 0.4, 17)[:, None]
    c, C = positivity_check(ch, ys)
    assert 0 < c <= C
    ps = np.linspace(-1, 1, 200001)
    for y in ys[::4]:
        q = y[0]
        brute = (0.5 * q ** 4 + (ps - 0.0) ** 2 + (2 * q ** 3) ** 2).min()
        assert abs(float(ch.d(y)) - brute) <= 1e-9


def test_consistency_self_and_shifted():
    g = polynomial_germ([0, 0, 0.5j, 0.1], half_width=0.5)
    r = LagrangianChart.from_ichart(g.atlas[0])
    samples = np.linspace(-0.3, 0.3, 7)[:, None]
    rep = consistency_check(r, r, samples)
    assert rep.passed and rep.pq_residual <= 1e-12 and abs(rep.w_constant) <= 1e-12
    shifted = LagrangianChart(r.box, r.d, r.P, r.Q, lambda a: r.W(a) + 7.0)
    rep = consistency_check(r, shifted, samples)
    assert rep.passed and abs(rep.w_constant - 7.0) <= 1e-12


def test_consistency_reparametrized():
    g = polynomial_germ([0, 0, 0.5j, 0.1], half_width=0.5)
    r = LagrangianChart.from_ichart(g.atlas[0])
    phi = lambda a: a + 0.2 * a ** 3
    inv = lambda b: np.array([np.real(np.roots([0.2, 0, 1, -b[0]])[np.argmin(np.abs(np.roots([0.2, 0, 1, -b[0]]).imag))])])
    rt = LagrangianChart(np.array([[-0.6, 0.6]]), lambda b: r.d(inv(b)), lambda b: r.P(inv(b)),
                         lambda b: r.Q(inv(b)), lambda b: r.W(inv(b)))
    rep = consistency_check(r, rt, np.linspace(-0.3, 0.3, 7)[:, None])
    assert rep.passed and abs(rep.w_constant) <= 1e-9


def test_circle_atlas_covers_and_monodromy(circle):
    g, _ = circle
    assert g.check_coverage() == []
    assert abs(g.monodromy_residual("a")) <= 1e-9


def test_open_cycle_rejected():
    with pytest.raises(InvalidInput):
        Cycle("x", circle_point(1.0, np.linspace(0, 3, 10)))


def test_ambiguous_identification_reported():
    fold = LagrangianChart(np.array([[-1.0, 1.0]]), lambda a: 0.0, lambda a: a ** 2, lambda a: a ** 2,
                           lambda a: 0.5 * a[0] ** 4 + 0j)
    with pytest.raises(InvalidInput, match="ambiguous"):
        consistency_check(fold, fold, np.array([[0.5]]))
    rep = consistency_check(fold, fold, np.array([[0.5]]), identification=lambda a: a)
    assert rep.pq_residual <= 1e-12
