import numpy as np
import pytest
from scipy.integrate import quad

from germcanop.canop import VolumeForm
from germcanop.errors import InvalidInput
from germcanop.families import circle_germ, circle_point, circle_volume_form, product_circle_germ
from germcanop.fields import pointwise
from germcanop.germ import Cycle
from germcanop.quantization import (admissible_parameters, check_quantization, line_integral_pdq,
                                    residual_to_lattice, var_ln_a, var_phi)


def _circle_family(h):
    def fam(E):
        g = circle_germ(E)
        return g, circle_volume_form(g), h
    return fam


@pytest.mark.parametrize("E", [0.05, 0.5, 2.0])
def test_var_phi_equals_enclosed_area(E):
    g = circle_germ(E)
    R2 = 2 * E
    c = g.cycles[0]
    vp = var_phi(g, c)
    # oint p dq with p = -R sin t, q = R cos t
    exact = quad(lambda t: R2 * np.sin(t) ** 2, 0, 2 * np.pi)[0]
    assert abs(vp - np.pi * R2) <= 1e-8
    assert abs(vp - exact) <= 1e-8
    assert abs(line_integral_pdq(c.points) - exact) <= 1e-3 * exact


def test_var_phi_independent_of_lift(circle):
    g, _ = circle
    c = g.cycles[0]
    vals = [var_phi(g, c, start_sheet=s) for s in g.zaction.sheets]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-10


def test_contractible_path_has_zero_variation(circle):
    g, form = circle
    t = np.linspace(0, 2.0, 50)
    pts = circle_point(1.0, np.concatenate([t, t[::-1]]))
    c = Cycle("back-and-forth", pts, 0)
    assert abs(var_phi(g, c)) <= 1e-12
    assert abs(var_ln_a(form, g, c)) <= 1e-12


def test_var_ln_a_invariant_form(circle):
    g, form = circle
    assert abs(var_ln_a(form, g, g.cycles[0]) + 2j * np.pi) <= 1e-10


def test_var_ln_a_constant_and_z(circle):
    g, _ = circle
    const = VolumeForm(pointwise(2, lambda m: 2.0 + 0j), ln_branch_base=(np.zeros(2), np.log(2.0)))
    assert abs(var_ln_a(const, g, g.cycles[0])) <= 1e-12
    zform = VolumeForm(pointwise(2, lambda m: m[1] - 1j * m[0]), ln_branch_base=(np.array([0.0, 1.0]), 0.0))
    assert abs(var_ln_a(zform, g, g.cycles[0]) - 2j * np.pi) <= 1e-10


def test_residual_to_lattice():
    assert residual_to_lattice(4 * np.pi) == pytest.approx(0, abs=1e-15)
    assert residual_to_lattice(2 * np.pi + 0.1 + 0.2j) == pytest.approx(abs(0.1 + 0.2j))


def test_quantized_energy_and_perturbation():
    h = 0.05
    E = h * 3.5
    g = circle_germ(E)
    rep = check_quantization(g, circle_volume_form(g), h)
    assert rep.holds and abs(rep.rows[0].winding - round(rep.rows[0].winding)) <= 1e-10
    delta = 1e-4
    g2 = circle_germ(E + delta)
    rep2 = check_quantization(g2, circle_volume_form(g2), h)
    assert rep2.max_residual == pytest.approx(2 * np.pi * delta / h, rel=1e-8)
    assert not rep2.holds


def test_admissible_energies():
    h = 0.05
    found = admissible_parameters(_circle_family(h), 0.0, 0.3)
    expected = h * (np.arange(6) + 0.5)
    assert len(found) == len(expected)
    assert np.abs(np.array(found) - expected).max() <= 1e-8


def test_admissible_planck_constants():
    def fam(h):
        g = circle_germ(0.5)
        return g, circle_volume_form(g), h

    found = admissible_parameters(fam, 0.1, 0.4, which="h", n_scan=400)
    expected = [1 / 9, 1 / 7, 1 / 5, 1 / 3]
    assert len(found) == 4 and np.abs(np.array(found) - expected).max() <= 1e-8


def test_empty_range():
    assert admissible_parameters(_circle_family(0.05), 0.3, 0.3) == []
    with pytest.raises(InvalidInput):
        admissible_parameters(_circle_family(0.05), 0.0, 0.1, which="x")


def test_product_circle_two_cycles():
    h = 0.1
    g = product_circle_germ(0.5 * h, 1.5 * h)
    zz = lambda m: (m[2] - 1j * m[0]) * (m[3] - 1j * m[1])
    base = g.cycles[0].points[0]
    form = VolumeForm(pointwise(4, lambda m: -1.0 / zz(m)), ln_branch_base=(base, np.log(-1.0 / zz(base) + 0j)))
    rep = check_quantization(g, form, h)
    assert [r.cycle_id for r in rep.rows] == ["a1", "a2"] and rep.holds
    for cid in ("a1", "a2"):
        assert abs(g.monodromy_residual(cid)) <= 1e-9
    g2 = product_circle_germ(0.5 * h, 1.6 * h)
    rep2 = check_quantization(g2, form, h)
    assert rep2.rows[0].residual <= 1e-8 and rep2.rows[1].residual > 1e-3


def test_bad_h_rejected(circle):
    g, form = circle
    with pytest.raises(InvalidInput):
        check_quantization(g, form, 0.0)
