"""Push the circle germ through the harmonic quarter turn and re-check quantization."""
import numpy as np

from germcanop.families import circle_germ, circle_volume_form
from germcanop.quantization import check_quantization
from germcanop.transform import CanonicalTransform, apply_canonical_transform, push_volume_form

h = 1.0 / 31
L = circle_germ(0.5)
form = circle_volume_form(L)
g = CanonicalTransform.quarter_turn(1)
gL = apply_canonical_transform(g, L)
for label, germ, mu in [("before", L, form), ("after", gL, push_volume_form(g, form))]:
    row = check_quantization(germ, mu, h).rows[0]
    print(f"{label:6s} Var Phi = {row.var_phi.real:.12f}  residual = {row.residual:.2e}")
m = gL.gamma_samples[5]
z = m[1] - 1j * m[0]
print("image Z* vs R^2/z:", abs(gL.zaction.zstar(m)[0] - 1 / z))
