"""Residual of H acting on the canonical operator of a quantized circle, versus h.

The volume form is modulated, so the transport correction matters: the
corrected residual decays faster than the uncorrected one.
"""
import numpy as np

from germcanop.cli import fitted_slope, residual_scan

hs = [2.0 ** -k for k in range(4, 9)]
rows = {t: residual_scan(hs, modulation=0.3, transport=t) for t in (False, True)}
print("      h      phi = 1   transported")
for a, b in zip(rows[False], rows[True]):
    print(f"{a[0]:.5f}  {a[3]:.3e}   {b[3]:.3e}")
for t, label in [(False, "phi = 1"), (True, "transported")]:
    print(f"log2-slope ({label}): {fitted_slope(hs, [r[3] for r in rows[t]]):.2f}")
