"""Quantized energy levels of the harmonic oscillator from the circle germ."""
import numpy as np

from germcanop.families import circle_germ, circle_volume_form
from germcanop.pdo import fd_spectrum
from germcanop.quantization import admissible_parameters

h = 0.01


def family(E):
    g = circle_germ(E)
    return g, circle_volume_form(g), h


levels = admissible_parameters(family, 1e-12, 0.1)
fd = fd_spectrum(lambda q: 0.5 * q ** 2, h, 1.2, 4000, len(levels))
print(" n          E      E - h(n+1/2)    E - E_fd")
for n, (E, Ef) in enumerate(zip(levels, fd)):
    print(f"{n:2d}  {E:.10f}  {E - h * (n + 0.5):12.2e}  {E - Ef:10.2e}")
