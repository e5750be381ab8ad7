"""Photon-counting fringes of two- and four-photon probes.

Rotates probe states through the two-path interferometer and tabulates the
|n1 - n2| class probabilities versus phase.  The two-photon fringe follows
[3 - I' + (1 + I') cos 2theta]/4; the four-photon probe adds a cos 4theta
component, visible in the table as a faster oscillation.
"""

import math

import numpy as np

from fringelab import (
    SchmidtSpectrum,
    aggregate_by_abs_delta,
    apply_path_rotation,
    four_photon_schmidt,
    outcome_distribution,
    spdc_two_photon,
)

IPRIME = 0.6
thetas = np.linspace(0.0, math.pi, 9)

print(f"two-photon probe, I' = {IPRIME}")
print(" theta    p(|d|=0)  p(|d|=2)   closed form p0")
two = spdc_two_photon(IPRIME)
for theta in thetas:
    classes = aggregate_by_abs_delta(outcome_distribution(apply_path_rotation(two, theta)))
    closed = (3 - IPRIME + (1 + IPRIME) * math.cos(2 * theta)) / 4
    print(f" {theta:5.2f}   {classes[0]:8.4f}  {classes[2]:8.4f}   {closed:8.4f}")

spectrum = SchmidtSpectrum([math.sqrt(0.7), math.sqrt(0.3)])
lam4 = sum(v**4 for v in spectrum.lambdas)
four = four_photon_schmidt(spectrum, 1.0)
print(f"\nfour-photon probe, two Schmidt modes, purity sum lambda^4 = {lam4:.3f}")
print(" theta    p(|d|=0)  p(|d|=2)  p(|d|=4)")
for theta in thetas:
    classes = aggregate_by_abs_delta(outcome_distribution(apply_path_rotation(four, theta)))
    print(f" {theta:5.2f}   {classes[0]:8.4f}  {classes[2]:8.4f}  {classes[4]:8.4f}")

balanced = aggregate_by_abs_delta(
    outcome_distribution(apply_path_rotation(four, math.pi / 2))
)
print(
    "\nAt the balanced point all four photons bunch with probability "
    f"{balanced[4]:.4f} = (2 L + 1)/(2 L + 2) for L = {lam4:.3f}."
)
