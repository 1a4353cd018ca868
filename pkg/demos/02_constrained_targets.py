"""Constrained targets: the most ethical allocation at a fixed inferential efficiency.

Each efficiency floor C corresponds to one constant weight omega_C of the
compound problem, found by bisection. The normal-cdf allocations of the
Bandyopadhyay-Biswas rule are printed alongside for comparison.
"""

import numpy as np

from rdbcd.criteria import efficiencies
from rdbcd.design import DesignSpace
from rdbcd.targets import bandyopadhyay_biswas_target, constrained_target

space = DesignSpace(1, 1)
theta = np.array([1.0, 2.0, 2.0, 4.0])
p = np.full(4, 0.25)

print("   C   omega_C   pi*                          Psi_E")
for C in [0.95, 0.9, 0.75, 0.5, 0.25]:
    res = constrained_target("C1", space, theta, p, C)
    print(f"{C:5.2f}  {res.omega_C:7.4f}   {np.round(res.pi_star, 3)}   "
          f"{res.efficiencies.psi_E:.2f}")

print("\n   T   pi_T                          Psi_E   Psi_I")
for T in [1.0, 2.0, 3.0]:
    pi = bandyopadhyay_biswas_target(theta, T)
    eff = efficiencies("C1", space, pi, theta, p)
    print(f"{T:4.1f}   {np.round(pi, 3)}   {eff.psi_E:.2f}   {eff.psi_I:.2g}")
