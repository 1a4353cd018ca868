"""Compound optimal targets: how the ethical weight trades information for ethics.

Two binary covariates give four strata. With treatment effect differences
theta = (1, 2, 2, 4) treatment A is better everywhere, so every target
leans toward A. The lean grows with the ethical weight, which is itself a
function of the overall risk E|theta|.
"""

import numpy as np

from rdbcd.design import DesignSpace, ModelParams, theta_surface
from rdbcd.targets import compound_target
from rdbcd.weights import chi_square_cdf, s_shaped

space = DesignSpace(1, 1)
params = ModelParams.from_effects(alpha=1.0, tau=[1.0, 1.0, 1.0])
theta = theta_surface(space, params)
p = np.full(4, 0.25)
print("strata:", space.profile_labels())
print("theta: ", theta)

for spec in [chi_square_cdf(1), chi_square_cdf(2), s_shaped(1), s_shaped(2)]:
    for crit in ["C1", "C3", "C4"]:
        res = compound_target(crit, space, theta, p, spec)
        print(f"{spec.label():>8} {crit}: pi* = {np.round(res.pi_star, 3)}  "
              f"omega = {res.omega_value:.3f}  Psi_E = {res.efficiencies.psi_E:.3f}  "
              f"Psi_I = {res.efficiencies.psi_I:.3f}")

# Reversing the sign of theta mirrors the target around 1/2.
a = compound_target("C3", space, theta, p, s_shaped(1)).pi_star
b = compound_target("C3", space, -theta, p, s_shaped(1)).pi_star
print("mirror check, max |pi*(theta) - (1 - pi*(-theta))| =", np.max(np.abs(a - (1 - b))))
