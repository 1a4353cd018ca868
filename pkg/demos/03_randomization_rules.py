"""Allocation rules phi(x, y, z) and how rarity of a stratum sharpens them.

x is the current share of A in the stratum, y the target estimate and z the
estimated stratum probability. The reinforced rules push harder toward the
target when z is small, so rare strata are steered as firmly as common ones.
"""

import numpy as np

from rdbcd.randomization import baz1, baz2, dbcd, erade, zhang_cara

rules = [zhang_cara(), baz1(1.0), baz2(2 / 3, 4), erade(2 / 3), dbcd(2.0)]
y = 0.6
print("probability of A when the stratum is behind its target (x = 0.5, y = 0.6)")
print("rule".ljust(32), "  ".join(f"z={z:<5}" for z in [0.5, 0.25, 0.1, 0.02]))
for rule in rules:
    row = [rule(0.5, y, z) for z in [0.5, 0.25, 0.1, 0.02]]
    print(rule.label().ljust(32), "  ".join(f"{v:7.4f}" for v in row))

print("\nphi(x, y=0.6, z=0.25) across x for baz1(k=1):")
for x in np.linspace(0, 1, 6):
    print(f"  x={x:.1f}: {baz1(1.0)(x, y, 0.25):.4f}")
