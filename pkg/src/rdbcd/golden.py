"""Published reference values, embedded so table reproduction runs offline.

Every entry records its table coordinate: the table number, the row label
and, for target tables, the parameter block. Values are listed in stratum
order (0,0), (1,0), (0,1), (1,1) and carry three decimals as published.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignSpace, ModelParams
from .weights import WeightSpec, chi_square_cdf, s_shaped

SPACE = DesignSpace(1, 1)

DISTRIBUTIONS = {
    "U": np.array([0.25, 0.25, 0.25, 0.25]),
    "NU": np.array([0.2, 0.3, 0.4, 0.1]),
}

# (alpha, tau) blocks
EFFECTS = {
    "positive": (1.0, (1.0, 1.0, 1.0)),
    "mixed": (-4.0, (-1.0, 3.0, 3.0)),
}

WEIGHTS = {
    "chi2_1": chi_square_cdf(1),
    "chi2_2": chi_square_cdf(2),
    "omega_1": s_shaped(1),
    "omega_2": s_shaped(2),
}

TARGET_TOL = 5e-4
CONSTRAINED_TOL = 1e-3
PSI_E_TOL = 0.01
BB_TOL = 1e-3
SIM_MEAN_TOL = 0.02
SIM_MEAN_TOL_FAST = 0.03
SIM_SD_REL = 0.5


def params_for(effects: str) -> ModelParams:
    alpha, tau = EFFECTS[effects]
    return ModelParams.from_effects(alpha, tau)


@dataclass(frozen=True)
class GoldenTarget:
    table: int
    criterion: str
    weight: str
    distribution: str
    effects: str
    values: tuple

    @property
    def coordinate(self) -> str:
        return f"table {self.table} / {self.weight} / {self.distribution} / {self.effects}"


# criterion used to reproduce each target table; C5 coincides with C4
TABLE_CRITERION = {1: "C1", 2: "C3", 3: "C4"}

_TARGETS = {
    1: {
        ("chi2_1", "NU"): ((0.578, 0.700, 0.743, 0.646), (0.278, 0.186, 0.371, 0.534)),
        ("chi2_1", "U"): ((0.593, 0.670, 0.670, 0.771), (0.242, 0.209, 0.415, 0.585)),
        ("chi2_2", "NU"): ((0.544, 0.623, 0.660, 0.587), (0.352, 0.264, 0.421, 0.520)),
        ("chi2_2", "U"): ((0.554, 0.605, 0.605, 0.689), (0.319, 0.287, 0.449, 0.551)),
        ("omega_1", "NU"): ((0.537, 0.606, 0.637, 0.572), (0.353, 0.265, 0.421, 0.520)),
        ("omega_1", "U"): ((0.549, 0.596, 0.596, 0.674), (0.321, 0.289, 0.449, 0.551)),
        ("omega_2", "NU"): ((0.521, 0.562, 0.581, 0.541), (0.397, 0.324, 0.447, 0.513)),
        ("omega_2", "U"): ((0.530, 0.559, 0.559, 0.614), (0.373, 0.346, 0.466, 0.534)),
    },
    2: {
        ("chi2_1", "NU"): ((0.658, 0.868, 0.900, 0.805), (0.179, 0.077, 0.128, 0.677)),
        ("chi2_1", "U"): ((0.697, 0.835, 0.835, 0.916), (0.154, 0.099, 0.214, 0.846)),
        ("chi2_2", "NU"): ((0.572, 0.792, 0.841, 0.706), (0.277, 0.125, 0.205, 0.582)),
        ("chi2_2", "U"): ((0.598, 0.745, 0.745, 0.866), (0.241, 0.158, 0.318, 0.759)),
        ("omega_1", "NU"): ((0.557, 0.767, 0.821, 0.678), (0.279, 0.126, 0.206, 0.581)),
        ("omega_1", "U"): ((0.586, 0.728, 0.728, 0.856), (0.243, 0.159, 0.320, 0.757)),
        ("omega_2", "NU"): ((0.530, 0.696, 0.760, 0.610), (0.346, 0.169, 0.268, 0.546)),
        ("omega_2", "U"): ((0.548, 0.658, 0.658, 0.806), (0.308, 0.210, 0.382, 0.692)),
    },
    3: {
        ("chi2_1", "NU"): ((0.677, 0.860, 0.895, 0.795), (0.166, 0.082, 0.137, 0.663)),
        ("chi2_1", "U"): ((0.717, 0.827, 0.827, 0.912), (0.142, 0.105, 0.225, 0.837)),
        ("chi2_2", "NU"): ((0.585, 0.782, 0.833, 0.694), (0.259, 0.133, 0.217, 0.573)),
        ("chi2_2", "U"): ((0.615, 0.734, 0.734, 0.859), (0.223, 0.167, 0.331, 0.747)),
        ("omega_1", "NU"): ((0.567, 0.756, 0.812, 0.666), (0.261, 0.134, 0.218, 0.572)),
        ("omega_1", "U"): ((0.601, 0.717, 0.717, 0.849), (0.225, 0.169, 0.333, 0.744)),
        ("omega_2", "NU"): ((0.536, 0.685, 0.749, 0.601), (0.328, 0.179, 0.282, 0.541)),
        ("omega_2", "U"): ((0.558, 0.645, 0.645, 0.797), (0.289, 0.221, 0.393, 0.679)),
    },
}

TARGETS = tuple(
    GoldenTarget(table, TABLE_CRITERION[table], w, dist, eff, vals)
    for table, rows in _TARGETS.items()
    for (w, dist), pair in rows.items()
    for eff, vals in zip(("positive", "mixed"), pair)
)


@dataclass(frozen=True)
class GoldenConstrained:
    efficiency: float
    omega_C: float
    pi_star: tuple
    psi_E: float


# constrained block: C1, positive effects, uniform distribution
CONSTRAINED_CRITERION = "C1"
CONSTRAINED = (
    GoldenConstrained(0.95, 0.356, (0.523, 0.546, 0.546, 0.589), 0.56),
    GoldenConstrained(0.90, 0.483, (0.528, 0.566, 0.566, 0.612), 0.59),
    GoldenConstrained(0.75, 0.700, (0.558, 0.612, 0.612, 0.698), 0.64),
    GoldenConstrained(0.50, 0.883, (0.599, 0.679, 0.679, 0.781), 0.72),
    GoldenConstrained(0.25, 0.969, (0.656, 0.756, 0.756, 0.851), 0.79),
)

# normal-cdf allocations Phi(theta / T) for the same scenario
BANDYOPADHYAY_BISWAS = {
    1.0: (0.841, 0.977, 0.977, 0.999),
    2.0: (0.691, 0.841, 0.841, 0.977),
    3.0: (0.631, 0.748, 0.748, 0.909),
}


@dataclass(frozen=True)
class GoldenSimulation:
    table: int
    distribution: str
    effects: str
    rule: str
    mean: tuple
    sd: tuple

    @property
    def coordinate(self) -> str:
        return f"table {self.table} / {self.rule}"


# simulation settings shared by the four simulation tables
SIM_CRITERION = "C1"
SIM_WEIGHT: WeightSpec = chi_square_cdf(1)
SIM_N, SIM_M, SIM_H = 500, 4, 500
SIM_RULES = {
    "zhang_cara": {"kind": "zhang_cara"},
    "baz1": {"kind": "baz1", "k": 1.0},
    "baz2": {"kind": "baz2", "epsilon": 2.0 / 3.0},
    "erade": {"kind": "erade", "rho": 2.0 / 3.0},
}
SIM_SCENARIOS = {4: ("U", "positive"), 5: ("U", "mixed"), 6: ("NU", "positive"),
                 7: ("NU", "mixed")}

_SIM = {
    4: {
        "zhang_cara": ((0.592, 0.667, 0.666, 0.764), (0.051, 0.049, 0.045, 0.041)),
        "baz1": ((0.592, 0.667, 0.670, 0.768), (0.027, 0.027, 0.026, 0.025)),
        "baz2": ((0.591, 0.668, 0.669, 0.769), (0.017, 0.016, 0.016, 0.014)),
        "erade": ((0.589, 0.665, 0.666, 0.764), (0.019, 0.019, 0.019, 0.018)),
    },
    5: {
        "zhang_cara": ((0.250, 0.217, 0.416, 0.582), (0.042, 0.041, 0.049, 0.050)),
        "baz1": ((0.244, 0.211, 0.412, 0.585), (0.024, 0.022, 0.024, 0.026)),
        "baz2": ((0.244, 0.212, 0.415, 0.585), (0.013, 0.013, 0.017, 0.016)),
        "erade": ((0.251, 0.217, 0.417, 0.584), (0.017, 0.016, 0.018, 0.019)),
    },
    6: {
        "zhang_cara": ((0.576, 0.696, 0.732, 0.651), (0.054, 0.041, 0.034, 0.071)),
        "baz1": ((0.577, 0.699, 0.739, 0.646), (0.026, 0.025, 0.024, 0.028)),
        "baz2": ((0.577, 0.698, 0.740, 0.646), (0.017, 0.015, 0.014, 0.017)),
        "erade": ((0.576, 0.694, 0.738, 0.640), (0.021, 0.018, 0.014, 0.030)),
    },
    7: {
        "zhang_cara": ((0.284, 0.197, 0.377, 0.539), (0.050, 0.041, 0.035, 0.073)),
        "baz1": ((0.279, 0.188, 0.373, 0.535), (0.026, 0.021, 0.026, 0.024)),
        "baz2": ((0.280, 0.189, 0.373, 0.534), (0.015, 0.015, 0.013, 0.013)),
        "erade": ((0.286, 0.195, 0.375, 0.533), (0.019, 0.018, 0.014, 0.023)),
    },
}

SIMULATIONS = tuple(
    GoldenSimulation(table, *SIM_SCENARIOS[table], rule, mean, sd)
    for table, rows in _SIM.items()
    for rule, (mean, sd) in rows.items()
)
