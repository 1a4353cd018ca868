"""Recompute the published tables and compare them with the embedded values."""

from __future__ import annotations

from dataclasses import dataclass

from . import golden
from .design import theta_surface
from .engine import SimulationConfig, run_study
from .randomization import from_dict
from .targets import bandyopadhyay_biswas_target, compound_target, constrained_target


@dataclass(frozen=True)
class Check:
    """One compared quantity.

    With ``relation="within"`` it passes iff ``|got - expected| <= tol``;
    with ``relation="greater"`` it passes iff ``got > expected``.
    """

    table: str
    coordinate: str
    quantity: str
    expected: float
    got: float
    tol: float
    relation: str = "within"

    @property
    def diff(self) -> float:
        return self.got - self.expected

    @property
    def passed(self) -> bool:
        if self.relation == "greater":
            return bool(self.got > self.expected)
        return bool(abs(self.diff) <= self.tol)

    def to_dict(self) -> dict:
        return {"table": self.table, "coordinate": self.coordinate,
                "quantity": self.quantity, "expected": self.expected, "got": self.got,
                "diff": self.diff, "tol": self.tol, "relation": self.relation,
                "passed": self.passed}


def _labels():
    return golden.SPACE.profile_labels()


def target_checks() -> list[Check]:
    out = []
    labels = _labels()
    for row in golden.TARGETS:
        theta = theta_surface(golden.SPACE, golden.params_for(row.effects))
        res = compound_target(row.criterion, golden.SPACE, theta,
                              golden.DISTRIBUTIONS[row.distribution], golden.WEIGHTS[row.weight])
        for k, expected in enumerate(row.values):
            out.append(Check(f"table {row.table}", row.coordinate, f"pi*{labels[k]}",
                             expected, float(res.pi_star[k]), golden.TARGET_TOL))
    return out


def constrained_checks() -> list[Check]:
    out = []
    labels = _labels()
    theta = theta_surface(golden.SPACE, golden.params_for("positive"))
    p = golden.DISTRIBUTIONS["U"]
    for row in golden.CONSTRAINED:
        res = constrained_target(golden.CONSTRAINED_CRITERION, golden.SPACE, theta, p,
                                 row.efficiency)
        coord = f"C={row.efficiency:g}"
        out.append(Check("constrained", coord, "omega_C", row.omega_C, res.omega_C,
                         golden.CONSTRAINED_TOL))
        for k, expected in enumerate(row.pi_star):
            out.append(Check("constrained", coord, f"pi*{labels[k]}", expected,
                             float(res.pi_star[k]), golden.CONSTRAINED_TOL))
        out.append(Check("constrained", coord, "psi_E", row.psi_E, res.efficiencies.psi_E,
                         golden.PSI_E_TOL))
    for T, values in golden.BANDYOPADHYAY_BISWAS.items():
        pi = bandyopadhyay_biswas_target(theta, T)
        for k, expected in enumerate(values):
            out.append(Check("constrained", f"T={T:g}", f"pi_T{labels[k]}", expected,
                             float(pi[k]), golden.BB_TOL))
    return out


def simulation_config(row: golden.GoldenSimulation, replicates: int = golden.SIM_H,
                      seed: int = 0) -> SimulationConfig:
    rule = from_dict(golden.SIM_RULES[row.rule], golden.SPACE.n_strata)
    return SimulationConfig(
        space=golden.SPACE, params=golden.params_for(row.effects),
        p=golden.DISTRIBUTIONS[row.distribution], criterion=golden.SIM_CRITERION,
        weight=golden.SIM_WEIGHT, rule=rule, n=golden.SIM_N, m=golden.SIM_M,
        replicates=replicates, seed=seed)


def simulation_checks(replicates: int = golden.SIM_H, seed: int = 0,
                      mean_tol: float = golden.SIM_MEAN_TOL, workers: int = 1):
    """Mean and sd checks for every simulated cell, plus the aggregate reports.

    The sd tolerance is relative: ``|sd - reference| <= 0.5 * reference``.
    """
    out, reports = [], {}
    labels = _labels()
    for row in golden.SIMULATIONS:
        report = run_study(simulation_config(row, replicates, seed), workers=workers)
        reports[(row.table, row.rule)] = report
        for k in range(len(labels)):
            out.append(Check(f"table {row.table}", row.coordinate, f"mean{labels[k]}",
                             row.mean[k], float(report.mean[k]), mean_tol))
            out.append(Check(f"table {row.table}", row.coordinate, f"sd{labels[k]}",
                             row.sd[k], float(report.sd[k]), golden.SIM_SD_REL * row.sd[k]))
    return out, reports


def sd_ordering_checks(reports) -> list[Check]:
    """sd(zhang_cara) > sd(baz2) in every stratum of every simulated scenario."""
    out = []
    labels = _labels()
    for table in golden.SIM_SCENARIOS:
        z, b = reports[(table, "zhang_cara")], reports[(table, "baz2")]
        for k in range(len(labels)):
            out.append(Check(f"table {table}", "sd ordering", f"sd_Z > sd_baz2{labels[k]}",
                             float(b.sd[k]), float(z.sd[k]), 0.0, "greater"))
    return out
