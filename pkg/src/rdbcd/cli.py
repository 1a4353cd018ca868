"""Command-line interface: ``rdbcd {target,constrained,simulate,tables}``.

Runs are described by a YAML document validated against ``CONFIG_SCHEMA``
before anything is computed. Tables are written as comma-separated text
with a header row and six significant digits, mirrored as JSON lines.
Exit status is 0 when every requested computation and check succeeds,
1 when a check or solver fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import golden, reproduction
from .criteria import CriterionId
from .design import DesignSpace, DomainError, ModelParams, check_distribution, theta_surface
from .engine import SimulationConfig, run_study
from .randomization import KINDS as RULE_KINDS
from .randomization import RandomizationRule, from_dict
from .targets import SolverError, compound_target, constrained_target
from .weights import KINDS as WEIGHT_KINDS
from .weights import WeightSpec

SCHEMA_VERSION = 1

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_WEIGHT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "parameter"],
    "properties": {
        "kind": {"enum": list(WEIGHT_KINDS)},
        "parameter": {"type": "number"},
        "inner": {"$ref": "#/$defs/weight"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "design", "params", "distribution", "criterion", "weight"],
    "$defs": {"weight": _WEIGHT_SCHEMA},
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "design": {
            "type": "object",
            "additionalProperties": False,
            "required": ["J", "L"],
            "properties": {"J": {"type": "integer", "minimum": 1},
                           "L": {"type": "integer", "minimum": 1}},
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": _NUMBER_LIST,
                "alpha": {"type": "number"},
                "tau": _NUMBER_LIST,
                "mu_B": {"type": "number"},
                "beta_B": _NUMBER_LIST,
                "sigma2": {"type": "number", "exclusiveMinimum": 0},
            },
            "oneOf": [{"required": ["gamma"], "not": {"anyOf": [
                          {"required": ["alpha"]}, {"required": ["tau"]},
                          {"required": ["mu_B"]}, {"required": ["beta_B"]}]}},
                      {"required": ["alpha", "tau"], "not": {"required": ["gamma"]}}],
        },
        "distribution": _NUMBER_LIST,
        "criterion": {"enum": [c.value for c in CriterionId]},
        "weight": {"$ref": "#/$defs/weight"},
        "rule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [k for k in RULE_KINDS if not k.startswith("custom")]},
                "k": {"type": "number"},
                "epsilon": {"type": "number"},
                "rho": {"type": "number"},
                "nu": {"type": "number"},
            },
        },
        "efficiency_floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n"],
            "properties": {
                "n": {"type": "integer", "minimum": 3},
                "m": {"type": "integer", "minimum": 1},
                "replicates": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries the line when known."""


@dataclass(frozen=True)
class RunConfig:
    space: DesignSpace
    params: ModelParams
    p: np.ndarray
    criterion: CriterionId
    weight: WeightSpec
    rule: RandomizationRule | None = None
    efficiency_floor: float | None = None
    simulation: dict = field(default_factory=dict)
    output_dir: str | None = None
    # how the parameters were written, kept for round-tripping
    params_form: str = "effects"

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION,
             "design": {"J": self.space.J, "L": self.space.L}}
        if self.params_form == "gamma":
            d["params"] = {"gamma": [float(v) for v in self.params.gamma],
                           "sigma2": float(self.params.sigma2)}
        else:
            d["params"] = {"alpha": float(self.params.alpha),
                           "tau": [float(v) for v in self.params.tau],
                           "mu_B": float(self.params.mu_B),
                           "beta_B": [float(v) for v in self.params.beta_B],
                           "sigma2": float(self.params.sigma2)}
        d["distribution"] = [float(v) for v in self.p]
        d["criterion"] = self.criterion.value
        d["weight"] = self.weight.to_dict()
        if self.rule is not None:
            rd = self.rule.to_dict()
            rd.pop("n_strata", None)
            d["rule"] = rd
        if self.efficiency_floor is not None:
            d["efficiency_floor"] = float(self.efficiency_floor)
        if self.simulation:
            d["simulation"] = dict(self.simulation)
        if self.output_dir is not None:
            d["output"] = {"dir": self.output_dir}
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def simulation_config(self) -> SimulationConfig:
        if self.rule is None or not self.simulation:
            raise ConfigError("simulate needs 'rule' and 'simulation' sections")
        s = self.simulation
        return SimulationConfig(
            space=self.space, params=self.params, p=self.p, criterion=self.criterion,
            weight=self.weight, rule=self.rule, n=s["n"], m=s.get("m", 4),
            replicates=s.get("replicates", 1), seed=s.get("seed", 0),
            checkpoints=tuple(s.get("checkpoints", ())))


def _node_at(node, path):
    """Deepest YAML node reached by following ``path`` from ``node``."""
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    return node


def _where(root, path, source: str, key=None) -> str:
    if root is None:
        return source
    node = _node_at(root, list(path))
    if key is not None and isinstance(node, yaml.MappingNode):
        node = next((k for k, _ in node.value if k.value == key), node)
    return f"{source}:{node.start_mark.line + 1}"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: malformed YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: configuration must be a mapping")
    if "schema_version" not in data:
        raise ConfigError(f"{source}:1: missing mandatory 'schema_version'")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        key = None
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            allowed = err.schema.get("properties", {})
            key = next((k for k in err.instance if k not in allowed), None)
        raise ConfigError(f"{_where(root, err.absolute_path, source, key)}: {err.message}")
    try:
        return _build(data)
    except (DomainError, KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _build(data: dict) -> RunConfig:
    space = DesignSpace(data["design"]["J"], data["design"]["L"])
    pr = data["params"]
    sigma2 = float(pr.get("sigma2", 1.0))
    if "gamma" in pr:
        params, form = ModelParams.from_gamma(pr["gamma"], sigma2), "gamma"
    else:
        params = ModelParams.from_effects(pr["alpha"], pr["tau"], pr.get("mu_B", 0.0),
                                          pr.get("beta_B"), sigma2)
        form = "effects"
    params.check_space(space)
    rule = None
    if "rule" in data:
        rule = from_dict(data["rule"], space.n_strata)
    return RunConfig(
        space=space, params=params, p=check_distribution(space, data["distribution"]),
        criterion=CriterionId(data["criterion"]), weight=WeightSpec.from_dict(data["weight"]),
        rule=rule, efficiency_floor=data.get("efficiency_floor"),
        simulation=dict(data.get("simulation", {})),
        output_dir=data.get("output", {}).get("dir"), params_form=form)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


# --------------------------------------------------------------------------
# output


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        return "%.6g" % v if np.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    return v


def render_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for r in rows:
        w.writerow([fmt(v) for v in r.values()])
    return buf.getvalue()


def render_jsonl(rows: list[dict]) -> str:
    return "".join(json.dumps({k: _json_value(v) for k, v in r.items()}, sort_keys=False) + "\n"
                   for r in rows)


class Sink:
    """Writes named tables to ``out_dir`` (CSV + JSONL) or CSV to stdout."""

    def __init__(self, out_dir: str | None, stream=None):
        self.out_dir = Path(out_dir) if out_dir else None
        self.stream = stream or sys.stdout
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, rows: list[dict], csv_out: bool = True):
        if self.out_dir is None:
            if csv_out:
                self.stream.write(f"# {name}\n" + render_csv(rows))
            return
        if csv_out:
            (self.out_dir / f"{name}.csv").write_text(render_csv(rows), encoding="utf-8")
        (self.out_dir / f"{name}.jsonl").write_text(render_jsonl(rows), encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def target_rows(space, theta, p, pi, eff, omega, residual) -> list[dict]:
    labels = space.profile_labels()
    return [{"stratum": labels[k], "theta": float(theta[k]), "p": float(p[k]),
             "pi_star": float(pi[k]), "psi_E": eff.psi_E, "psi_I": eff.psi_I,
             "omega": float(omega), "residual": float(residual)}
            for k in range(space.n_strata)]


def cmd_target(cfg: RunConfig, sink: Sink) -> int:
    theta = theta_surface(cfg.space, cfg.params)
    try:
        res = compound_target(cfg.criterion, cfg.space, theta, cfg.p, cfg.weight)
    except SolverError as exc:
        print(f"error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return 1
    sink.table("target", target_rows(cfg.space, theta, cfg.p, res.pi_star, res.efficiencies,
                                     res.omega_value, res.gradient_residual))
    return 0


def cmd_constrained(cfg: RunConfig, sink: Sink, floor: float | None = None) -> int:
    C = floor if floor is not None else cfg.efficiency_floor
    if C is None:
        raise ConfigError("constrained needs 'efficiency_floor' in the config or --floor")
    theta = theta_surface(cfg.space, cfg.params)
    try:
        res = constrained_target(cfg.criterion, cfg.space, theta, cfg.p, C)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = target_rows(cfg.space, theta, cfg.p, res.pi_star, res.efficiencies, res.omega_C, 0.0)
    for r in rows:
        r.pop("residual")
        r["efficiency_floor"] = float(C)
        r["kkt_multiplier"] = res.kkt_multiplier
    sink.table("constrained", rows)
    return 0


def summary_rows(space, report) -> list[dict]:
    labels = space.profile_labels()
    return [{"stratum": labels[k], "true_target": float(report.true_target[k]),
             "mean": float(report.mean[k]), "sd": float(report.sd[k]),
             "target_error": float(report.target_error[k]), "replicates": report.replicates}
            for k in range(space.n_strata)]


def cmd_simulate(cfg: RunConfig, sink: Sink, seed=None, replicates=None, workers=None) -> int:
    sim = dict(cfg.simulation)
    if seed is not None:
        sim["seed"] = seed
    if replicates is not None:
        sim["replicates"] = replicates
    cfg = replace(cfg, simulation=sim)
    config = cfg.simulation_config()
    report = run_study(config, workers=workers or sim.get("workers", 1))
    sink.table("summary", summary_rows(cfg.space, report))
    sink.table("gamma_bias", [{"index": i, "bias": float(b)}
                              for i, b in enumerate(report.gamma_bias)])
    sink.table("replicates", [r.to_record() for r in report.results], csv_out=False)
    if report.solver_failures:
        print(f"warning: {report.solver_failures} solver fallbacks to the balanced target",
              file=sys.stderr)
    return 0


def _check_rows(checks) -> list[dict]:
    return [c.to_dict() for c in checks]


def cmd_tables(sink: Sink, only=None, replicates: int = golden.SIM_H, seed: int = 0,
               workers: int = 1) -> int:
    groups = [only] if only else ["targets", "constrained", "sim"]
    ok = True
    for g in groups:
        if g == "targets":
            checks = reproduction.target_checks()
        elif g == "constrained":
            checks = reproduction.constrained_checks()
        else:
            checks, reports = reproduction.simulation_checks(replicates, seed, workers=workers)
            checks += reproduction.sd_ordering_checks(reports)
        sink.table(f"tables_{g}", _check_rows(checks))
        failed = [c for c in checks if not c.passed]
        ok &= not failed
        print(f"{g}: {len(checks) - len(failed)}/{len(checks)} within tolerance", file=sys.stderr)
        for c in failed:
            print(f"  FAIL {c.coordinate} {c.quantity}: reference {c.expected:g}, "
                  f"computed {c.got:.6g}, tol {c.tol:g}", file=sys.stderr)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdbcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (default: CSV on stdout)")

    common(sub.add_parser("target", help="compound optimal target"))
    p = sub.add_parser("constrained", help="efficiency-constrained target")
    common(p)
    p.add_argument("--floor", type=float, help="inferential efficiency C in (0, 1)")
    p = sub.add_parser("simulate", help="Monte Carlo study")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)
    p = sub.add_parser("tables", help="reproduce the published tables")
    common(p, config_required=False)
    p.add_argument("--only", choices=["targets", "constrained", "sim"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=golden.SIM_H)
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "tables":
            return cmd_tables(Sink(args.out), args.only, args.replicates, args.seed,
                              args.workers)
        cfg = load_config(args.config)
        sink = Sink(args.out or cfg.output_dir)
        if args.command == "target":
            return cmd_target(cfg, sink)
        if args.command == "constrained":
            return cmd_constrained(cfg, sink, args.floor)
        return cmd_simulate(cfg, sink, args.seed, args.replicates, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
