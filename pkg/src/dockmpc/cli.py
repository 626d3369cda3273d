"""Command-line entry point: scenario files, runs, and comparisons.

Scenario files are strict JSON: unknown keys are rejected by name so a
typo cannot silently fall back to a default. ``run`` writes trace.csv,
metrics.json, and scenario.resolved.json; the resolved file materializes
every default and re-runs bit-identically under the same seed.

Exit codes: 0 success, 2 invalid scenario/arguments, 3 goal not reached.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from dockmpc import model as vm
from dockmpc.controller import Strategy
from dockmpc.metrics import compare, compute_metrics
from dockmpc.sim import (GoalSpec, RunRecord, Scenario, ScenarioInvalid,
                         make_paper_scenarios, simulate)
from dockmpc.weights import WeightConfig

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNREACHED = 3

TRACE_COLUMNS = ("t", "x", "y", "phi", "v", "delta", "theta",
                 "a", "delta_dot", "theta_dot",
                 "e_l", "e_c", "mode", "q_c_eff", "q_l_eff", "gamma_eff",
                 "violation")


# -- strict JSON <-> Scenario mapping ---------------------------------------

def _require_keys(obj: dict, known: set, context: str) -> None:
    for key in obj:
        if key not in known:
            raise ScenarioInvalid(f"{context}: unknown key '{key}'")


def _num(obj, key, context, default=None, required=False):
    if key not in obj:
        if required:
            raise ScenarioInvalid(f"{context}.{key}: missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioInvalid(f"{context}.{key}: expected a number")
    return float(v)


def scenario_from_json(doc: dict) -> tuple[Scenario, int | None]:
    """Build a Scenario from a parsed scenario document.

    Returns the scenario and the optional seed stored under sim.seed.
    """
    if not isinstance(doc, dict):
        raise ScenarioInvalid("document: expected a JSON object")
    _require_keys(doc, {"name", "path", "corridor", "goal", "weights",
                        "model", "sim", "strategy", "initial_state",
                        "metadata"}, "document")

    path_obj = doc.get("path")
    if not isinstance(path_obj, dict):
        raise ScenarioInvalid("path: missing or not an object")
    _require_keys(path_obj, {"waypoints", "directions"}, "path")
    waypoints = path_obj.get("waypoints")
    directions = path_obj.get("directions")
    if waypoints is None or directions is None:
        raise ScenarioInvalid("path.waypoints/path.directions: missing")

    kwargs: dict = {
        "name": str(doc.get("name", "scenario")),
        "waypoints": waypoints,
        "directions": directions,
    }

    corr = doc.get("corridor")
    if corr is not None:
        if not isinstance(corr, dict):
            raise ScenarioInvalid("corridor: expected an object")
        _require_keys(corr, {"theta_breakpoints", "lower", "upper",
                             "half_width"}, "corridor")
        if "half_width" in corr:
            if len(corr) != 1:
                raise ScenarioInvalid(
                    "corridor: half_width excludes breakpoint keys")
            kwargs["corridor_half_width"] = _num(corr, "half_width",
                                                 "corridor", required=True)
        else:
            for key in ("theta_breakpoints", "lower", "upper"):
                if key not in corr:
                    raise ScenarioInvalid(f"corridor.{key}: missing")
            kwargs["corridor_theta"] = corr["theta_breakpoints"]
            kwargs["corridor_lower"] = corr["lower"]
            kwargs["corridor_upper"] = corr["upper"]

    goal = doc.get("goal")
    if goal is not None:
        if not isinstance(goal, dict):
            raise ScenarioInvalid("goal: expected an object or null")
        _require_keys(goal, {"pose", "noise", "reveal_time"}, "goal")
        pose = goal.get("pose")
        if not (isinstance(pose, list) and len(pose) == 3):
            raise ScenarioInvalid("goal.pose: expected [x, y, phi]")
        noise = goal.get("noise", {})
        if not isinstance(noise, dict):
            raise ScenarioInvalid("goal.noise: expected an object")
        _require_keys(noise, {"sigma_xy", "sigma_phi"}, "goal.noise")
        kwargs["goal"] = GoalSpec(
            x=float(pose[0]), y=float(pose[1]), phi=float(pose[2]),
            sigma_xy=_num(noise, "sigma_xy", "goal.noise", default=0.0),
            sigma_phi=_num(noise, "sigma_phi", "goal.noise", default=0.0),
            reveal_time=_num(goal, "reveal_time", "goal", default=0.0),
        )

    weights = doc.get("weights")
    if weights is not None:
        if not isinstance(weights, dict):
            raise ScenarioInvalid("weights: expected an object")
        fields = {f.name for f in dataclasses.fields(WeightConfig)}
        _require_keys(weights, fields, "weights")
        wkw = {k: (tuple(v) if isinstance(v, list) else v)
               for k, v in weights.items()}
        try:
            kwargs["weights"] = WeightConfig(**wkw)
        except (TypeError, ValueError) as exc:
            raise ScenarioInvalid(f"weights: {exc}") from exc

    model = doc.get("model")
    if model is not None:
        if not isinstance(model, dict):
            raise ScenarioInvalid("model: expected an object")
        fields = {f.name for f in dataclasses.fields(vm.ModelParams)}
        _require_keys(model, fields, "model")
        mkw = {k: (tuple(v) if isinstance(v, list) else v)
               for k, v in model.items()}
        try:
            kwargs["model"] = vm.ModelParams(**mkw)
        except (TypeError, ValueError) as exc:
            raise ScenarioInvalid(f"model: {exc}") from exc

    seed = None
    sim_obj = doc.get("sim")
    if sim_obj is not None:
        if not isinstance(sim_obj, dict):
            raise ScenarioInvalid("sim: expected an object")
        _require_keys(sim_obj, {"duration", "tolerances", "seed", "horizon",
                                "staging_offset", "switch_distance"}, "sim")
        if "duration" in sim_obj:
            kwargs["duration"] = _num(sim_obj, "duration", "sim",
                                      required=True)
        tol = sim_obj.get("tolerances")
        if tol is not None:
            if not isinstance(tol, dict):
                raise ScenarioInvalid("sim.tolerances: expected an object")
            _require_keys(tol, {"pos", "heading", "vel"}, "sim.tolerances")
            if "pos" in tol:
                kwargs["pos_tol"] = _num(tol, "pos", "sim.tolerances",
                                         required=True)
            if "heading" in tol:
                kwargs["heading_tol"] = _num(tol, "heading",
                                             "sim.tolerances", required=True)
            if "vel" in tol:
                kwargs["vel_tol"] = _num(tol, "vel", "sim.tolerances",
                                         required=True)
        if "seed" in sim_obj:
            if isinstance(sim_obj["seed"], bool) or not isinstance(
                    sim_obj["seed"], int):
                raise ScenarioInvalid("sim.seed: expected an integer")
            seed = int(sim_obj["seed"])
        if "horizon" in sim_obj:
            kwargs["horizon"] = int(_num(sim_obj, "horizon", "sim",
                                         required=True))
        if "staging_offset" in sim_obj:
            kwargs["staging_offset"] = _num(sim_obj, "staging_offset", "sim",
                                            required=True)
        if "switch_distance" in sim_obj:
            kwargs["switch_distance"] = _num(sim_obj, "switch_distance",
                                             "sim", required=True)

    if "strategy" in doc:
        kwargs["strategy"] = _parse_strategy(doc["strategy"])

    if doc.get("initial_state") is not None:
        kwargs["initial_state"] = [float(v) for v in doc["initial_state"]]

    if doc.get("metadata") is not None:
        if not isinstance(doc["metadata"], dict):
            raise ScenarioInvalid("metadata: expected an object")
        kwargs["metadata"] = doc["metadata"]

    scenario = Scenario(**kwargs)
    scenario.validate()
    return scenario, seed


def scenario_to_json(scenario: Scenario, seed: int) -> dict:
    """Fully resolved scenario document (every default materialized)."""
    doc: dict = {
        "name": scenario.name,
        "path": {
            "waypoints": [[list(map(float, p)) for p in leg]
                          for leg in scenario.waypoints],
            "directions": [int(d) for d in scenario.directions],
        },
    }
    if scenario.corridor_theta is not None:
        doc["corridor"] = {
            "theta_breakpoints": [float(v) for v in scenario.corridor_theta],
            "lower": [float(v) for v in scenario.corridor_lower],
            "upper": [float(v) for v in scenario.corridor_upper],
        }
    else:
        doc["corridor"] = {"half_width": float(scenario.corridor_half_width)}
    if scenario.goal is not None:
        doc["goal"] = {
            "pose": [scenario.goal.x, scenario.goal.y, scenario.goal.phi],
            "noise": {"sigma_xy": scenario.goal.sigma_xy,
                      "sigma_phi": scenario.goal.sigma_phi},
            "reveal_time": scenario.goal.reveal_time,
        }
    else:
        doc["goal"] = None
    doc["weights"] = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in dataclasses.asdict(scenario.weights).items()
    }
    doc["model"] = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in dataclasses.asdict(scenario.model).items()
    }
    doc["sim"] = {
        "duration": scenario.duration,
        "tolerances": {"pos": scenario.pos_tol,
                       "heading": scenario.heading_tol,
                       "vel": scenario.vel_tol},
        "seed": int(seed),
        "horizon": int(scenario.horizon),
        "staging_offset": scenario.staging_offset,
        "switch_distance": scenario.switch_distance,
    }
    doc["strategy"] = scenario.strategy.value
    if scenario.initial_state is not None:
        doc["initial_state"] = [float(v) for v in scenario.initial_state]
    if scenario.metadata:
        doc["metadata"] = scenario.metadata
    return doc


def _parse_strategy(name) -> Strategy:
    try:
        return Strategy(str(name))
    except ValueError:
        valid = ", ".join(s.value for s in Strategy)
        raise ScenarioInvalid(f"strategy: unknown '{name}' (valid: {valid})")


def load_scenario(source: str) -> tuple[Scenario, int | None]:
    """Load a scenario from a built-in name or a JSON file path."""
    for builtin in make_paper_scenarios():
        if builtin.name == source:
            return builtin, None
    if not os.path.exists(source):
        raise ScenarioInvalid(
            f"scenario: '{source}' is neither a built-in name nor a file")
    try:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"scenario file: invalid JSON ({exc})")
    return scenario_from_json(doc)


# -- artifact writers -------------------------------------------------------

def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    return repr(float(value))


def trace_csv(record: RunRecord) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for i in range(len(record.t)):
        x, y, phi, v, delta, theta = record.states[i]
        a, delta_dot, theta_dot = record.inputs[i]
        cells = [
            _fmt(record.t[i]), _fmt(x), _fmt(y), _fmt(phi), _fmt(v),
            _fmt(delta), _fmt(theta), _fmt(a), _fmt(delta_dot),
            _fmt(theta_dot), _fmt(record.e_l[i]), _fmt(record.e_c[i]),
            record.modes[i], _fmt(record.q_c_eff[i]),
            _fmt(record.q_l_eff[i]), _fmt(record.gamma_eff[i]),
            _fmt(record.violation[i]),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def metrics_json(record: RunRecord) -> str:
    report = compute_metrics(record)
    doc = {
        "scenario": record.name,
        "strategy": record.strategy,
        "seed": record.seed,
        "reached": record.reached,
        **report.as_dict(),
    }
    return json.dumps(doc, indent=2) + "\n"


# -- commands ---------------------------------------------------------------

def _resolve_seed(args) -> int:
    env = os.environ.get("DYNOBJ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScenarioInvalid(f"DYNOBJ_SEED: not an integer: '{env}'")
    return args.seed


def cmd_run(args) -> int:
    scenario, file_seed = load_scenario(args.scenario)
    if args.strategy is not None:
        scenario = dataclasses.replace(
            scenario, strategy=_parse_strategy(args.strategy))
    seed = _resolve_seed(args)
    if seed is None:
        seed = file_seed if file_seed is not None else 0

    record = simulate(scenario, seed=seed)

    out = args.out
    os.makedirs(out, exist_ok=True)
    _atomic_write(os.path.join(out, "trace.csv"), trace_csv(record))
    _atomic_write(os.path.join(out, "metrics.json"), metrics_json(record))
    _atomic_write(os.path.join(out, "scenario.resolved.json"),
                  json.dumps(scenario_to_json(scenario, seed), indent=2)
                  + "\n")

    if not record.reached:
        print(f"goal not reached within {scenario.duration:.1f} s",
              file=sys.stderr)
        return EXIT_UNREACHED
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, file_seed = load_scenario(args.scenario)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        raise ScenarioInvalid("strategies: empty list")
    parsed = [_parse_strategy(s) for s in strategies]
    seed = _resolve_seed(args)
    if seed is None:
        seed = file_seed if file_seed is not None else 0

    reports = {}
    failures = []
    for strat in parsed:
        variant = dataclasses.replace(scenario, strategy=strat)
        try:
            record = simulate(variant, seed=seed)
            reports[strat.value] = compute_metrics(record)
        except Exception as exc:  # partial table with failed rows marked
            failures.append((strat.value, str(exc)))

    table = compare(reports) if reports else None
    out = args.out
    os.makedirs(out, exist_ok=True)
    csv_text = table.to_csv() if table else "strategy\n"
    for name, _ in failures:
        csv_text += f"{name},failed\n"
    _atomic_write(os.path.join(out, "comparison.csv"), csv_text)

    if table:
        sys.stdout.write(table.to_text())
    for name, message in failures:
        print(f"{name}: FAILED ({message})", file=sys.stderr)
    return EXIT_OK if not failures else EXIT_UNREACHED


def cmd_scenarios(args) -> int:
    scenarios = make_paper_scenarios()
    for scenario in scenarios:
        print(scenario.name)
    if args.emit:
        os.makedirs(args.emit, exist_ok=True)
        for scenario in scenarios:
            doc = scenario_to_json(scenario, seed=0)
            _atomic_write(os.path.join(args.emit, f"{scenario.name}.json"),
                          json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dockmpc",
        description="Contouring-MPC docking planner: run scenarios and "
                    "compare strategies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write artifacts")
    p_run.add_argument("scenario", help="built-in name or scenario JSON path")
    p_run.add_argument("--strategy", default=None,
                       help="override the scenario strategy")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="run several strategies on one scenario")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--strategies", default="unified,separated,switched")
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--out", default=".")
    p_cmp.set_defaults(func=cmd_compare)

    p_sc = sub.add_parser("scenarios", help="list built-in scenarios")
    p_sc.add_argument("--emit", default=None,
                      help="also write their JSON files to this directory")
    p_sc.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
