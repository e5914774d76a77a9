"""Scenario files (YAML) and result exports (CSV trajectory, JSON summary)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .cbf import CbfParams, Obstacle
from .clf import ClfParams, GoalPose
from .controller import ControllerConfig
from .model import InvalidArgumentError, Pose2, RobotParams, RobotState
from .sim import Scenario, SimResult


class ScenarioError(ValueError):
    pass


_SCHEMA = {
    "robot": {"r_r", "l", "v_max", "w_max"},
    "start": {"x", "y", "theta"},
    "goal": {"x", "y", "theta"},
    "controller": {"P", "gamma", "alpha", "H", "Q", "p_relax", "mode", "margin"},
    "obstacles": None,
    "sim": {"dt", "t_max", "goal_pos_tol", "goal_ang_tol"},
}
_REQUIRED = ("robot", "start", "goal")


def _table(doc: Any, where: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(doc).__name__}")
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ScenarioError(f"{where}: missing key(s) {sorted(missing)}")
    return doc


def _num(doc: dict, key: str, where: str, default: float | None = None) -> float:
    if key not in doc:
        if default is None:
            raise ScenarioError(f"{where}: missing key '{key}'")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {val!r}")
    return float(val)


def _matrix2(val: Any, where: str) -> tuple:
    ok = (isinstance(val, list) and len(val) == 2
          and all(isinstance(r, list) and len(r) == 2 for r in val)
          and all(isinstance(x, (int, float)) and not isinstance(x, bool) for r in val for x in r))
    if not ok:
        raise ScenarioError(f"{where}: expected a 2x2 list of numbers")
    return tuple(tuple(float(x) for x in r) for r in val)


def _point(doc: Any, where: str) -> Pose2:
    d = _table(doc, where, {"x", "y"}, {"x", "y"})
    return Pose2(_num(d, "x", where), _num(d, "y", where))


def parse_scenario(doc: Any, name: str = "scenario") -> Scenario:
    """Build a validated Scenario from a parsed document."""
    doc = _table(doc, "scenario", set(_SCHEMA), set(_REQUIRED))
    try:
        r = _table(doc["robot"], "robot", _SCHEMA["robot"], _SCHEMA["robot"])
        robot = RobotParams(*(_num(r, k, "robot") for k in ("r_r", "l", "v_max", "w_max")))
        s = _table(doc["start"], "start", _SCHEMA["start"], _SCHEMA["start"])
        start = RobotState(*(_num(s, k, "start") for k in ("x", "y", "theta")))
        g = _table(doc["goal"], "goal", _SCHEMA["goal"], _SCHEMA["goal"])
        goal = GoalPose(*(_num(g, k, "goal") for k in ("x", "y", "theta")))

        c = _table(doc.get("controller", {}), "controller", _SCHEMA["controller"])
        defaults = ControllerConfig()
        P = _table(c.get("P", {}), "controller.P", {"a1", "a2", "a3", "b1", "b2"})
        clf = ClfParams(**{k: _num(P, k, "controller.P", getattr(defaults.clf, k))
                           for k in ("a1", "a2", "a3", "b1", "b2")},
                        gamma=_num(c, "gamma", "controller", defaults.clf.gamma))
        mode = c.get("mode", defaults.cbf.mode.value)
        if mode not in ("offset", "center"):
            raise ScenarioError(f"controller.mode: expected 'offset' or 'center', got {mode!r}")
        cbf = CbfParams(alpha=_num(c, "alpha", "controller", defaults.cbf.alpha), mode=mode,
                        margin=_num(c, "margin", "controller", defaults.cbf.margin))
        cfg = ControllerConfig(
            clf=clf, cbf=cbf,
            H=_matrix2(c["H"], "controller.H") if "H" in c else defaults.H,
            Q=_matrix2(c["Q"], "controller.Q") if "Q" in c else defaults.Q,
            p_relax=_num(c, "p_relax", "controller", defaults.p_relax),
            robot=robot,
        )

        obs_doc = doc.get("obstacles", [])
        if not isinstance(obs_doc, list):
            raise ScenarioError("obstacles: expected a list")
        obstacles = []
        for i, o in enumerate(obs_doc):
            where = f"obstacles[{i}]"
            o = _table(o, where, {"start", "end", "speed", "radius"}, {"start"})
            obstacles.append(Obstacle(
                start=_point(o["start"], where + ".start"),
                end=_point(o["end"], where + ".end") if "end" in o else None,
                speed=_num(o, "speed", where, 0.0),
                radius=_num(o, "radius", where, 0.5),
            ))

        sim = _table(doc.get("sim", {}), "sim", _SCHEMA["sim"])
        base = Scenario(start, goal)
        return Scenario(
            start=start, goal=goal, obstacles=tuple(obstacles), controller=cfg,
            dt=_num(sim, "dt", "sim", base.dt), t_max=_num(sim, "t_max", "sim", base.t_max),
            goal_pos_tol=_num(sim, "goal_pos_tol", "sim", base.goal_pos_tol),
            goal_ang_tol=_num(sim, "goal_ang_tol", "sim", base.goal_ang_tol),
            name=name,
        )
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc)) from exc


def scenario_to_doc(sc: Scenario) -> dict:
    cfg = sc.controller
    return {
        "robot": {"r_r": sc.robot.r_r, "l": sc.robot.l,
                  "v_max": sc.robot.v_max, "w_max": sc.robot.w_max},
        "start": {"x": sc.start.x_p, "y": sc.start.y_p, "theta": sc.start.theta},
        "goal": {"x": sc.goal.x_g, "y": sc.goal.y_g, "theta": sc.goal.theta_g},
        "controller": {
            "P": {k: getattr(cfg.clf, k) for k in ("a1", "a2", "a3", "b1", "b2")},
            "gamma": cfg.clf.gamma,
            "alpha": cfg.cbf.alpha,
            "H": [list(r) for r in cfg.H],
            "Q": [list(r) for r in cfg.Q],
            "p_relax": cfg.p_relax,
            "mode": cfg.cbf.mode.value,
            "margin": cfg.cbf.margin,
        },
        "obstacles": [
            {"start": {"x": o.start.x, "y": o.start.y}, "end": {"x": o.end.x, "y": o.end.y},
             "speed": o.speed, "radius": o.radius}
            for o in sc.obstacles
        ],
        "sim": {"dt": sc.dt, "t_max": sc.t_max,
                "goal_pos_tol": sc.goal_pos_tol, "goal_ang_tol": sc.goal_ang_tol},
    }


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_doc(sc), sort_keys=False)


def loads_scenario(text: str, name: str = "scenario") -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not a valid YAML document: {exc}") from exc
    return parse_scenario(doc, name)


def load_scenario(path: str | os.PathLike) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario not found: {path}")
    return loads_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("safe_nav") / "scenarios" / f"{name}.yaml"))


def bundled_scenario(name: str) -> Scenario:
    """``"static"`` or ``"dynamic"``."""
    return load_scenario(bundled_scenario_path(name))


def atomic_write(path: str | os.PathLike, data: str | bytes) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(x, ".17g")


def trajectory_header(n_obstacles: int) -> list[str]:
    return (["t", "x_p", "y_p", "theta", "x_c", "y_c", "v", "omega", "delta", "V"]
            + [f"h_{i}" for i in range(n_obstacles)] + ["solve_time"])


def trajectory_csv(result: SimResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trajectory_header(len(result.scenario.obstacles)))
    for r in result.records:
        vals = [r.t, r.state.x_p, r.state.y_p, r.state.theta, *r.center,
                r.v, r.omega, r.delta, r.V, *r.h, r.solve_time]
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue()


def read_trajectory_csv(path: str | os.PathLike) -> dict[str, list[float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [float(r[i]) for r in body] for i, name in enumerate(header)}


def _json_num(x):
    return None if x is None or not math.isfinite(x) else x


def summary(result: SimResult) -> dict:
    m = result.metrics
    return {
        "scenario": result.scenario.name,
        "outcome": result.outcome.value,
        "time_to_goal": m["time_to_goal"],
        "min_h": _json_num(m["min_h"]),
        "mean_solve_time": m["mean_solve_time"],
        "max_solve_time": m["max_solve_time"],
        "steps": result.steps,
        "config": scenario_to_doc(result.scenario),
    }


def write_result(result: SimResult, out_dir: str | os.PathLike) -> dict[str, Path]:
    out = Path(out_dir)
    paths = {"trajectory": out / "trajectory.csv", "summary": out / "summary.json"}
    atomic_write(paths["trajectory"], trajectory_csv(result))
    atomic_write(paths["summary"], json.dumps(summary(result), indent=2) + "\n")
    return paths
