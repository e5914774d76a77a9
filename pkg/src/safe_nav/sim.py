"""Closed-loop simulation with zero-order-hold control and Euler integration."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cbf import Obstacle
from .clf import GoalPose, clf_value
from .controller import ControllerConfig, SafetyInfeasibleError, control_step, safety_values
from .model import (ControlInput, InvalidArgumentError, RobotParams, RobotState,
                    center_position, step_euler, wrap_angle)

log = logging.getLogger(__name__)


class Outcome(str, enum.Enum):
    GOAL_REACHED = "GoalReached"
    TIMEOUT = "Timeout"
    COLLISION = "Collision"
    SAFETY_INFEASIBLE = "SafetyInfeasible"


@dataclass(frozen=True)
class Scenario:
    start: RobotState
    goal: GoalPose
    obstacles: tuple[Obstacle, ...] = ()
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    dt: float = 0.1
    t_max: float = 30.0
    goal_pos_tol: float = 0.1
    goal_ang_tol: float = 0.15
    name: str = field(default="scenario", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for key in ("dt", "t_max", "goal_pos_tol", "goal_ang_tol"):
            val = getattr(self, key)
            if not (math.isfinite(val) and val > 0):
                raise InvalidArgumentError(f"{key} must be positive, got {val}")
        if self.t_max < self.dt:
            raise InvalidArgumentError("t_max must be at least dt")

    @property
    def robot(self) -> RobotParams:
        return self.controller.robot

    @property
    def n_steps(self) -> int:
        """Number of control steps with ``k * dt < t_max``."""
        return int(math.ceil(self.t_max / self.dt - 1e-9))


@dataclass(frozen=True)
class Record:
    """One row of the trajectory.

    ``u``, ``delta`` and ``solve_time`` are the control computed at ``t``;
    they are NaN on the terminal record, where no control was computed.
    """
    t: float
    state: RobotState
    center: tuple[float, float]
    v: float
    omega: float
    delta: float
    V: float
    h: tuple[float, ...]
    solve_time: float


@dataclass
class SimResult:
    outcome: Outcome
    records: list[Record]
    scenario: Scenario

    @property
    def steps(self) -> int:
        return len(self.records) - 1

    @property
    def metrics(self) -> dict:
        times = np.array([r.solve_time for r in self.records if not math.isnan(r.solve_time)])
        hs = [min(r.h) for r in self.records if r.h]
        return {
            "time_to_goal": self.records[-1].t if self.outcome is Outcome.GOAL_REACHED else None,
            "min_h": min(hs) if hs else None,
            "mean_solve_time": float(times.mean()) if times.size else None,
            "max_solve_time": float(times.max()) if times.size else None,
        }

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def h_matrix(self) -> np.ndarray:
        return np.array([r.h for r in self.records]).reshape(len(self.records), -1)


def _reached(s: RobotState, goal: GoalPose, sc: Scenario) -> bool:
    return (math.hypot(s.x_p - goal.x_g, s.y_p - goal.y_g) < sc.goal_pos_tol
            and abs(wrap_angle(s.theta - goal.theta_g)) < sc.goal_ang_tol)


def run(sc: Scenario) -> SimResult:
    cfg = sc.controller
    robot = cfg.robot
    nan = float("nan")

    def terminal(t, s):
        c = center_position(s, robot.l)
        return Record(t, s, (c.x, c.y), nan, nan, nan, clf_value(s, sc.goal, cfg.clf),
                      safety_values(s, sc.obstacles, t, robot), nan)

    s = sc.start
    u_pre = ControlInput(0.0, 0.0)
    active: tuple[int, ...] | None = None
    records: list[Record] = []

    first = terminal(0.0, s)
    if _reached(s, sc.goal, sc):
        return SimResult(Outcome.GOAL_REACHED, [first], sc)
    if any(h < 0 for h in first.h):
        return SimResult(Outcome.COLLISION, [first], sc)

    outcome = Outcome.TIMEOUT
    t = 0.0
    for k in range(sc.n_steps):
        t = k * sc.dt
        try:
            res = control_step(s, sc.goal, sc.obstacles, t, cfg, u_pre, warm_start=active)
        except SafetyInfeasibleError as exc:
            log.warning("%s: %s", sc.name, exc)
            outcome = Outcome.SAFETY_INFEASIBLE
            break
        c = center_position(s, robot.l)
        records.append(Record(t, s, (c.x, c.y), res.u.v, res.u.omega, res.delta, res.V,
                              res.h_values, res.solve_time))
        s = step_euler(s, res.u, sc.dt)
        u_pre, active = res.u, res.active_set
        t = (k + 1) * sc.dt
        if _reached(s, sc.goal, sc):
            outcome = Outcome.GOAL_REACHED
            break
        if any(h < 0 for h in safety_values(s, sc.obstacles, t, robot)):
            outcome = Outcome.COLLISION
            break
    records.append(terminal(t, s))
    log.info("%s: %s after %d steps", sc.name, outcome.value, len(records) - 1)
    return SimResult(outcome, records, sc)


def activity_intervals(times: Sequence[float], delta: Sequence[float],
                       threshold: float) -> list[tuple[float, float]]:
    """Maximal runs of samples with ``delta > threshold``.

    Each interval spans the first to the last sample time of its run.
    NaN samples count as inactive.
    """
    if not threshold > 0:
        raise InvalidArgumentError(f"threshold must be positive, got {threshold}")
    out = []
    start = prev = None
    for t, d in zip(times, delta):
        if d > threshold:
            if start is None:
                start = t
            prev = t
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out


def relaxation_activity_intervals(result: SimResult,
                                  threshold: float) -> list[tuple[float, float]]:
    """Disjoint time intervals where the CLF relaxation exceeds ``threshold``."""
    return activity_intervals(result.column("t"), result.column("delta"), threshold)
