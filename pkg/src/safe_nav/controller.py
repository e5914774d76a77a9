"""CLF-CBF-QP controller.

Decision vector ``z = (v, omega, delta)``. Each step minimizes::

    1/2 u^T H u + p delta^2 + (u - u_pre)^T Q (u - u_pre)

subject to the relaxed CLF row, one CBF row per obstacle and the input box.
``delta`` is unbounded; only the CLF row involves it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qp
from .cbf import CbfParams, Obstacle, cbf_row, cbf_value, obstacle_state, safe_radius
from .clf import ClfParams, GoalPose, clf_constraint_row, clf_value
from .model import ControlInput, InvalidArgumentError, RobotParams, RobotState

Matrix2 = tuple[tuple[float, float], tuple[float, float]]


def _as_matrix2(m) -> Matrix2:
    a = np.asarray(m, dtype=float)
    if a.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 matrix, got shape {a.shape}")
    return ((float(a[0, 0]), float(a[0, 1])), (float(a[1, 0]), float(a[1, 1])))


def _check_spd(name: str, m: Matrix2) -> None:
    a = np.array(m)
    if not np.all(np.isfinite(a)) or abs(a[0, 1] - a[1, 0]) > 1e-12 * max(1.0, np.abs(a).max()):
        raise InvalidArgumentError(f"{name} must be finite and symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError(f"{name} must be positive definite") from None


@dataclass(frozen=True)
class ControllerConfig:
    clf: ClfParams = field(default_factory=ClfParams)
    cbf: CbfParams = field(default_factory=CbfParams)
    H: Matrix2 = ((0.27, 0.0), (0.0, 0.27))
    Q: Matrix2 = ((2.4, 0.0), (0.0, 2.4))
    p_relax: float = 1000.0
    robot: RobotParams = field(default_factory=RobotParams)

    def __post_init__(self):
        object.__setattr__(self, "H", _as_matrix2(self.H))
        object.__setattr__(self, "Q", _as_matrix2(self.Q))
        _check_spd("H", self.H)
        _check_spd("Q", self.Q)
        if not (math.isfinite(self.p_relax) and self.p_relax > 0):
            raise InvalidArgumentError(f"p_relax must be positive, got {self.p_relax}")

    @property
    def u_bounds(self) -> tuple[float, float]:
        return self.robot.v_max, self.robot.w_max


class SafetyInfeasibleError(RuntimeError):
    """The CBF rows cannot be met inside the input box."""

    def __init__(self, t: float, solution: qp.QpSolution):
        super().__init__(f"CLF-CBF-QP infeasible at t={t:.3f}s")
        self.t = t
        self.solution = solution


@dataclass(frozen=True)
class ControlStepResult:
    u: ControlInput
    delta: float
    V: float
    h_values: tuple[float, ...]
    solve_time: float
    qp_status: qp.QpStatus
    active_set: tuple[int, ...]
    solution: qp.QpSolution | None = None


def assemble_qp(s: RobotState, goal: GoalPose, obstacles: Sequence[Obstacle], t: float,
                cfg: ControllerConfig, u_pre: ControlInput) -> qp.QpProblem:
    """Row order: CLF, one CBF row per obstacle, then +v, -v, +omega, -omega."""
    H = np.array(cfg.H)
    Q = np.array(cfg.Q)
    M = np.zeros((3, 3))
    M[:2, :2] = H + 2.0 * Q
    M[2, 2] = 2.0 * cfg.p_relax
    q = np.zeros(3)
    q[:2] = -2.0 * Q @ u_pre.as_array()

    k = len(obstacles) + 5
    A = np.zeros((k, 3))
    b = np.zeros(k)
    lgv, clf_off = clf_constraint_row(s, goal, cfg.clf)
    A[0, :2] = lgv
    A[0, 2] = -1.0
    b[0] = -clf_off
    for i, o in enumerate(obstacles, start=1):
        lgh, cbf_off = cbf_row(s, o, t, cfg.robot, cfg.cbf)
        A[i, :2] = -lgh
        b[i] = cbf_off
    v_max, w_max = cfg.u_bounds
    j = len(obstacles) + 1
    A[j:j + 4, :2] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    b[j:j + 4] = [v_max, v_max, w_max, w_max]
    return qp.QpProblem(M, q, A, b)


def safety_values(s: RobotState, obstacles: Sequence[Obstacle], t: float,
                  robot: RobotParams) -> tuple[float, ...]:
    """Barrier values at the body center, regardless of the controller mode."""
    out = []
    for o in obstacles:
        pos, _ = obstacle_state(o, t)
        out.append(cbf_value(s, pos, robot.l, safe_radius(robot, o)))
    return tuple(out)


def control_step(s: RobotState, goal: GoalPose, obstacles: Sequence[Obstacle], t: float,
                 cfg: ControllerConfig, u_pre: ControlInput,
                 warm_start: Sequence[int] | None = None) -> ControlStepResult:
    """Solve one CLF-CBF-QP.

    Raises SafetyInfeasibleError when no input in the box satisfies every
    CBF row; the caller decides what to do about it.
    """
    tic = time.perf_counter()
    problem = assemble_qp(s, goal, obstacles, t, cfg, u_pre)
    sol = qp.solve(problem, working_set=warm_start)
    elapsed = time.perf_counter() - tic
    if not sol.optimal:
        raise SafetyInfeasibleError(t, sol)

    v_max, w_max = cfg.u_bounds
    v = min(max(float(sol.z[0]), -v_max), v_max)
    w = min(max(float(sol.z[1]), -w_max), w_max)
    return ControlStepResult(
        u=ControlInput(v, w),
        delta=float(sol.z[2]),
        V=clf_value(s, goal, cfg.clf),
        h_values=safety_values(s, obstacles, t, cfg.robot),
        solve_time=elapsed,
        qp_status=sol.status,
        active_set=sol.active_set,
        solution=sol,
    )
