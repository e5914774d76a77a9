"""Time-varying barrier functions for circular obstacles.

For obstacle ``i`` with center ``z_i(t)`` and combined radius
``r_i = r_r + r_Oi``::

    h_i = |point(x) - z_i(t)|^2 - r_i^2

In offset mode ``point(x)`` is the body center, ``l`` ahead of the rear
axle, which makes ``L_g h`` depend on both ``v`` and ``omega``. In center
mode the rear-axle point itself is used (``l = 0``) and the
angular-velocity column of ``L_g h`` is identically zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import InvalidArgumentError, Pose2, RobotParams, RobotState


class CbfMode(str, enum.Enum):
    OFFSET = "offset"
    CENTER = "center"


@dataclass(frozen=True)
class Obstacle:
    start: Pose2
    end: Pose2 | None = None
    speed: float = 0.0
    radius: float = 0.5

    def __post_init__(self):
        if self.end is None:
            object.__setattr__(self, "end", self.start)
        if not (math.isfinite(self.speed) and self.speed >= 0):
            raise InvalidArgumentError(f"obstacle speed must be >= 0, got {self.speed}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InvalidArgumentError(f"obstacle radius must be > 0, got {self.radius}")
        if self.speed > 0 and self.start == self.end:
            raise InvalidArgumentError("a moving obstacle needs distinct start and end")

    @property
    def is_static(self) -> bool:
        return self.speed == 0.0


@dataclass(frozen=True)
class CbfParams:
    alpha: float = 1.5
    mode: CbfMode = CbfMode.OFFSET
    margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", CbfMode(self.mode))
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise InvalidArgumentError(f"margin must be >= 0, got {self.margin}")


def obstacle_state(o: Obstacle, t: float) -> tuple[Pose2, np.ndarray]:
    """Position and velocity at time ``t``.

    Moving obstacles travel the segment at constant speed and stay at the
    endpoint once they arrive.
    """
    if o.is_static:
        return o.start, np.zeros(2)
    dx, dy = o.end.x - o.start.x, o.end.y - o.start.y
    length = math.hypot(dx, dy)
    travelled = o.speed * t
    if travelled >= length:
        return o.end, np.zeros(2)
    ux, uy = dx / length, dy / length
    pos = Pose2(o.start.x + ux * travelled, o.start.y + uy * travelled)
    return pos, np.array([ux * o.speed, uy * o.speed])


def _offset(l: float, mode: CbfMode) -> float:
    return l if CbfMode(mode) is CbfMode.OFFSET else 0.0


def _delta(s: RobotState, o_pos: Pose2, l: float) -> tuple[float, float]:
    return (s.x_p + l * math.cos(s.theta) - o_pos.x,
            s.y_p + l * math.sin(s.theta) - o_pos.y)


def cbf_value(s: RobotState, o_pos: Pose2, l: float, r_safe: float,
              mode: CbfMode = CbfMode.OFFSET) -> float:
    dx, dy = _delta(s, o_pos, _offset(l, mode))
    return dx * dx + dy * dy - r_safe * r_safe


def safe_radius(robot: RobotParams, o: Obstacle, p: CbfParams | None = None) -> float:
    margin = p.margin if p is not None else 0.0
    return robot.r_r + o.radius + margin


def lg_h(s: RobotState, o_pos: Pose2, l: float,
         mode: CbfMode = CbfMode.OFFSET) -> np.ndarray:
    """``L_g h`` as a 2-vector ``(d h / d v, d h / d omega)``."""
    l = _offset(l, mode)
    dx, dy = _delta(s, o_pos, l)
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return np.array([2 * dx * c + 2 * dy * sn, -2 * dx * l * sn + 2 * dy * l * c])


def dh_dt(s: RobotState, o_pos: Pose2, o_vel: np.ndarray, l: float,
          mode: CbfMode = CbfMode.OFFSET) -> float:
    dx, dy = _delta(s, o_pos, _offset(l, mode))
    return -2 * dx * o_vel[0] - 2 * dy * o_vel[1]


def cbf_row(s: RobotState, o: Obstacle, t: float, robot: RobotParams,
            p: CbfParams) -> tuple[np.ndarray, float]:
    """Return ``(L_g h, L_f h + dh/dt + alpha * h)``.

    The safety condition reads ``coeff_u @ u + rhs_offset >= 0``.
    """
    pos, vel = obstacle_state(o, t)
    h = cbf_value(s, pos, robot.l, safe_radius(robot, o, p), p.mode)
    coeff_u = lg_h(s, pos, robot.l, p.mode)
    return coeff_u, dh_dt(s, pos, vel, robot.l, p.mode) + p.alpha * h


def check_nondegenerate(s: RobotState, o_pos: Pose2, l: float, tol: float = 1e-9) -> bool:
    """True when the offset-mode ``L_g h`` is nonzero.

    It only vanishes when the offset point sits on the obstacle center.
    """
    return bool(np.linalg.norm(lg_h(s, o_pos, l, CbfMode.OFFSET)) > tol)
