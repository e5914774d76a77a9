"""Quadratic control Lyapunov function on the pose error.

``V = e^T P e`` with ``e = (x_p - x_g, y_p - y_g, wrap(theta - theta_g))`` and

    P = [[a1, 0,  b1],
         [0,  a2, b2],
         [b1, b2, a3]]

The cross weights ``b1, b2`` couple the position error to the heading so that
``L_g V`` keeps an angular-velocity component even when the heading already
matches the goal heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InvalidArgumentError, RobotState, affine_decomposition, wrap_angle


@dataclass(frozen=True)
class ClfParams:
    """Entries of P and the decay rate gamma.

    The defaults weight lateral error well above longitudinal error and couple
    heading strongly to it. That keeps the curve where L_g V vanishes close to
    the goal, so the closed loop settles inside the goal tolerances instead of
    stalling a few decimetres off.
    """
    a1: float = 2.0
    a2: float = 8.0
    a3: float = 2.5
    b1: float = 0.17
    b2: float = 0.54
    gamma: float = 0.5

    def __post_init__(self):
        vals = (self.a1, self.a2, self.a3, self.b1, self.b2, self.gamma)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError("CLF parameters must be finite")
        # leading principal minors
        det = (self.a1 * self.a2 * self.a3
               - self.a1 * self.b2 ** 2 - self.a2 * self.b1 ** 2)
        if not (self.a1 > 0 and self.a1 * self.a2 > 0 and det > 0):
            raise InvalidArgumentError(f"P is not positive definite (det={det:g})")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")

    @property
    def P(self) -> np.ndarray:
        return np.array([
            [self.a1, 0.0, self.b1],
            [0.0, self.a2, self.b2],
            [self.b1, self.b2, self.a3],
        ])


@dataclass(frozen=True)
class GoalPose:
    x_g: float
    y_g: float
    theta_g: float

    def __post_init__(self):
        if not (math.isfinite(self.x_g) and math.isfinite(self.y_g)):
            raise InvalidArgumentError("goal position must be finite")
        object.__setattr__(self, "theta_g", wrap_angle(self.theta_g))


def error_vector(s: RobotState, goal: GoalPose) -> np.ndarray:
    return np.array([
        s.x_p - goal.x_g,
        s.y_p - goal.y_g,
        wrap_angle(s.theta - goal.theta_g),
    ])


def clf_value(s: RobotState, goal: GoalPose, p: ClfParams) -> float:
    e = error_vector(s, goal)
    return float(e @ p.P @ e)


def clf_gradient(s: RobotState, goal: GoalPose, p: ClfParams) -> np.ndarray:
    """Gradient of V with respect to the state ``(x_p, y_p, theta)``."""
    return 2.0 * p.P @ error_vector(s, goal)


def clf_constraint_row(s: RobotState, goal: GoalPose,
                       p: ClfParams) -> tuple[np.ndarray, float]:
    """Return ``(L_g V, L_f V + gamma * V)``.

    The CLF condition then reads ``coeff_u @ u + rhs_offset <= delta``.
    The drift is zero for the unicycle, so ``L_f V`` vanishes.
    """
    e = error_vector(s, goal)
    P = p.P
    _, g = affine_decomposition(s)
    coeff_u = (2.0 * P @ e) @ g
    return coeff_u, p.gamma * float(e @ P @ e)
