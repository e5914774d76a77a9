"""Unicycle kinematics.

The state is the rear-axle pose ``(x_p, y_p, theta)``; the body center sits
``l`` meters ahead of it along the heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi


class InvalidArgumentError(ValueError):
    pass


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{name} must be finite, got {value!r}")


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    if not math.isfinite(a):
        raise InvalidArgumentError(f"angle must be finite, got {a!r}")
    r = math.remainder(a, TAU)
    if r <= -math.pi:
        r += TAU
    return r


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float

    def __post_init__(self):
        _check_finite(x=self.x, y=self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class RobotState:
    x_p: float
    y_p: float
    theta: float

    def __post_init__(self):
        _check_finite(x_p=self.x_p, y_p=self.y_p, theta=self.theta)
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_p, self.y_p, self.theta])


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float

    def __post_init__(self):
        _check_finite(v=self.v, omega=self.omega)

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class RobotParams:
    r_r: float = 0.25
    l: float = 0.15
    v_max: float = 2.0
    w_max: float = 1.5

    def __post_init__(self):
        _check_finite(r_r=self.r_r, l=self.l, v_max=self.v_max, w_max=self.w_max)
        if self.r_r <= 0 or self.v_max <= 0 or self.w_max <= 0:
            raise InvalidArgumentError("r_r, v_max and w_max must be positive")
        if not 0 <= self.l < self.r_r:
            raise InvalidArgumentError(f"need 0 <= l < r_r, got l={self.l}, r_r={self.r_r}")


def center_position(s: RobotState, l: float) -> Pose2:
    """Body center of the robot, ``l`` ahead of the rear axle."""
    if l < 0:
        raise InvalidArgumentError(f"l must be non-negative, got {l}")
    return Pose2(s.x_p + l * math.cos(s.theta), s.y_p + l * math.sin(s.theta))


def vector_field(s: RobotState, u: ControlInput) -> np.ndarray:
    return np.array([u.v * math.cos(s.theta), u.v * math.sin(s.theta), u.omega])


def affine_decomposition(s: RobotState) -> tuple[np.ndarray, np.ndarray]:
    """Drift ``f`` and input matrix ``g`` with ``x_dot = f + g @ u``."""
    c, sn = math.cos(s.theta), math.sin(s.theta)
    f = np.zeros(3)
    g = np.array([[c, 0.0], [sn, 0.0], [0.0, 1.0]])
    return f, g


def step_euler(s: RobotState, u: ControlInput, dt: float) -> RobotState:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    return RobotState(
        s.x_p + u.v * math.cos(s.theta) * dt,
        s.y_p + u.v * math.sin(s.theta) * dt,
        s.theta + u.omega * dt,
    )


def step_rk4(s: RobotState, u: ControlInput, dt: float) -> RobotState:
    # reference integrator for tests; the simulator uses step_euler
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")

    def rhs(x):
        return np.array([u.v * math.cos(x[2]), u.v * math.sin(x[2]), u.omega])

    x = np.array([s.x_p, s.y_p, s.theta])
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return RobotState(*x)
