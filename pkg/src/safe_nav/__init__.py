"""Safety-critical navigation for unicycle robots with a CLF-CBF-QP controller."""

from .cbf import CbfMode, CbfParams, Obstacle
from .clf import ClfParams, GoalPose
from .controller import ControllerConfig, control_step
from .model import ControlInput, Pose2, RobotParams, RobotState
from .sim import Outcome, Scenario, SimResult, run

__all__ = [
    "CbfMode", "CbfParams", "ClfParams", "ControlInput", "ControllerConfig", "GoalPose",
    "Obstacle", "Outcome", "Pose2", "RobotParams", "RobotState", "Scenario", "SimResult",
    "control_step", "run",
]
