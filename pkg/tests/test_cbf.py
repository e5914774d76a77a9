import math

import numpy as np
import pytest

from safe_nav.cbf import (CbfMode, CbfParams, Obstacle, cbf_row, cbf_value, check_nondegenerate,
                          dh_dt, lg_h, obstacle_state)
from safe_nav.model import (InvalidArgumentError, Pose2, RobotParams, RobotState,
                            affine_decomposition, center_position)

ROBOT = RobotParams()


def moving_obstacle():
    return Obstacle(Pose2(3.5, 1.5), Pose2(0.3, 1.5), speed=0.5)


def random_state(rng, lo=-5, hi=5):
    return RobotState(*rng.uniform(lo, hi, 2), rng.uniform(-math.pi, math.pi))


class TestObstacleState:
    def test_static(self):
        o = Obstacle(Pose2(2, 1))
        for t in (0.0, 3.0, 100.0):
            pos, vel = obstacle_state(o, t)
            assert pos == Pose2(2, 1) and np.array_equal(vel, [0, 0])

    def test_moving(self):
        pos, vel = obstacle_state(moving_obstacle(), 2.0)
        assert pos.x == pytest.approx(2.5) and pos.y == pytest.approx(1.5)
        assert np.allclose(vel, [-0.5, 0])

    def test_stops_at_endpoint(self):
        # travel time 3.2 / 0.5 = 6.4 s
        for t in (6.4, 10.0):
            pos, vel = obstacle_state(moving_obstacle(), t)
            assert pos == Pose2(0.3, 1.5) and np.array_equal(vel, [0, 0])
        pos, _ = obstacle_state(moving_obstacle(), 6.39)
        assert pos.x > 0.3

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            Obstacle(Pose2(0, 0), Pose2(0, 0), speed=1.0)
        with pytest.raises(InvalidArgumentError):
            Obstacle(Pose2(0, 0), radius=0.0)
        with pytest.raises(InvalidArgumentError):
            Obstacle(Pose2(0, 0), speed=-1.0)


class TestCbfValue:
    def test_substitution(self):
        assert cbf_value(RobotState(0, 0, 0), Pose2(1.15, 0), 0.15, 0.5) == pytest.approx(0.75)

    def test_on_safety_circle(self):
        assert cbf_value(RobotState(0, 0, 0), Pose2(0.15 + 0.5, 0), 0.15, 0.5) == pytest.approx(0, abs=1e-15)

    def test_center_mode_ignores_offset(self):
        s = RobotState(0, 0, 0.7)
        assert cbf_value(s, Pose2(1, 1), 0.15, 0.5, CbfMode.CENTER) == cbf_value(s, Pose2(1, 1), 0.0, 0.5)

    def test_matches_hypot_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(500):
            s = random_state(rng)
            o = Pose2(*rng.uniform(-5, 5, 2))
            r = rng.uniform(0.3, 1.5)
            c = center_position(s, 0.15)
            d = math.hypot(c.x - o.x, c.y - o.y)
            h = cbf_value(s, o, 0.15, r)
            assert h == pytest.approx(d * d - r * r, abs=1e-12)
            assert (h > 0) == (d > r)


class TestCbfRow:
    params = CbfParams(alpha=1.5)

    def test_static_heading_zero(self):
        coeff, off = cbf_row(RobotState(0, 0, 0), Obstacle(Pose2(1.15, 0), radius=0.25),
                             0.0, ROBOT, self.params)
        assert np.allclose(coeff, [-2, 0], atol=1e-15)
        assert off == pytest.approx(1.125)

    def test_static_heading_up(self):
        s = RobotState(0, 0, math.pi / 2)
        coeff, off = cbf_row(s, Obstacle(Pose2(1.15, 0), radius=0.25), 0.0, ROBOT, self.params)
        assert np.allclose(coeff, [0.3, 0.345], atol=1e-12)
        assert off == pytest.approx(1.5 * (1.15 ** 2 + 0.15 ** 2 - 0.25), abs=1e-12)

    def test_moving_obstacle_time_term(self):
        # offset point at (0.15, 0), obstacle at (1.15, 0) moving at (-0.5, 0)
        s = RobotState(0, 0, 0)
        o = Obstacle(Pose2(1.15, 0), Pose2(-5, 0), speed=0.5, radius=0.25)
        _, off_moving = cbf_row(s, o, 0.0, ROBOT, self.params)
        _, off_static = cbf_row(s, Obstacle(Pose2(1.15, 0), radius=0.25), 0.0, ROBOT, self.params)
        assert off_moving - off_static == pytest.approx(-1.0)

    def test_center_mode_has_no_steering(self):
        rng = np.random.default_rng(11)
        p = CbfParams(mode=CbfMode.CENTER)
        for _ in range(200):
            coeff, _ = cbf_row(random_state(rng), Obstacle(Pose2(*rng.uniform(-5, 5, 2))),
                               0.0, ROBOT, p)
            assert coeff[1] == 0.0

    def test_margin_inflates_radius(self):
        s = RobotState(0, 0, 0)
        o = Obstacle(Pose2(2, 0))
        _, plain = cbf_row(s, o, 0, ROBOT, CbfParams(alpha=1.0))
        _, inflated = cbf_row(s, o, 0, ROBOT, CbfParams(alpha=1.0, margin=0.1))
        assert plain - inflated == pytest.approx(0.85 ** 2 - 0.75 ** 2)


class TestDerivatives:
    def test_lg_h_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        step = 1e-6
        for _ in range(100):
            s = random_state(rng)
            o = Pose2(*rng.uniform(-5, 5, 2))
            _, g = affine_decomposition(s)
            coeff = lg_h(s, o, 0.15)
            for k in range(2):
                dx = g[:, k] * step
                up = cbf_value(RobotState(*(s.as_array() + dx)), o, 0.15, 0.75)
                dn = cbf_value(RobotState(*(s.as_array() - dx)), o, 0.15, 0.75)
                assert (up - dn) / (2 * step) == pytest.approx(coeff[k], rel=1e-5, abs=1e-6)

    def test_time_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        eps = 1e-6
        for _ in range(100):
            o = Obstacle(Pose2(*rng.uniform(-5, 5, 2)), Pose2(*rng.uniform(-5, 5, 2)),
                         speed=rng.uniform(0.1, 1.0))
            s = random_state(rng)
            length = math.hypot(o.end.x - o.start.x, o.end.y - o.start.y)
            t = rng.uniform(0.01, 0.99) * length / o.speed
            pos, vel = obstacle_state(o, t)
            analytic = dh_dt(s, pos, vel, 0.15)
            hp = cbf_value(s, obstacle_state(o, t + eps)[0], 0.15, 0.75)
            hm = cbf_value(s, obstacle_state(o, t - eps)[0], 0.15, 0.75)
            assert (hp - hm) / (2 * eps) == pytest.approx(analytic, rel=1e-5, abs=1e-6)


class TestNonDegenerate:
    def test_generic_state(self):
        assert check_nondegenerate(RobotState(0, 0, 0.3), Pose2(2, 1), 0.15)

    def test_offset_point_on_center(self):
        s = RobotState(1, 1, 0.4)
        c = center_position(s, 0.15)
        assert not check_nondegenerate(s, Pose2(c.x, c.y), 0.15)

    def test_random_safe_states(self):
        rng = np.random.default_rng(14)
        checked = 0
        while checked < 10_000:
            s = random_state(rng)
            o = Pose2(*rng.uniform(-5, 5, 2))
            if cbf_value(s, o, 0.15, 0.75) <= 0:
                continue
            assert check_nondegenerate(s, o, 0.15)
            checked += 1
