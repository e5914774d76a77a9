import numpy as np
import pytest

from safe_nav.qp import (MalformedProblem, QpProblem, QpStatus, TooManyRows, kkt_residuals,
                         oracle_solve, solve)

from qp_instances import box_rows, duplicate_row_instance, random_instance


def assert_kkt(p, sol, tol=1e-8):
    res = kkt_residuals(p, sol.z, sol.multipliers)
    assert res["stationarity"] <= tol
    assert res["primal"] <= tol
    assert sol.multipliers.min(initial=0.0) >= -1e-10
    assert res["complementarity"] <= tol


class TestClosedForm:
    def test_interior_minimum(self):
        A, b = box_rows(3, 1.0)
        p = QpProblem(np.eye(3), np.zeros(3), A, b)
        for sol in (solve(p), oracle_solve(p)):
            assert sol.status is QpStatus.OPTIMAL
            assert np.allclose(sol.z, 0)
            assert sol.active_set == ()

    def test_single_active_bound(self):
        p = QpProblem(np.eye(3), [-10, 0, 0], [[1, 0, 0], [-1, 0, 0]], [1, 1])
        for sol in (solve(p), oracle_solve(p)):
            assert np.allclose(sol.z, [1, 0, 0])
            assert sol.active_set == (0,)
            assert sol.multipliers[0] == pytest.approx(9.0)

    def test_infeasible(self):
        A, b = box_rows(3, 10.0)
        p = QpProblem(np.eye(3), np.zeros(3), np.vstack([[[1, 0, 0], [-1, 0, 0]], A]),
                      np.concatenate([[-2, -3], b]))
        sol = solve(p)
        assert sol.status is QpStatus.INFEASIBLE
        y = sol.certificate
        assert np.all(y >= 0)
        assert np.allclose(p.A.T @ y, 0, atol=1e-9)
        assert p.b @ y < 0
        assert oracle_solve(p).status is QpStatus.INFEASIBLE

    def test_infeasible_zero_row(self):
        p = QpProblem(np.eye(2), np.zeros(2), [[0, 0], [1, 0]], [-1, 1])
        sol = solve(p)
        assert sol.status is QpStatus.INFEASIBLE
        assert sol.certificate[0] > 0

    def test_infeasible_start_needs_phase_one(self):
        # neither the origin nor the unconstrained minimizer is feasible
        p = QpProblem(np.eye(2), [0, 0], [[-1, 0], [0, -1], [1, 1]], [-1, -1, 3])
        sol = solve(p)
        assert np.allclose(sol.z, [1, 1])
        assert_kkt(p, sol)


class TestValidation:
    def test_not_positive_definite(self):
        with pytest.raises(MalformedProblem):
            QpProblem(np.diag([1, -1, 1]), np.zeros(3), np.eye(3), np.ones(3))

    def test_nan(self):
        with pytest.raises(MalformedProblem):
            QpProblem(np.eye(3), [0, np.nan, 0], np.eye(3), np.ones(3))

    def test_asymmetric(self):
        with pytest.raises(MalformedProblem):
            QpProblem([[1, 0.5], [0, 1]], [0, 0], np.eye(2), np.ones(2))

    def test_shape_mismatch(self):
        with pytest.raises(MalformedProblem):
            QpProblem(np.eye(3), np.zeros(3), np.eye(3), np.ones(2))

    def test_oracle_row_limit(self):
        p = QpProblem(np.eye(3), np.zeros(3), np.ones((17, 3)), np.ones(17))
        with pytest.raises(TooManyRows):
            oracle_solve(p)


class TestRandomized:
    def test_agrees_with_oracle(self):
        rng = np.random.default_rng(20)
        for _ in range(200):
            p = random_instance(rng)
            sol, ref = solve(p), oracle_solve(p)
            assert sol.status is ref.status is QpStatus.OPTIMAL
            assert np.allclose(sol.z, ref.z, atol=1e-6)
            assert_kkt(p, sol)

    def test_duplicate_rows(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            p = duplicate_row_instance(rng)
            sol, ref = solve(p), oracle_solve(p)
            assert np.allclose(sol.z, ref.z, atol=1e-6)
            assert_kkt(p, sol)

    def test_ill_conditioned(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            p = random_instance(rng, max_cond=1e6)
            sol, ref = solve(p), oracle_solve(p)
            assert np.allclose(sol.z, ref.z, atol=1e-6)
            assert_kkt(p, sol)

    def test_mixed_feasibility_agrees(self):
        rng = np.random.default_rng(23)
        statuses = set()
        for _ in range(100):
            p = random_instance(rng, rows=4)
            b = p.b.copy()
            b[:4] -= rng.uniform(0, 6, 4)
            p = QpProblem(p.M, p.q, p.A, b)
            sol, ref = solve(p), oracle_solve(p)
            assert sol.status is ref.status
            statuses.add(sol.status)
            if sol.status is QpStatus.OPTIMAL:
                assert np.allclose(sol.z, ref.z, atol=1e-6)
            else:
                y = sol.certificate
                assert np.all(y >= 0) and p.b @ y < 0
                assert np.allclose(p.A.T @ y, 0, atol=1e-7)
        assert statuses == {QpStatus.OPTIMAL, QpStatus.INFEASIBLE}

    def test_beats_grid_points(self):
        rng = np.random.default_rng(24)
        axis = np.linspace(-2, 2, 47)
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
        for _ in range(10):
            p = random_instance(rng)
            sol = solve(p)
            feas = grid[np.all(grid @ p.A.T <= p.b, axis=1)]
            objs = 0.5 * np.einsum("ij,jk,ik->i", feas, p.M, feas) + feas @ p.q
            assert sol.objective <= objs.min() + 1e-6

    def test_relaxing_b_never_increases_objective(self):
        rng = np.random.default_rng(25)
        for _ in range(100):
            p = random_instance(rng)
            looser = QpProblem(p.M, p.q, p.A, p.b + rng.uniform(0, 1, p.k))
            assert solve(looser).objective <= solve(p).objective + 1e-9

    def test_warm_start_does_not_change_minimizer(self):
        rng = np.random.default_rng(26)
        for _ in range(100):
            p = random_instance(rng)
            cold = solve(p)
            for ws in (cold.active_set, (0, 1, 2), tuple(range(p.k))):
                warm = solve(p, working_set=ws)
                assert np.allclose(warm.z, cold.z, atol=1e-8)

    def test_deterministic(self):
        rng = np.random.default_rng(27)
        for _ in range(20):
            p = random_instance(rng)
            a, b = solve(p), solve(p)
            assert np.array_equal(a.z, b.z) and a.active_set == b.active_set
