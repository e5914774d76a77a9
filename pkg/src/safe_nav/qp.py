"""Dense primal active-set solver for small strictly convex QPs.

Solves::

    minimize    1/2 z^T M z + q^T z
    subject to  A z <= b

with ``M`` symmetric positive definite. The problems built by the controller
have three variables and a handful of rows, so every working-set subproblem
is solved from scratch with a Cholesky factorization of ``M`` (range-space
method) instead of updating factorizations.

``oracle_solve`` enumerates candidate active sets exhaustively and is meant
for cross-checking ``solve`` in tests.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog

FEAS_TOL = 1e-9
MULT_TOL = 1e-12
ORACLE_MAX_ROWS = 16


class MalformedProblem(ValueError):
    pass


class TooManyRows(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class QpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class QpProblem:
    M: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        q = np.array(self.q, dtype=float).reshape(-1)
        n = q.shape[0]
        A = np.array(self.A, dtype=float).reshape(-1, n)
        b = np.array(self.b, dtype=float).reshape(-1)
        if M.shape != (n, n):
            raise MalformedProblem(f"M has shape {M.shape}, expected {(n, n)}")
        if A.shape[0] != b.shape[0]:
            raise MalformedProblem(f"A has {A.shape[0]} rows but b has {b.shape[0]}")
        for name, arr in (("M", M), ("q", q), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise MalformedProblem(f"{name} has non-finite entries")
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M))):
            raise MalformedProblem("M is not symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise MalformedProblem("M is not positive definite") from None
        for name, arr in (("M", M), ("q", q), ("A", A), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def k(self) -> int:
        return self.b.shape[0]

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.M @ z + self.q @ z)

    def max_violation(self, z: np.ndarray) -> float:
        if self.k == 0:
            return 0.0
        return float(np.max(self.A @ z - self.b))


@dataclass
class QpSolution:
    z: np.ndarray
    status: QpStatus
    active_set: tuple[int, ...] = ()
    objective: float = float("nan")
    iterations: int = 0
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # Farkas vector y >= 0 with A^T y = 0 and b^T y < 0 when infeasible
    certificate: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(p: QpProblem, z: np.ndarray, lam: np.ndarray) -> dict[str, float]:
    """Stationarity, primal feasibility, dual feasibility and complementarity."""
    slack = p.A @ z - p.b
    return {
        "stationarity": float(np.linalg.norm(p.M @ z + p.q + p.A.T @ lam)),
        "primal": float(max(0.0, np.max(slack, initial=0.0))),
        "dual": float(max(0.0, -np.min(lam, initial=0.0))),
        "complementarity": float(np.max(np.abs(lam * slack), initial=0.0)),
    }


class _Eqp:
    """Equality-constrained subproblems sharing one factorization of M."""

    def __init__(self, p: QpProblem):
        self.p = p
        self.chol = cho_factor(p.M, lower=True)
        self.Minv_q = cho_solve(self.chol, p.q)
        self.Minv_At = cho_solve(self.chol, p.A.T) if p.k else np.zeros((p.n, 0))

    def solve(self, W: list[int]) -> tuple[np.ndarray, np.ndarray]:
        """Minimizer and multipliers with rows ``W`` held at equality."""
        if not W:
            return -self.Minv_q, np.zeros(0)
        A_W = self.p.A[W]
        S = A_W @ self.Minv_At[:, W]
        rhs = -(self.p.b[W] + A_W @ self.Minv_q)
        lam = cho_solve(cho_factor(S, lower=True), rhs)
        z = -self.Minv_q - self.Minv_At[:, W] @ lam
        return z, lam


def _independent_subset(A: np.ndarray, rows, tol: float = 1e-10) -> list[int]:
    kept: list[int] = []
    for i in sorted(set(rows)):
        trial = kept + [i]
        if np.linalg.matrix_rank(A[trial], tol=tol * max(1.0, np.abs(A[trial]).max())) == len(trial):
            kept.append(i)
    return kept


def _feasible(p: QpProblem, z: np.ndarray, tol: float = FEAS_TOL) -> bool:
    return p.k == 0 or bool(np.all(p.A @ z - p.b <= tol * (1.0 + np.abs(p.b))))


def _phase_one(p: QpProblem) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Find a feasible point, or return a Farkas certificate.

    Maximizes the smallest normalized slack, so an interior point is returned
    whenever the feasible set has one.
    """
    norms = np.linalg.norm(p.A, axis=1)
    zero = norms <= 1e-300
    bad = np.flatnonzero(zero & (p.b < 0))
    if bad.size:
        y = np.zeros(p.k)
        y[bad[0]] = 1.0
        return None, y
    rows = np.flatnonzero(~zero)
    if rows.size == 0:
        return np.zeros(p.n), None
    An = p.A[rows] / norms[rows, None]
    bn = p.b[rows] / norms[rows]
    c = np.zeros(p.n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([An, -np.ones((rows.size, 1))])
    bounds = [(None, None)] * p.n + [(-1.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=bn, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"phase-one LP failed: {res.message}")
    t = res.x[-1]
    if t > FEAS_TOL:
        y = np.zeros(p.k)
        y[rows] = -res.ineqlin.marginals / norms[rows]
        return None, np.maximum(y, 0.0)
    return res.x[:-1], None


def solve(p: QpProblem, working_set=None, x0=None, max_iter: int | None = None) -> QpSolution:
    """Solve ``p`` with a primal active-set method.

    ``working_set`` (e.g. the active set of the previous control step) and
    ``x0`` are optional warm starts; neither changes the minimizer.
    """
    eqp = _Eqp(p)
    A, b = p.A, p.b
    max_iter = max_iter or 20 * (p.k + p.n) + 50

    z = None
    W: list[int] = []
    if working_set:
        W0 = _independent_subset(A, [i for i in working_set if 0 <= i < p.k])
        W0 = W0[: p.n]
        y, _ = eqp.solve(W0)
        if _feasible(p, y):
            z, W = y, W0
    if z is None:
        y, _ = eqp.solve([])
        if _feasible(p, y):
            z = y
    if z is None and x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if _feasible(p, x0):
            z = x0.copy()
    if z is None and _feasible(p, np.zeros(p.n)):
        z = np.zeros(p.n)
    if z is None:
        z, cert = _phase_one(p)
        if z is None:
            return QpSolution(z=np.full(p.n, np.nan), status=QpStatus.INFEASIBLE,
                              multipliers=np.zeros(p.k), certificate=cert)

    for it in range(1, max_iter + 1):
        y, lam_W = eqp.solve(W)
        step = y - z
        if np.linalg.norm(step) <= 1e-13 * (1.0 + np.linalg.norm(z)):
            z = y
            if not W or lam_W.min() >= -MULT_TOL:
                lam = np.zeros(p.k)
                lam[W] = lam_W
                return QpSolution(z=z, status=QpStatus.OPTIMAL, active_set=tuple(W),
                                  objective=p.objective(z), iterations=it,
                                  multipliers=lam)
            # most negative multiplier leaves; W is sorted so ties keep the lowest index
            W.pop(int(np.argmin(lam_W)))
            continue

        alpha, blocking = 1.0, None
        snorm = np.linalg.norm(step)
        for i in range(p.k):
            if i in W:
                continue
            a_step = A[i] @ step
            if a_step <= 1e-12 * np.linalg.norm(A[i]) * snorm:
                continue
            ratio = max(0.0, (b[i] - A[i] @ z) / a_step)
            if ratio < alpha:
                alpha, blocking = ratio, i
        if blocking is None:
            z = y
        else:
            z = z + alpha * step
            W = sorted(W + [blocking])
    raise SolverError(f"active-set iteration limit ({max_iter}) reached")


def oracle_solve(p: QpProblem, grid_points: int = 21) -> QpSolution:
    """Exhaustive active-set enumeration.

    Every KKT point has multipliers supported on a linearly independent set
    of rows, so only subsets of at most ``n`` independent rows are tried.
    """
    if p.k > ORACLE_MAX_ROWS:
        raise TooManyRows(f"oracle handles at most {ORACLE_MAX_ROWS} rows, got {p.k}")
    n = p.n
    best = None
    count = 0
    for size in range(0, min(p.k, n) + 1):
        for W in itertools.combinations(range(p.k), size):
            W = list(W)
            A_W = p.A[W]
            if size and np.linalg.matrix_rank(A_W) < size:
                continue
            K = np.zeros((n + size, n + size))
            K[:n, :n] = p.M
            K[:n, n:] = A_W.T
            K[n:, :n] = A_W
            sol = np.linalg.solve(K, np.concatenate([-p.q, p.b[W]]))
            z, lam_W = sol[:n], sol[n:]
            count += 1
            if not _feasible(p, z) or (size and lam_W.min() < -1e-9):
                continue
            obj = p.objective(z)
            if best is None or obj < best[0] - 1e-14 * (1 + abs(obj)):
                lam = np.zeros(p.k)
                lam[W] = lam_W
                best = (obj, z, tuple(W), lam)
    if best is not None:
        obj, z, W, lam = best
        return QpSolution(z=z, status=QpStatus.OPTIMAL, active_set=W, objective=obj,
                          iterations=count, multipliers=lam)

    lo, hi = _grid_box(p)
    axes = [np.linspace(lo[j], hi[j], grid_points) for j in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if np.any(np.all(pts @ p.A.T <= p.b + FEAS_TOL, axis=1)):
        raise SolverError("enumeration found no candidate but the grid has a feasible point")
    return QpSolution(z=np.full(n, np.nan), status=QpStatus.INFEASIBLE,
                      iterations=count, multipliers=np.zeros(p.k))


def _grid_box(p: QpProblem, default: float = 100.0) -> tuple[np.ndarray, np.ndarray]:
    """Bounds implied by single-variable rows, ``default`` elsewhere."""
    lo = np.full(p.n, -default)
    hi = np.full(p.n, default)
    for a, bi in zip(p.A, p.b):
        nz = np.flatnonzero(a)
        if nz.size != 1:
            continue
        j = nz[0]
        if a[j] > 0:
            hi[j] = min(hi[j], bi / a[j])
        else:
            lo[j] = max(lo[j], bi / a[j])
    return lo, hi
