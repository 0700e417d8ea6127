"""The label-flip linear program and its solvers.

Given clean binary labels y, per-example costs c and a flip budget k, the
problem is

    minimise    c . y'
    subject to  lam . y' <= k + lam . y,     0 <= y' <= 1,

with ``lam_i = +1`` where ``y_i = 0`` and ``-1`` where ``y_i = 1``.  On the
unit box ``lam_i (y'_i - y_i) = |y'_i - y_i|``, so the single constraint is
exactly the flip budget and the optimum sits on a 0/1 vertex.

`solve_simplex` is the production solver (compiled kernel when available,
numpy fallback otherwise).  `solve_greedy` and `solve_enumerate` are
independent oracles used by the tests and the self-test.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _simplex_py

try:
    if os.environ.get("FALFA_PURE_PYTHON"):
        raise ImportError("compiled kernel disabled by FALFA_PURE_PYTHON")
    from ._simplex import simplex_kernel as _compiled_kernel
except ImportError:
    _compiled_kernel = None

BACKEND = "cython" if _compiled_kernel is not None else "python"

OBJ_TOL = 1e-9
INT_TOL = 1e-6
FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


class BudgetViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class LpProblem:
    cost: np.ndarray
    lam: np.ndarray
    budget_rhs: float

    @property
    def n(self) -> int:
        return len(self.cost)

    @property
    def clean_labels(self) -> np.ndarray:
        return (self.lam < 0).astype(np.int64)

    @property
    def flip_capacity(self) -> float:
        """Budget left after the clean labels, i.e. ``rhs - lam . y``."""
        return float(self.budget_rhs - self.lam @ self.clean_labels)

    def to_json(self) -> str:
        return json.dumps({"cost": self.cost.tolist(), "lambda": self.lam.tolist(),
                           "budget_rhs": self.budget_rhs, "n": self.n})

    @classmethod
    def from_json(cls, text: str) -> "LpProblem":
        d = json.loads(text)
        p = cls(np.asarray(d["cost"], dtype=float), np.asarray(d["lambda"], dtype=float),
                float(d["budget_rhs"]))
        if p.n != d["n"]:
            raise ValueError("n does not match vector lengths")
        return p

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


@dataclass(frozen=True)
class LpSolution:
    y_prime: np.ndarray
    objective: float
    status: str
    problem: LpProblem
    iterations: int = 0


def flip_signs(y) -> np.ndarray:
    """``+1`` where the clean label is 0, ``-1`` where it is 1."""
    y = np.asarray(y)
    return np.where(y == 0, 1.0, -1.0)


def build_lp(alpha, beta, y, epsilon: float) -> LpProblem:
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y)
    if not (alpha.shape == beta.shape == y.shape) or alpha.ndim != 1:
        raise ValueError(f"length mismatch: alpha {alpha.shape}, beta {beta.shape}, y {y.shape}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    lam = flip_signs(y)
    k = min(len(y), math.floor(len(y) * epsilon + 1e-9))
    return LpProblem(cost=alpha - beta, lam=lam, budget_rhs=float(k + lam @ y))


def _finish(problem: LpProblem, x: np.ndarray, iterations: int = 0) -> LpSolution:
    # zero-cost moves do not change the objective: keep the clean label there
    y = problem.clean_labels
    flat = np.abs(problem.cost) <= _PIVOT_TOL
    x[flat] = y[flat]
    return LpSolution(x, float(problem.cost @ x), OPTIMAL, problem, iterations)


def _infeasible(problem: LpProblem) -> LpSolution:
    return LpSolution(np.full(problem.n, np.nan), math.nan, INFEASIBLE, problem)


def solve_simplex(problem: LpProblem, *, backend: str | None = None,
                  flip_pivot_sign: bool = False) -> LpSolution:
    """Bounded-variable primal simplex with Bland's rule, started at the clean labels.

    `backend` forces ``"cython"`` or ``"python"``; `flip_pivot_sign` corrupts
    the dual price and exists only for fault-injection checks.
    """
    if problem.flip_capacity < -FEAS_TOL:
        return _infeasible(problem)
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled_kernel is None:
            raise RuntimeError("compiled simplex kernel is not available")
        kernel = _compiled_kernel
    elif backend == "python":
        kernel = _simplex_py.simplex_kernel
    else:
        raise ValueError(f"unknown backend {backend!r}")

    cost = np.ascontiguousarray(problem.cost, dtype=float)
    lam = np.ascontiguousarray(problem.lam, dtype=float)
    x = problem.clean_labels.astype(float)
    status, iters, _ = kernel(cost, lam, x, float(problem.budget_rhs),
                              max(10 * problem.n, 1), _PIVOT_TOL, flip_pivot_sign)
    if status != _simplex_py.OPTIMAL:
        return LpSolution(x, float(cost @ x), NUMERICAL_FAILURE, problem, iters)
    return _finish(problem, x, iters)


def solve_greedy(problem: LpProblem) -> LpSolution:
    """Exact optimum as a unit-weight continuous knapsack.

    Every move away from the clean label costs one unit of budget, so the
    best solution takes the most profitable moves first (stable order on
    ties) and stops when the budget or the profitable moves run out.
    """
    cap = problem.flip_capacity
    if cap < -FEAS_TOL:
        return _infeasible(problem)
    y = problem.clean_labels
    gain = np.where(y == 0, -problem.cost, problem.cost)
    order = np.argsort(-gain, kind="stable")
    x = y.astype(float)
    for i in order:
        if gain[i] <= _PIVOT_TOL or cap <= 0:
            break
        step = min(1.0, cap)
        x[i] = y[i] + step * (1 - 2 * y[i])
        cap -= step
    return _finish(problem, x)


def solve_enumerate(problem: LpProblem) -> LpSolution:
    """Brute force over all binary vectors; only for small n (tests)."""
    n = problem.n
    if n > 20:
        raise ValueError("enumeration is limited to n <= 20")
    cube = np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(-1, n)
    feasible = cube @ problem.lam <= problem.budget_rhs + FEAS_TOL
    if not feasible.any():
        return _infeasible(problem)
    cand = cube[feasible]
    vals = cand @ problem.cost
    best = int(np.argmin(vals))
    return LpSolution(cand[best], float(vals[best]), OPTIMAL, problem)


def round_solution(sol: LpSolution) -> np.ndarray:
    """Threshold at 0.5 and verify the flip budget on the binary result."""
    if sol.status != OPTIMAL:
        raise ValueError(f"cannot round a {sol.status} solution")
    y_new = (sol.y_prime >= 0.5).astype(np.int64)
    y = sol.problem.clean_labels
    flips = int(np.abs(y_new - y).sum())
    budget = math.floor(sol.problem.flip_capacity + FEAS_TOL)
    if flips > budget:
        raise BudgetViolation(f"rounded solution flips {flips} labels, budget is {budget}")
    return y_new
