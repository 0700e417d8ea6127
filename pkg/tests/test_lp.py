import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from falfa import lp, selftest

BACKENDS = ["python"] + (["cython"] if lp.BACKEND == "cython" else [])

# Small instance checked by hand over all 8 binary vectors.
COST = np.array([-2.0, 3.0, -1.0])
Y = np.array([0, 0, 1])


def small():
    return lp.build_lp(COST, np.zeros(3), Y, 1 / 3)


def test_flip_signs():
    assert lp.flip_signs([0, 1, 0]).tolist() == [1.0, -1.0, 1.0]


def test_budget_rhs():
    p = lp.build_lp(np.array([5.0, -1.0]), np.array([0.3, 0.2]), np.array([1, 0]), 0.5)
    assert p.budget_rhs == 0.0
    assert p.flip_capacity == 1.0


def test_zero_budget_only_clean_labels():
    p = lp.build_lp(np.array([-1.0, 1.0, -3.0]), np.zeros(3), np.array([0, 1, 0]), 0.0)
    assert p.budget_rhs == p.lam @ np.array([0, 1, 0])
    assert lp.solve_simplex(p).y_prime.tolist() == [0, 1, 0]
    assert lp.solve_enumerate(p).y_prime.tolist() == [0, 1, 0]


def test_build_lp_validation():
    with pytest.raises(ValueError):
        lp.build_lp(np.zeros(2), np.zeros(3), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        lp.build_lp(np.zeros(2), np.zeros(2), np.zeros(2), 1.2)
    with pytest.raises(ValueError):
        lp.build_lp(np.zeros(2), np.zeros(2), np.array([0, 2]), 0.1)


@pytest.mark.parametrize("backend", BACKENDS)
def test_hand_checked_instance(backend):
    p = small()
    assert p.lam.tolist() == [1.0, 1.0, -1.0] and p.budget_rhs == 0.0
    sol = lp.solve_simplex(p, backend=backend)
    assert sol.status == lp.OPTIMAL
    assert sol.y_prime.tolist() == [1.0, 0.0, 1.0]
    assert sol.objective == -3.0
    rounded = lp.round_solution(sol)
    assert int(np.abs(rounded - Y).sum()) == 1


@pytest.mark.parametrize("solver", [lp.solve_greedy, lp.solve_enumerate])
def test_oracles_on_hand_checked_instance(solver):
    sol = solver(small())
    assert sol.y_prime.tolist() == [1.0, 0.0, 1.0]
    assert sol.objective == -3.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_all_positive_cost(backend):
    p = lp.build_lp(np.array([1.0, 2.0, 0.5]), np.zeros(3), np.zeros(3, dtype=int), 0.7)
    sol = lp.solve_simplex(p, backend=backend)
    assert sol.y_prime.tolist() == [0, 0, 0] and sol.objective == 0.0


def test_unconstrained_elementwise():
    cost = np.array([-1.0, 2.0, 0.0, -0.5, 3.0])
    p = lp.build_lp(cost, np.zeros(5), np.zeros(5, dtype=int), 1.0)
    for solver in (lp.solve_simplex, lp.solve_greedy):
        assert solver(p).y_prime.tolist() == [1, 0, 0, 1, 0]


def test_zero_cost_returns_clean():
    y = np.array([1, 0, 1, 0])
    p = lp.build_lp(np.zeros(4), np.zeros(4), y, 0.5)
    for solver in (lp.solve_simplex, lp.solve_greedy):
        sol = solver(p)
        assert sol.objective == 0.0 and sol.y_prime.tolist() == y.tolist()


def test_round_solution():
    p = lp.build_lp(np.array([-1.0, 1.0]), np.zeros(2), np.array([0, 0]), 0.5)
    sol = lp.LpSolution(np.array([1 - 1e-9, 1e-9]), -1.0, lp.OPTIMAL, p)
    assert lp.round_solution(sol).tolist() == [1, 0]
    exact = lp.LpSolution(np.array([1.0, 0.0]), -1.0, lp.OPTIMAL, p)
    assert lp.round_solution(exact).tolist() == [1, 0]
    over = lp.LpSolution(np.array([1.0, 1.0]), 0.0, lp.OPTIMAL, p)
    with pytest.raises(lp.BudgetViolation):
        lp.round_solution(over)
    bad = lp.LpSolution(np.array([0.0, 0.0]), 0.0, lp.NUMERICAL_FAILURE, p)
    with pytest.raises(ValueError):
        lp.round_solution(bad)


def test_infeasible_reported():
    p = lp.LpProblem(np.array([1.0]), np.array([1.0]), -1.0)
    assert lp.solve_simplex(p).status == lp.INFEASIBLE
    assert lp.solve_greedy(p).status == lp.INFEASIBLE


def test_json_roundtrip(tmp_path):
    p = small()
    back = lp.LpProblem.from_json(p.to_json())
    assert np.array_equal(back.cost, p.cost) and np.array_equal(back.lam, p.lam)
    assert back.budget_rhs == p.budget_rhs
    p.dump(tmp_path / "p.json")
    assert lp.LpProblem.from_json((tmp_path / "p.json").read_text()).n == 3


def test_transform_exact():
    assert selftest.transform_error(10000) <= 1e-12


instances = st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-5, 5), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.floats(0, 1)))


@settings(max_examples=300, deadline=None)
@given(instances)
def test_oracle_equivalence(inst):
    cost, y, eps = inst
    p = lp.build_lp(np.array(cost), np.zeros(len(cost)), np.array(y), eps)
    ref = lp.solve_enumerate(p)
    for backend in BACKENDS:
        sol = lp.solve_simplex(p, backend=backend)
        assert sol.status == lp.OPTIMAL
        assert abs(sol.objective - ref.objective) <= lp.OBJ_TOL
        assert np.all(np.abs(sol.y_prime - np.round(sol.y_prime)) <= lp.INT_TOL)
        assert p.lam @ sol.y_prime <= p.budget_rhs + lp.FEAS_TOL
        assert sol.objective <= p.cost @ p.clean_labels + lp.OBJ_TOL
    assert abs(lp.solve_greedy(p).objective - ref.objective) <= lp.OBJ_TOL


def test_oracle_suite_thousand_instances():
    counts = selftest.lp_oracle_suite(1000, seed=0)
    assert counts == {"instances": 1000, "objective_mismatch": 0, "non_integral": 0,
                      "infeasible": 0, "not_optimal": 0}


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 60), st.integers(0, 10**6))
def test_objective_monotone_in_budget(n, seed):
    rng = np.random.default_rng(seed)
    cost, y = rng.uniform(-5, 5, n), rng.integers(0, 2, n)
    objs = [lp.solve_simplex(lp.build_lp(cost, np.zeros(n), y, e)).objective
            for e in np.linspace(0, 1, 11)]
    assert np.all(np.diff(objs) <= lp.OBJ_TOL)


@pytest.mark.skipif(lp.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree_on_large_instances():
    assert selftest._backend_check(instances=100) == 0


def test_fault_injection_is_caught():
    counts = selftest.lp_oracle_suite(200, seed=0, flip_pivot_sign=True)
    assert counts["objective_mismatch"] + counts["not_optimal"] > 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_large_instance_iteration_bound(backend):
    rng = np.random.default_rng(0)
    n = 1600
    p = lp.build_lp(rng.normal(size=n), rng.normal(size=n), rng.integers(0, 2, n), 0.2)
    sol = lp.solve_simplex(p, backend=backend)
    assert sol.status == lp.OPTIMAL and sol.iterations <= 10 * n
    assert abs(sol.objective - lp.solve_greedy(p).objective) <= 1e-9 * n


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, FALFA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from falfa import lp; print(lp.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
