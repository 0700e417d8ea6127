"""Embedded property checks run by ``falfa selftest``."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import lp
from .model import (BLOCKS, cross_entropy_paper, cross_entropy_standard, init_model,
                    loss_and_grads, predict_proba, softmax)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def gradient_check(seed: int = 0, step: float = 1e-5) -> dict[str, float]:
    """Relative error (norm-wise) between backprop and central differences, per block."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(10, 4))
    y = rng.integers(0, 2, size=10)
    model = init_model(4, seed)
    _, grads = loss_and_grads(model, X, y)
    errors = {}
    for name in BLOCKS:
        block = getattr(model, name)
        num = np.zeros_like(block)
        flat, nflat = block.reshape(-1), num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = cross_entropy_standard(predict_proba(model, X), y)
            flat[i] = orig - step
            down = cross_entropy_standard(predict_proba(model, X), y)
            flat[i] = orig
            nflat[i] = (up - down) / (2 * step)
        ana = grads[name]
        scale = max(np.linalg.norm(ana), np.linalg.norm(num), 1e-12)
        errors[name] = float(np.linalg.norm(ana - num) / scale)
    return errors


def loss_identity_error(draws: int = 100, seed: int = 0) -> float:
    """Max |paper-form + mean log(1-p) - standard form| over random (p, y) draws."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(1, 50))
        p = rng.uniform(1e-6, 1 - 1e-6, n)
        y = rng.integers(0, 2, n)
        gap = cross_entropy_paper(p, y) - np.mean(np.log1p(-p)) - cross_entropy_standard(p, y)
        worst = max(worst, abs(gap))
    return worst


def random_instance(rng: np.random.Generator, max_n: int = 12) -> lp.LpProblem:
    n = int(rng.integers(1, max_n + 1))
    cost = rng.uniform(-5, 5, n)
    y = rng.integers(0, 2, n)
    return lp.build_lp(cost, np.zeros(n), y, float(rng.uniform()))


def lp_oracle_suite(instances: int = 1000, seed: int = 0, flip_pivot_sign: bool = False,
                    backend: str | None = None) -> dict[str, int]:
    """Counts of disagreements and violations over random small instances."""
    rng = np.random.default_rng(seed)
    out = {"instances": instances, "objective_mismatch": 0, "non_integral": 0,
           "infeasible": 0, "not_optimal": 0}
    for _ in range(instances):
        prob = random_instance(rng)
        sx = lp.solve_simplex(prob, backend=backend, flip_pivot_sign=flip_pivot_sign)
        gr = lp.solve_greedy(prob)
        en = lp.solve_enumerate(prob)
        if sx.status != lp.OPTIMAL:
            out["not_optimal"] += 1
            continue
        if (abs(sx.objective - en.objective) > lp.OBJ_TOL
                or abs(gr.objective - en.objective) > lp.OBJ_TOL):
            out["objective_mismatch"] += 1
        if np.any(np.abs(sx.y_prime - np.round(sx.y_prime)) > lp.INT_TOL):
            out["non_integral"] += 1
        if prob.lam @ sx.y_prime > prob.budget_rhs + lp.FEAS_TOL:
            out["infeasible"] += 1
    return out


def transform_error(samples: int = 10000, seed: int = 0) -> float:
    """Max |lam (y' - y) - |y' - y|| over y in {0,1}, y' in [0,1]."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, samples)
    yp = rng.uniform(0, 1, samples)
    return float(np.max(np.abs(lp.flip_signs(y) * (yp - y) - np.abs(yp - y))))


def _timed(name, fn, verdict):
    t0 = time.perf_counter()
    value = fn()
    ok, detail = verdict(value)
    return Check(name, ok, detail, time.perf_counter() - t0)


def run_selftest(inject_fault: bool = False, instances: int = 1000) -> list[Check]:
    checks = [
        _timed("gradient check (rel err < 1e-4)", gradient_check,
               lambda e: (max(e.values()) < 1e-4, f"max rel err {max(e.values()):.2e}")),
        _timed("loss identity (|gap| <= 1e-12)", loss_identity_error,
               lambda e: (e <= 1e-12, f"max gap {e:.1e}")),
        _timed("softmax sum and shift invariance", _softmax_check,
               lambda e: (e <= 1e-12, f"max deviation {e:.1e}")),
        _timed("flip-sign transform exactness", transform_error,
               lambda e: (e <= 1e-12, f"max deviation {e:.1e}")),
        _timed("LP oracle equivalence", lambda: lp_oracle_suite(instances, flip_pivot_sign=inject_fault),
               lambda c: (c["objective_mismatch"] == 0 and c["not_optimal"] == 0,
                          f"{c['objective_mismatch']} mismatches, {c['not_optimal']} failures "
                          f"in {c['instances']}")),
        _timed("LP vertex integrality and feasibility", lambda: lp_oracle_suite(instances, seed=1),
               lambda c: (c["non_integral"] == 0 and c["infeasible"] == 0,
                          f"{c['non_integral']} fractional, {c['infeasible']} infeasible")),
    ]
    if lp.BACKEND == "cython":
        checks.append(_timed("compiled vs numpy kernel", _backend_check,
                             lambda d: (d == 0, f"{d} differing solutions")))
    return checks


def _softmax_check(draws: int = 1000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 5, size=(draws, 2))
    c = rng.normal(0, 50, size=(draws, 1))
    p, q = softmax(z), softmax(z + c)
    return float(max(np.max(np.abs(p.sum(axis=1) - 1)), np.max(np.abs(p - q))))


def _backend_check(instances: int = 300, seed: int = 2) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(instances):
        prob = random_instance(rng, max_n=200)
        a = lp.solve_simplex(prob, backend="cython")
        b = lp.solve_simplex(prob, backend="python")
        bad += not np.array_equal(a.y_prime, b.y_prime)
    return bad
