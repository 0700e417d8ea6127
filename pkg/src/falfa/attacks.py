"""Label-flipping attacks: FALFA (iterated retrain + LP) and random label noise."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lp
from .data import flip_budget
from .model import MlpModel, TrainConfig, init_model, predict_proba, train

log = logging.getLogger(__name__)


class AttackFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class AttackBudget:
    epsilon: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def max_flips(self) -> int:
        return flip_budget(self.n, self.epsilon)


@dataclass(frozen=True)
class FalfaConfig:
    max_iterations: int = 10
    train_config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class AttackResult:
    y_poisoned: np.ndarray
    flips: int
    iterations: int
    objective_trace: list[float]
    converged: bool
    # objective of the labels fed into each LP solve, for the per-iteration check
    incoming_objectives: list[float] = field(default_factory=list)

    def trace_dict(self) -> dict:
        return {"iterations": self.iterations, "objective_trace": self.objective_trace,
                "incoming_objectives": self.incoming_objectives,
                "flips": self.flips, "converged": self.converged}


def log_odds_cost(model: MlpModel, X) -> np.ndarray:
    """``-log p + log(1 - p)`` per row, with p the clamped positive-class probability."""
    p = predict_proba(model, X)
    return -np.log(p) + np.log1p(-p)


def compute_beta(clean_model: MlpModel, X) -> np.ndarray:
    return log_odds_cost(clean_model, X)


def compute_alpha(poisoned_model: MlpModel, X) -> np.ndarray:
    return log_odds_cost(poisoned_model, X)


def attack_objective(alpha, beta, y_prime) -> float:
    """``(alpha - beta) . y'``: loss of f' minus loss of f on labels y'."""
    alpha, beta, y_prime = (np.asarray(v, dtype=float) for v in (alpha, beta, y_prime))
    if not alpha.shape == beta.shape == y_prime.shape:
        raise ValueError("alpha, beta and y' must have equal length")
    return float((alpha - beta) @ y_prime)


def random_flip(y, k: int, rng: np.random.Generator) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    idx = rng.choice(len(y), size=k, replace=False)
    out = y.copy()
    out[idx] = 1 - out[idx]
    return out


def sln(y, epsilon: float, seed: int) -> AttackResult:
    """Stochastic label noise: flip ``floor(n * epsilon)`` labels chosen uniformly."""
    y = np.asarray(y, dtype=np.int64)
    k = flip_budget(len(y), epsilon)
    y_new = random_flip(y, k, np.random.default_rng(seed))
    return AttackResult(y_new, k, 1, [], True)


def retrain_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def falfa(Xtr, ytr, budget: AttackBudget, cfg: FalfaConfig,
          clean_model: MlpModel) -> AttackResult:
    """Fast adversarial label flipping.

    Starting from a random feasible flip of the budgeted size, alternately
    retrain the surrogate on the current poisoned labels and re-select the
    labels by solving the flip LP, until the labels stop changing or
    ``cfg.max_iterations`` LP solves have run.

    Every retrain uses the same seed, so a repeated label vector always
    produces the same surrogate and the stopping test is a true fixed point.
    """
    Xtr = np.asarray(Xtr, dtype=float)
    ytr = np.asarray(ytr, dtype=np.int64)
    n = len(ytr)
    if budget.n != n:
        raise ValueError(f"budget is for n={budget.n} but the data has {n} rows")
    k = budget.max_flips
    beta = compute_beta(clean_model, Xtr)
    rng = np.random.default_rng(cfg.seed)
    y_cur = random_flip(ytr, k, rng)
    tcfg = cfg.train_config.with_seed(retrain_seed(cfg.seed))

    trace: list[float] = []
    incoming: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        surrogate = train(init_model(Xtr.shape[1], tcfg.seed), Xtr, y_cur, tcfg)
        alpha = compute_alpha(surrogate, Xtr)
        problem = lp.build_lp(alpha, beta, ytr, budget.epsilon)
        sol = lp.solve_simplex(problem)
        if sol.status != lp.OPTIMAL:
            raise AttackFailed(f"LP solve failed at iteration {it}: {sol.status}")
        y_new = lp.round_solution(sol)
        incoming.append(attack_objective(alpha, beta, y_cur))
        trace.append(attack_objective(alpha, beta, y_new))
        log.debug("falfa iter %d: objective %.4f, changed %d", it, trace[-1],
                  int(np.sum(y_new != y_cur)))
        converged = bool(np.array_equal(y_new, y_cur))
        y_cur = y_new
        if converged:
            break
    flips = int(np.sum(y_cur != ytr))
    return AttackResult(y_cur, flips, it, trace, converged, incoming)


def save_labels(path: str | Path, y_clean, y_poisoned) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "clean_label", "poisoned_label"])
        for i, (a, b) in enumerate(zip(y_clean, y_poisoned)):
            w.writerow([i, int(a), int(b)])


def load_labels(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    clean = np.array([int(r["clean_label"]) for r in rows])
    poisoned = np.array([int(r["poisoned_label"]) for r in rows])
    return clean, poisoned


def save_trace(path: str | Path, result: AttackResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.trace_dict(), indent=2))
