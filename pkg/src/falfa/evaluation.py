"""Experiment harness: repeated poisoning runs, summary statistics and
significance-based ranking of attacks."""
from __future__ import annotations

import csv
import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from . import attacks
from .data import DatasetConfig, flip_budget, prepare
from .model import TrainConfig, evaluate_accuracy, init_model, train

log = logging.getLogger(__name__)

ATTACKS = ("falfa", "sln")
RATE_GRID = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)
TOP_RANK_ALPHA = 0.1

CSV_COLUMNS = ["dataset", "attack", "epsilon", "repeat", "train_acc_clean", "test_acc_clean",
               "train_acc_poisoned", "test_acc_poisoned", "perf_loss", "camouflage_gap",
               "flips", "iterations", "attack_seconds"]


def performance_loss(test_acc_clean: float, test_acc_poisoned: float) -> float:
    """Drop in test accuracy, in percentage points (negative if the attack helped)."""
    return (test_acc_clean - test_acc_poisoned) * 100.0


def camouflage_gap(train_acc_poisoned: float, test_acc_poisoned: float) -> float:
    """Poisoned-training minus clean-test accuracy of the poisoned model, in points."""
    return (train_acc_poisoned - test_acc_poisoned) * 100.0


def paired_t_test(losses_a: Sequence[float], losses_b: Sequence[float],
                  alpha: float = TOP_RANK_ALPHA) -> str:
    """Two-sided paired t-test.  Returns ``"a_better"``, ``"b_better"`` or ``"tie"``."""
    a = np.asarray(losses_a, dtype=float)
    b = np.asarray(losses_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples with at least 2 entries")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    diff = a - b
    if np.ptp(diff) == 0.0:
        # zero variance: the t statistic is undefined, the sign is certain
        if diff[0] == 0.0:
            return "tie"
        return "a_better" if diff[0] > 0 else "b_better"
    res = stats.ttest_rel(a, b)
    if res.pvalue >= alpha:
        return "tie"
    return "a_better" if diff.mean() > 0 else "b_better"


@dataclass
class RunRecord:
    dataset: str
    attack: str
    epsilon: float
    repeat_index: int
    train_acc_clean: float
    test_acc_clean: float
    train_acc_poisoned: float
    test_acc_poisoned: float
    flips: int
    iterations: int
    attack_seconds: float
    n_train: int = 0

    @property
    def perf_loss(self) -> float:
        return performance_loss(self.test_acc_clean, self.test_acc_poisoned)

    @property
    def camouflage_gap(self) -> float:
        return camouflage_gap(self.train_acc_poisoned, self.test_acc_poisoned)

    @property
    def key(self) -> tuple:
        return (self.dataset, self.attack, self.epsilon, self.repeat_index)


@dataclass
class ExperimentReport:
    records: list[RunRecord]
    summary: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records.sort(key=lambda r: r.key)
        if not self.summary and self.records:
            self.summary = summarize(self.records)

    def select(self, dataset=None, attack=None, epsilon=None) -> list[RunRecord]:
        return [r for r in self.records
                if (dataset is None or r.dataset == dataset)
                and (attack is None or r.attack == attack)
                and (epsilon is None or abs(r.epsilon - epsilon) < 1e-12)]

    def to_dict(self) -> dict:
        return {"config": self.config,
                "records": [asdict(r) for r in self.records],
                "summary": self.summary, "failures": self.failures}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(records=[RunRecord(**r) for r in d["records"]], summary=d["summary"],
                   failures=d.get("failures", []), config=d.get("config", {}))


def summarize(records: Sequence[RunRecord], alpha: float = TOP_RANK_ALPHA) -> list[dict]:
    """Mean/std of performance loss per (dataset, attack, epsilon) plus top-rank flags.

    An attack is top ranked for a (dataset, epsilon) cell when the paired
    t-test does not find it significantly weaker than the attack with the
    highest mean loss.
    """
    groups: dict[tuple, dict[int, float]] = defaultdict(dict)
    for r in records:
        groups[(r.dataset, r.attack, r.epsilon)][r.repeat_index] = r.perf_loss
    rows = {}
    for (ds, atk, eps), losses in sorted(groups.items()):
        v = np.array([losses[i] for i in sorted(losses)])
        rows[(ds, atk, eps)] = {"dataset": ds, "attack": atk, "epsilon": eps,
                               "mean_loss": float(v.mean()), "std_loss": float(v.std()),
                               "repeats": len(v), "top_ranked": True}
    cells = defaultdict(list)
    for ds, atk, eps in rows:
        cells[(ds, eps)].append(atk)
    for (ds, eps), atks in cells.items():
        if len(atks) < 2:
            continue
        best = max(atks, key=lambda a: rows[(ds, a, eps)]["mean_loss"])
        for atk in atks:
            if atk == best:
                continue
            common = sorted(set(groups[(ds, best, eps)]) & set(groups[(ds, atk, eps)]))
            if len(common) < 2:
                continue
            verdict = paired_t_test([groups[(ds, best, eps)][i] for i in common],
                                    [groups[(ds, atk, eps)][i] for i in common], alpha)
            rows[(ds, atk, eps)]["top_ranked"] = verdict != "a_better"
    return list(rows.values())


@dataclass(frozen=True)
class SweepSettings:
    attacks: tuple[str, ...] = ATTACKS
    rates: tuple[float, ...] = (0.10,)
    repeats: int = 5
    base_seed: int = 0
    train_config: TrainConfig = field(default_factory=TrainConfig)
    max_iterations: int = 10
    record_timing: bool = True


def run_attack(name: str, X, y, epsilon: float, seed: int, clean_model,
               tcfg: TrainConfig, max_iterations: int = 10) -> attacks.AttackResult:
    if name == "sln":
        return attacks.sln(y, epsilon, seed)
    if name == "falfa":
        cfg = attacks.FalfaConfig(max_iterations=max_iterations, train_config=tcfg, seed=seed)
        return attacks.falfa(X, y, attacks.AttackBudget(epsilon, len(y)), cfg, clean_model)
    raise ValueError(f"unknown attack {name!r}")


def _run_unit(cfg: DatasetConfig, repeat: int, s: SweepSettings):
    """All (attack, rate) cells for one dataset and one repeat."""
    seed = s.base_seed + repeat
    records, failures = [], []
    try:
        prep = prepare(cfg, seed=seed)
        tr, te = prep.train, prep.test
        tcfg = s.train_config.with_seed(seed)
        clean = train(init_model(tr.m, seed), tr.X, tr.y, tcfg)
        train_clean = evaluate_accuracy(clean, tr.X, tr.y)
        test_clean = evaluate_accuracy(clean, te.X, te.y)
    except Exception as exc:  # recorded, the sweep carries on
        log.exception("preparing %s repeat %d failed", cfg.name, repeat)
        for atk in s.attacks:
            for eps in s.rates:
                failures.append({"dataset": cfg.name, "attack": atk, "epsilon": eps,
                                 "repeat": repeat, "error": f"{type(exc).__name__}: {exc}"})
        return records, failures

    for atk in s.attacks:
        for eps in s.rates:
            try:
                t0 = time.perf_counter()
                res = run_attack(atk, tr.X, tr.y, eps, seed, clean, tcfg, s.max_iterations)
                seconds = time.perf_counter() - t0 if s.record_timing else 0.0
                if res.flips > flip_budget(tr.n, eps):
                    raise attacks.AttackFailed(f"{atk} exceeded the flip budget")
                victim = train(init_model(tr.m, seed), tr.X, res.y_poisoned, tcfg)
                records.append(RunRecord(
                    dataset=cfg.name, attack=atk, epsilon=eps, repeat_index=repeat,
                    train_acc_clean=train_clean, test_acc_clean=test_clean,
                    train_acc_poisoned=evaluate_accuracy(victim, tr.X, res.y_poisoned),
                    test_acc_poisoned=evaluate_accuracy(victim, te.X, te.y),
                    flips=res.flips, iterations=res.iterations, attack_seconds=seconds,
                    n_train=tr.n))
            except Exception as exc:
                log.exception("%s / %s / eps=%s / repeat %d failed", cfg.name, atk, eps, repeat)
                failures.append({"dataset": cfg.name, "attack": atk, "epsilon": eps,
                                 "repeat": repeat, "error": f"{type(exc).__name__}: {exc}"})
    return records, failures


def run_experiment(datasets: Sequence[DatasetConfig], settings: SweepSettings,
                   jobs: int = 1) -> ExperimentReport:
    """Run every (dataset, attack, rate, repeat) cell.

    Repeat ``i`` uses seed ``base_seed + i`` for the split, the network
    initialisation, the shuffle order and the attack.  The clean model of a
    (dataset, repeat) pair is shared by all of its attack cells.  Results are
    merged in key order, so `jobs` does not affect the report.
    """
    if settings.repeats < 1:
        raise ValueError("repeats must be >= 1")
    for atk in settings.attacks:
        if atk not in ATTACKS:
            raise ValueError(f"unknown attack {atk!r}")
    units = [(cfg, i) for cfg in datasets for i in range(settings.repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_unit, *zip(*units), [settings] * len(units)))
    else:
        outputs = [_run_unit(cfg, i, settings) for cfg, i in units]
    records = [r for recs, _ in outputs for r in recs]
    failures = sorted((f for _, fails in outputs for f in fails),
                      key=lambda f: (f["dataset"], f["attack"], f["epsilon"], f["repeat"]))
    config = {"datasets": [c.name for c in datasets], "attacks": list(settings.attacks),
              "rates": list(settings.rates), "repeats": settings.repeats,
              "base_seed": settings.base_seed, "train_config": asdict(settings.train_config),
              "max_iterations": settings.max_iterations}
    return ExperimentReport(records=records, failures=failures, config=config)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def record_row(r: RunRecord) -> list:
    return [r.dataset, r.attack, r.epsilon, r.repeat_index, r.train_acc_clean, r.test_acc_clean,
            r.train_acc_poisoned, r.test_acc_poisoned, r.perf_loss, r.camouflage_gap,
            r.flips, r.iterations, r.attack_seconds]


def curves(report: ExperimentReport) -> list[dict]:
    """Long-format mean accuracy per (dataset, attack, rate): accuracy-vs-rate curves."""
    groups = defaultdict(list)
    for r in report.records:
        groups[(r.dataset, r.attack, r.epsilon)].append(r)
    out = []
    for (ds, atk, eps), rs in sorted(groups.items()):
        for metric in ("train_acc_poisoned", "test_acc_poisoned"):
            out.append({"dataset": ds, "attack": atk, "epsilon": eps, "metric": metric,
                        "mean": float(np.mean([getattr(r, metric) for r in rs])),
                        "std": float(np.std([getattr(r, metric) for r in rs]))})
    return out


def export_report(report: ExperimentReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the report; returns the paths written.

    ``csv`` writes ``records.csv``, ``summary.json`` and ``curves.csv``;
    ``json`` writes the whole report to ``report.json``.
    """
    if not report.records and not report.failures:
        raise ValueError("refusing to export an empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    paths = [out / "records.csv", out / "summary.json", out / "curves.csv"]
    with paths[0].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.records:
            w.writerow([_fmt(v) for v in record_row(r)])
    paths[1].write_text(json.dumps(report.summary, indent=1))
    with paths[2].open("w", newline="") as fh:
        w = csv.DictWriter(fh, ["dataset", "attack", "epsilon", "metric", "mean", "std"],
                           lineterminator="\n")
        w.writeheader()
        for row in curves(report):
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return paths


def load_report(path: str | Path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))


def record_fields() -> list[str]:
    return [f.name for f in fields(RunRecord)]
