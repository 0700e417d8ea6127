"""Acceptance gate.  Each test prints one PASS/FAIL line and asserts the same verdict.

The FALFA/SLN grid (every available dataset, eps=0.10, 5 repeats, full
400-epoch training) is built once per session and shared; expect roughly twenty minutes
on one core.  Datasets whose raw CSV is absent count as misses.
"""
import time

import numpy as np
import pytest

from falfa import evaluation as ev
from falfa import selftest
from falfa.data import DatasetConfig, prepare
from falfa.model import TrainConfig, init_model, train

from conftest import CONFIG_DIR, dataset_available

pytestmark = pytest.mark.slow

DATASETS = ("abalone", "australian", "banknote", "breastcancer", "cmc", "htru2", "phoneme",
            "ringnorm", "texture", "yeast")
# Reported mean performance loss (points) at a 10% poisoning rate.
REPORTED_FALFA = {"abalone": 7.7, "australian": 8.3, "banknote": 10.3, "breastcancer": 9.1,
                  "cmc": 5.7, "htru2": 9.4, "phoneme": 11.6, "ringnorm": 6.4, "texture": 4.9,
                  "yeast": 2.3}
REPEATS = 5
EPS = 0.10

LINES = []


def verdict(capsys, num, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {text}"
    LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def available():
    return [d for d in DATASETS if dataset_available(d)]


def missing():
    return [d for d in DATASETS if not dataset_available(d)]


@pytest.fixture(scope="session")
def grid():
    cfgs = [DatasetConfig.load(CONFIG_DIR / f"{d}.json") for d in available()]
    settings = ev.SweepSettings(rates=(EPS,), repeats=REPEATS)
    return ev.run_experiment(cfgs, settings)


def mean_loss(report, ds, attack):
    return float(np.mean([r.perf_loss for r in report.select(ds, attack, EPS)]))


def test_criterion_1_clean_baselines(grid, capsys):
    parts, ok = [], True

    def clean(ds, field):
        per_repeat = {r.repeat_index: getattr(r, field) for r in grid.select(ds, "falfa", EPS)}
        return float(np.mean(list(per_repeat.values())))

    if dataset_available("banknote"):
        tr, te = clean("banknote", "train_acc_clean"), clean("banknote", "test_acc_clean")
        good = tr >= 0.99 and te >= 0.99
        parts.append(f"banknote train {tr:.3f} test {te:.3f} (need >= 0.99)")
    else:
        good = False
        parts.append("banknote dataset file not available")
    ok &= good
    for ds, lo, hi in (("breastcancer", 0.90, 0.99), ("yeast", 0.58, 0.74)):
        if not dataset_available(ds):
            ok = False
            parts.append(f"{ds} dataset file not available")
            continue
        te = clean(ds, "test_acc_clean")
        ok &= lo <= te <= hi
        parts.append(f"{ds} test {te:.3f} (need [{lo}, {hi}])")
    verdict(capsys, 1, ok, "; ".join(parts))


def test_criterion_2_falfa_loss_at_ten_percent(grid, capsys):
    within, beats, detail = 0, 0, []
    for ds in DATASETS:
        if not dataset_available(ds):
            detail.append(f"{ds}=n/a")
            continue
        f, s = mean_loss(grid, ds, "falfa"), mean_loss(grid, ds, "sln")
        within += abs(f - REPORTED_FALFA[ds]) <= 5.0
        beats += f > s
        detail.append(f"{ds}={f:.1f}/{REPORTED_FALFA[ds]}")
    ok = within >= 7 and beats >= 8
    verdict(capsys, 2, ok, f"within 5 pts on {within}/10 (need 7), FALFA > SLN on {beats}/10 "
                           f"(need 8); measured/reported: {', '.join(detail)}")


def test_criterion_3_sln_weak(grid, capsys):
    losses = [mean_loss(grid, ds, "sln") for ds in available()]
    avg = float(np.mean(losses))
    verdict(capsys, 3, avg <= 3.0, f"mean SLN loss {avg:.2f} pts (need <= 3) over "
                                   f"{len(losses)}/10 datasets; missing: {missing() or 'none'}")


def test_criterion_4_convergence(grid, capsys):
    per_ds = {ds: [r.iterations for r in grid.select(ds, "falfa", EPS)] for ds in available()}
    avg = float(np.mean([np.mean(v) for v in per_ds.values()]))
    capped = [ds for ds, v in per_ds.items() if max(v) >= grid.config["max_iterations"]]
    ok = avg <= 4.0 and len(capped) <= 1
    iters = ", ".join(f"{ds}={np.mean(v):.1f}" for ds, v in per_ds.items())
    verdict(capsys, 4, ok, f"mean iterations {avg:.2f} (need <= 4), cap reached on "
                           f"{len(capped)} datasets {capped} (need <= 1) over "
                           f"{len(per_ds)}/10 datasets; per dataset: {iters}")


def test_criterion_5_camouflage(capsys):
    if not dataset_available("banknote"):
        verdict(capsys, 5, False, "banknote dataset file not available")
    cfg = DatasetConfig.load(CONFIG_DIR / "banknote.json")
    rep = ev.run_experiment([cfg], ev.SweepSettings(rates=(0.30,), repeats=REPEATS))
    f = {r.repeat_index: r.camouflage_gap for r in rep.select("banknote", "falfa")}
    s = {r.repeat_index: r.camouflage_gap for r in rep.select("banknote", "sln")}
    wins = sum(f[i] > s[i] for i in f)
    verdict(capsys, 5, wins >= 4, f"gap(FALFA) > gap(SLN) in {wins}/5 repeats (need 4)")


def test_criterion_6_lp_oracle_suite(capsys):
    t0 = time.perf_counter()
    c = selftest.lp_oracle_suite(1000, seed=0)
    secs = time.perf_counter() - t0
    ok = (c["objective_mismatch"] == 0 and c["non_integral"] == 0 and c["infeasible"] == 0
          and c["not_optimal"] == 0 and secs < 60)
    verdict(capsys, 6, ok, f"1000 instances: {c['objective_mismatch']} objective mismatches, "
                           f"{c['non_integral']} fractional, {c['infeasible']} infeasible, "
                           f"{secs:.1f}s (need < 60s)")


def test_criterion_7_gradients_and_loss_identity(capsys):
    t0 = time.perf_counter()
    errs = selftest.gradient_check(seed=0)
    gap = selftest.loss_identity_error(draws=100)
    secs = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-4 and gap <= 1e-12 and secs < 60
    verdict(capsys, 7, ok, f"max gradient rel err {max(errs.values()):.1e} (need < 1e-4), "
                           f"loss identity gap {gap:.1e} (need <= 1e-12), {secs:.1f}s")


def test_criterion_8_relative_efficiency(grid, capsys):
    if not dataset_available("cmc"):
        verdict(capsys, 8, False, "cmc dataset file not available")
    prep = prepare(DatasetConfig.load(CONFIG_DIR / "cmc.json"), seed=0)
    times = []
    for _ in range(3):
        t0 = time.perf_counter()
        train(init_model(prep.train.m, 0), prep.train.X, prep.train.y, TrainConfig(seed=0))
        times.append(time.perf_counter() - t0)
    one = float(np.median(times))
    recs = grid.select("cmc", "falfa", EPS)
    attack = float(np.mean([r.attack_seconds for r in recs]))
    ratio = attack / one
    verdict(capsys, 8, ratio < 5.0, f"FALFA attack {attack:.1f}s vs one clean training "
                                    f"{one:.1f}s: ratio {ratio:.2f} (need < 5); mean "
                                    f"{np.mean([r.iterations for r in recs]):.1f} retrains")
