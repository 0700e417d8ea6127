"""Command-line entry point: ``falfa <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import attacks, evaluation, lp, selftest, sources
from .data import DataError, DatasetConfig, load_dataset_csv, prepare, save_dataset_csv
from .model import (TrainConfig, TrainingDiverged, evaluate_accuracy, init_model, load_model,
                    save_model, train)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("falfa")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _eps_tag(eps: float) -> str:
    return f"eps{eps:.4f}".rstrip("0").rstrip(".")


def _load_config(args) -> DatasetConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = DatasetConfig.load(args.config[0])
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(max_epochs=args.epochs, learning_rate=args.lr,
                       batch_size=args.batch_size, seed=seed)


def _paths(out: Path, name: str, seed: int) -> dict[str, Path]:
    prep = out / "prepared" / name / f"seed{seed}"
    return {"prepared": prep, "train": prep / "train.csv", "test": prep / "test.csv",
            "provenance": prep / "provenance.json",
            "model": out / "models" / name / f"seed{seed}" / "clean.json"}


def _load_prepared(paths):
    if not paths["train"].is_file():
        raise DataError(f"prepared data not found at {paths['prepared']}; run `falfa prepare` first")
    return load_dataset_csv(paths["train"], "train"), load_dataset_csv(paths["test"], "test")


def cmd_fetch(args) -> int:
    written = sources.materialize_all(args.data_dir, overwrite=args.force)
    for name, path in written.items():
        print(f"{name:14s} {path}")
    for name, header in sources.MANUAL_HEADERS.items():
        print(f"{name:14s} not bundled: place {Path(args.data_dir) / (name + '.csv')} "
              f"with header '{header}'")
    return EXIT_OK


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    prep = prepare(cfg, seed=cfg.seed)
    paths = _paths(Path(args.out), cfg.name, cfg.seed)
    save_dataset_csv(prep.train, paths["train"])
    save_dataset_csv(prep.test, paths["test"])
    paths["provenance"].write_text(json.dumps(prep.provenance, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.name}: train {prep.train.n} rows, test {prep.test.n} rows, "
          f"m={prep.train.m}, PLR={prep.train.positive_label_rate:.2f} -> {paths['prepared']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    paths = _paths(Path(args.out), cfg.name, cfg.seed)
    if not paths["train"].is_file():
        cmd_prepare(args)
    tr, te = _load_prepared(paths)
    model = train(init_model(tr.m, cfg.seed), tr.X, tr.y, _train_config(args, cfg.seed))
    save_model(model, paths["model"])
    metrics = {"train_acc": evaluate_accuracy(model, tr.X, tr.y),
               "test_acc": evaluate_accuracy(model, te.X, te.y)}
    paths["model"].with_name("metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    print(f"{cfg.name}: train acc {metrics['train_acc']:.4f}, test acc {metrics['test_acc']:.4f}"
          f" -> {paths['model']}")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _load_config(args)
    if not 0.0 <= args.epsilon <= 1.0:
        raise UsageError(f"--epsilon must lie in [0, 1], got {args.epsilon}")
    paths = _paths(Path(args.out), cfg.name, cfg.seed)
    tr, te = _load_prepared(paths)
    if not paths["model"].is_file():
        raise DataError(f"clean model not found at {paths['model']}; run `falfa train` first")
    clean = load_model(paths["model"])
    tcfg = _train_config(args, cfg.seed)
    t0 = time.perf_counter()
    res = evaluation.run_attack(args.attack, tr.X, tr.y, args.epsilon, cfg.seed, clean, tcfg,
                                args.max_iterations)
    seconds = time.perf_counter() - t0
    victim = train(init_model(tr.m, cfg.seed), tr.X, res.y_poisoned, tcfg)
    test_clean = evaluate_accuracy(clean, te.X, te.y)
    test_poisoned = evaluate_accuracy(victim, te.X, te.y)
    run_dir = (Path(args.out) / "attacks" / cfg.name / args.attack / _eps_tag(args.epsilon)
               / f"seed{cfg.seed}")
    attacks.save_labels(run_dir / "labels.csv", tr.y, res.y_poisoned)
    attacks.save_trace(run_dir / "trace.json", res)
    summary = {"dataset": cfg.name, "attack": args.attack, "epsilon": args.epsilon,
               "seed": cfg.seed, "flips": res.flips, "iterations": res.iterations,
               "converged": res.converged, "test_acc_clean": test_clean,
               "test_acc_poisoned": test_poisoned,
               "perf_loss": evaluation.performance_loss(test_clean, test_poisoned),
               "train_acc_poisoned": evaluate_accuracy(victim, tr.X, res.y_poisoned)}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{cfg.name} {args.attack} eps={args.epsilon}: flips={res.flips} "
          f"iterations={res.iterations} loss={summary['perf_loss']:.2f} pts "
          f"({seconds:.1f}s) -> {run_dir}")
    return EXIT_OK


def _sweep_configs(args) -> list[DatasetConfig]:
    if not args.config:
        raise UsageError("--config is required")
    cfgs = []
    for item in args.config:
        p = Path(item)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        cfgs.extend(DatasetConfig.load(f) for f in files)
    return cfgs


def _parse_list(text: str, kind=float) -> tuple:
    try:
        return tuple(kind(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def cmd_sweep(args) -> int:
    cfgs = _sweep_configs(args)
    rates = _parse_list(args.rates) if args.rates else evaluation.RATE_GRID
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise UsageError("rates must lie in [0, 1]")
    atks = _parse_list(args.attack, str) if args.attack else evaluation.ATTACKS
    seed = args.seed if args.seed is not None else 0
    settings = evaluation.SweepSettings(
        attacks=atks, rates=rates, repeats=args.repeats, base_seed=seed,
        train_config=_train_config(args, seed), max_iterations=args.max_iterations,
        record_timing=not args.no_timing)
    report = evaluation.run_experiment(cfgs, settings, jobs=args.jobs)
    out = Path(args.out) / "reports" / (args.tag or f"sweep-seed{seed}")
    if report.records or report.failures:
        evaluation.export_report(report, out, "csv")
        evaluation.export_report(report, out, "json")
    _print_summary(report)
    print(f"{len(report.records)} records, {len(report.failures)} failed cells -> {out}")
    if report.failures:
        for f in report.failures:
            print(f"FAILED {f['dataset']} {f['attack']} eps={f['epsilon']} "
                  f"repeat={f['repeat']}: {f['error']}", file=sys.stderr)
        numeric = any(f["error"].startswith(("AttackFailed", "TrainingDiverged", "BudgetViolation"))
                      for f in report.failures)
        return EXIT_NUMERIC if numeric else EXIT_DATA
    return EXIT_OK


def _print_summary(report: evaluation.ExperimentReport) -> None:
    print(f"{'dataset':14s} {'attack':6s} {'eps':>5s} {'loss':>7s} {'std':>6s} top")
    for s in report.summary:
        print(f"{s['dataset']:14s} {s['attack']:6s} {s['epsilon']:5.2f} {s['mean_loss']:7.2f} "
              f"{s['std_loss']:6.2f} {'*' if s['top_ranked'] else ''}")


def cmd_report(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    report = evaluation.load_report(path)
    _print_summary(report)
    if args.export:
        for p in evaluation.export_report(report, args.export, args.format):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = selftest.run_selftest(inject_fault=args.inject_fault, instances=args.instances)
    print(f"simplex backend: {lp.BACKEND}")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:40s} {c.detail} ({c.seconds:.1f}s)")
    ok = all(c.passed for c in checks)
    print("verdict:", "all properties hold" if ok else "FAILURES")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", action="append", help="dataset config JSON (repeatable; "
                        "a directory means every *.json in it)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default="runs", help="output directory (default: runs)")
    common.add_argument("--epochs", type=int, default=400)
    common.add_argument("--lr", type=float, default=0.01)
    common.add_argument("--batch-size", type=int, default=128)
    common.add_argument("--max-iterations", type=int, default=10,
                        help="FALFA iteration cap")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="falfa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="write bundled raw dataset CSVs")
    p.add_argument("--data-dir", default="data/raw")
    p.add_argument("--force", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_fetch)

    for name, func, doc in [("prepare", cmd_prepare, "binarize, split and normalize a dataset"),
                            ("train", cmd_train, "train the clean classifier")]:
        p = sub.add_parser(name, parents=[common], help=doc)
        p.set_defaults(func=func)

    p = sub.add_parser("attack", parents=[common], help="poison training labels")
    p.add_argument("--attack", choices=evaluation.ATTACKS, default="falfa")
    p.add_argument("--epsilon", type=float, required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", parents=[common], help="run the experiment grid")
    p.add_argument("--attack", default=None, help="comma list (default: falfa,sln)")
    p.add_argument("--rates", default=None, help="comma list (default: 0,0.05,...,0.4)")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tag", default=None, help="report subdirectory name")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 for attack_seconds so reruns are byte-identical")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize a saved report.json")
    p.add_argument("--input", required=True)
    p.add_argument("--export", default=None, help="re-export into this directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the embedded property checks")
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt the simplex pivot to prove the oracle check bites")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"falfa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"falfa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, attacks.AttackFailed, lp.BudgetViolation,
            FloatingPointError) as exc:
        print(f"falfa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"falfa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
