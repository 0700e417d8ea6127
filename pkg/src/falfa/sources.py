"""Materialize raw CSV files for the benchmark datasets that ship inside the
``keel-ds`` wheel (KEEL repository copies of the UCI tables).

Abalone, Banknote and HTRU2 are not bundled there; their configs point at
``data/raw/<name>.csv`` and the files must be supplied by the user (see
``MANUAL_HEADERS`` for the expected header rows).
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path

log = logging.getLogger(__name__)

# output name -> (keel-ds collection, keel-ds file)
_KEEL = {
    "australian": ("balanced", "australian"),
    "breastcancer": ("balanced", "wdbc"),
    "cmc": ("balanced", "contraceptive"),
    "phoneme": ("balanced", "phoneme"),
    "ringnorm": ("balanced", "ring"),
    "texture": ("balanced", "texture"),
}

BUNDLED = tuple(sorted([*_KEEL, "yeast"]))

MANUAL_HEADERS = {
    "abalone": "Sex,Length,Diameter,Height,Whole_weight,Shucked_weight,"
               "Viscera_weight,Shell_weight,Rings",
    "banknote": "variance,skewness,curtosis,entropy,class",
    "htru2": "mean_ip,std_ip,kurt_ip,skew_ip,mean_dm,std_dm,kurt_dm,skew_dm,class",
}

_CMC = {"1": "No-use", "2": "Long-term", "3": "Short-term"}


def _keel_rows(kind: str, name: str) -> list[list[str]]:
    import keel_ds

    path = Path(keel_ds.__file__).parent / "data" / kind / "raw" / f"{name}.dat"
    with path.open() as fh:
        return [[c.strip() for c in r] for r in csv.reader(fh) if r and not r[0].startswith("@")]


def _relabel(name: str, label: str) -> str:
    if name == "breastcancer":
        return {"B": "1", "M": "0"}[label]  # benign is the majority (positive) class
    if name == "cmc":
        return _CMC[label]
    return label


def _yeast_rows() -> list[list[str]]:
    # The two most frequent yeast localisations are CYT and NUC; under sorted
    # label encoding of the ten class names they are classes 0 and 7.
    # yeast-2_vs_4 negatives are exactly the CYT rows, yeast1 positives the NUC rows.
    cyt = [r[:-1] + ["0"] for r in _keel_rows("imbalanced", "yeast-2_vs_4") if r[-1] == "negative"]
    nuc = [r[:-1] + ["7"] for r in _keel_rows("imbalanced", "yeast1") if r[-1] == "positive"]
    return cyt + nuc


def materialize(name: str, dest_dir: str | Path, overwrite: bool = False) -> Path:
    """Write ``<dest_dir>/<name>.csv`` for a bundled dataset and return its path."""
    if name not in BUNDLED:
        raise KeyError(f"{name!r} is not bundled; supply data/raw/{name}.csv manually")
    dest = Path(dest_dir) / f"{name}.csv"
    if dest.exists() and not overwrite:
        return dest
    if name == "yeast":
        rows = _yeast_rows()
    else:
        rows = [r[:-1] + [_relabel(name, r[-1])] for r in _keel_rows(*_KEEL[name])]
    m = len(rows[0]) - 1
    header = [f"a{j + 1}" for j in range(m)] + ["class"]
    dest.parent.mkdir(parents=True, exist_ok=True)
    with dest.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s (%d rows)", dest, len(rows))
    return dest


def materialize_all(dest_dir: str | Path, overwrite: bool = False) -> dict[str, Path]:
    return {name: materialize(name, dest_dir, overwrite) for name in BUNDLED}
