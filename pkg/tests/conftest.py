import sys
from pathlib import Path

import pytest

from falfa import sources

ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = ROOT / "configs"
RAW_DIR = ROOT / "data" / "raw"

sys.path.insert(0, str(Path(__file__).parent))


def dataset_available(name: str) -> bool:
    return (RAW_DIR / f"{name}.csv").is_file()


@pytest.fixture(scope="session", autouse=True)
def raw_data():
    """Write the bundled raw CSVs once so data-backed tests can run offline."""
    sources.materialize_all(RAW_DIR)
    return RAW_DIR


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
