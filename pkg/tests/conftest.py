import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
sys.path.insert(0, str(Path(__file__).resolve().parent))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES

import json

from breachlens.cli import COMMANDS, main

PIPELINE = list(COMMANDS)


def write_config(dirpath: Path, **values) -> Path:
    """Config file in ``dirpath`` with outputs to ``dirpath/out``."""
    cfg = {"output_dir": "out", "seed": 42, **values}
    path = dirpath / "run.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def run_stages(config: Path, stages=PIPELINE, extra=()) -> list[int]:
    return [main([stage, "--config", str(config), *extra]) for stage in stages]


def full_fixture_run(dirpath: Path) -> Path:
    config = write_config(dirpath, input_path=str(FIXTURES / "incidents_400.csv"),
                          forecast={"train_end_year": 2020, "horizon": 3, "model": "both"})
    codes = run_stages(config)
    assert codes == [0] * len(PIPELINE)
    return dirpath / "out"


@pytest.fixture(scope="session")
def twin_runs(tmp_path_factory):
    """Two complete pipeline runs on the 400-row fixture with the same seed."""
    return (full_fixture_run(tmp_path_factory.mktemp("run_a")),
            full_fixture_run(tmp_path_factory.mktemp("run_b")))
