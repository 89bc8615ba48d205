import re
from pathlib import Path

import pytest

from termplan.dsl import load_task

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "termplan" / "fixtures"


def fixture_text(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def sc():
    return load_task(fixture_text("sc.tmd"), fixture_text("sc.tmp"))


@pytest.fixture(scope="session")
def mm():
    return load_task(fixture_text("mm.tmd"), fixture_text("mm.tmp"))


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", getattr(rep, "nodeid", ""))
            if m and rep.when in ("call", "setup"):
                rows[int(m.group(1))] = (m.group(2), "PASS" if outcome == "passed" else "FAIL")
    if rows:
        terminalreporter.section("acceptance criteria")
        for n in sorted(rows):
            name, status = rows[n]
            terminalreporter.write_line(f"criterion {n} [{status}] {name}")
