import json
import time
from collections import namedtuple

import numpy as np
import pytest

from geocluster.cli import main

Table1Run = namedtuple("Table1Run", "out doc rows seconds")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def table1_run(tmp_path_factory):
    """One ``regen-table1`` run at 2,000 replicates with the pinned seed."""
    out = tmp_path_factory.mktemp("regen_a")
    start = time.perf_counter()
    code = main(["regen-table1", "--replicates", "2000", "--out", str(out)])
    seconds = time.perf_counter() - start
    assert code == 0
    doc = json.loads((out / "regen-table1.json").read_text())
    rows = {(r["family"], r["sampling"], r["shape"]): r for r in doc["result"]["presets"]}
    return Table1Run(out, doc, rows, seconds)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, after the run."""
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines.extend(v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
