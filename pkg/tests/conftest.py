import re

import numpy as np
import pytest

ACCEPTANCE_FILE = "test_acceptance.py"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _criterion_number(name):
    m = re.search(r"criterion_(\d+)", name)
    return int(m.group(1)) if m else 99


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "xfailed", "xpassed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if ACCEPTANCE_FILE not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            name = rep.nodeid.split("::")[-1]
            detail = dict(rep.user_properties).get("detail", "")
            verdict = "PASS" if status == "passed" else "FAIL"
            tag = "" if status in ("passed", "failed") else f" [{status}]"
            lines.append((_criterion_number(name), f"{verdict} {name}{tag}: {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
