from __future__ import annotations

from pathlib import Path

import pytest

from sfi import load_example
from sfi.generate import Bounds, generate_program
from sfi.model import FieldId, MethodId, PointLabel

PROGRAMS = Path(__file__).resolve().parent.parent / "src" / "sfi" / "programs"
GOLDEN = Path(__file__).resolve().parent / "golden"

EXAMPLES = sorted(p.stem for p in PROGRAMS.glob("*.sfi"))

SUITE_BOUNDS = Bounds(classes=6, methods=8, points=40, fields=4)
SUITE_SIZE = 500


def pt(method: str, label: str | int) -> PointLabel:
    """``pt("C.main", 2)`` -> the point ``C.main/2``."""
    cls, name = method.split(".", 1)
    return PointLabel(MethodId(cls, name), str(label))


def fid(name: str) -> FieldId:
    cls, f = name.split(".")
    return FieldId(cls, f)


@pytest.fixture(scope="session")
def two_paths():
    return load_example("two_paths")


@pytest.fixture(scope="session")
def suite_programs():
    return [generate_program(seed, SUITE_BOUNDS) for seed in range(SUITE_SIZE)]


# -- acceptance summary -------------------------------------------------------

_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome == "failed":
        name = report.nodeid.split("::")[-1]
        _acceptance.setdefault(name, "PASS" if report.passed else "FAIL")
        if report.failed:
            _acceptance[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        terminalreporter.write_line(f"{_acceptance[name]:4}  {name}")
