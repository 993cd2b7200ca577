import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sgtrewrite.corpus import parse_dataset_line  # noqa: E402

WEATHER_HISTORY = ["深圳最近天气怎么样？", "最近经常阴天下雨。", "冬天就是这样的。"]
WEATHER_REFERENCE = "深圳冬天就是经常阴天下雨。"
WEATHER_BARE_REFERENCE = "深圳冬天就是经常阴天下雨"

ACCEPTANCE_RESULTS = []


@pytest.fixture
def weather():
    return parse_dataset_line("\t".join(WEATHER_HISTORY + [WEATHER_REFERENCE]))


@pytest.fixture
def weather_bare():
    return parse_dataset_line("\t".join(WEATHER_HISTORY + [WEATHER_BARE_REFERENCE]))


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, name, passed, detail=""):
        ACCEPTANCE_RESULTS.append((number, name, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}" + (f" -- {detail}" if detail else ""))
