import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_CRITERIA: dict = {}


@pytest.fixture(scope="session", autouse=True)
def _table_cache(tmp_path_factory):
    # tables built by tests never touch the user's cache
    old = os.environ.get("PREFNET_CACHE_DIR")
    os.environ["PREFNET_CACHE_DIR"] = str(tmp_path_factory.mktemp("prefnet-cache"))
    yield
    if old is None:
        os.environ.pop("PREFNET_CACHE_DIR", None)
    else:
        os.environ["PREFNET_CACHE_DIR"] = old


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them in order."""

    def record(number: int, part: str, ok: bool, detail: str) -> None:
        line = f"criterion {number}{part}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[(number, part)] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[key])
