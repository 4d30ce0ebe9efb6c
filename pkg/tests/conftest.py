import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corespec.fixtures import h2o_fcidump_path  # noqa: E402


@pytest.fixture(scope="session")
def h2o_path():
    path = h2o_fcidump_path()
    if path is None:
        pytest.skip("water FCIDUMP not available")
    return path


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    ran = {int(m.group(1)) for key in ("passed", "failed", "error", "skipped")
           for rep in terminalreporter.stats.get(key, [])
           if (m := re.search(r"test_acceptance\.py::test_criterion_(\d+)_", rep.nodeid))}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ran):
        verdict, detail = RESULTS.get(number, ("FAIL", "no verdict recorded (see traceback)"))
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
