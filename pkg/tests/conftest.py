import pytest

from ipfmocap.imaging import default_flesh
from ipfmocap.kinematics import default_skeleton


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


@pytest.fixture(scope="session")
def flesh(skeleton):
    return default_flesh(skeleton)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome.upper()[:4], props.get("summary", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, status, text in sorted(lines):
            terminalreporter.write_line(f"criterion {n}: {status}  {text}")
