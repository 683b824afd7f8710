import numpy as np
import pytest

from chomp.synth import SynthParams, generate_session


@pytest.fixture(scope="session")
def short_session():
    """A 4 s left-chewing session covering all five units."""
    return generate_session(SynthParams(subject_id="S01", session_id="S01_apple_left", duration=4.0, rng_seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the measured detail."""
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in name:
                continue
            if rep.when != "call" and outcome == "passed":
                continue  # setup/teardown that went fine
            n = int(name.split("test_criterion_")[1][:2])
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            ok = outcome == "passed"
            if n not in rows or rows[n][0]:
                rows[n] = (ok, detail)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(rows):
        ok, detail = rows[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
