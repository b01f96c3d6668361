from datetime import date

import pytest

from occusense import dataset as ds

ACCEPTANCE = {}


@pytest.fixture
def reference():
    return ds.reference_dataset()


@pytest.fixture(scope="session")
def sim_corpus():
    """The 56-slot, 1008-reading synthetic corpus with its room and schedule."""
    schedule = ds.Schedule()
    room = ds.simulation_room()
    data = ds.generate_synthetic(ds.GeneratorParams(seed=11), 7, 8)
    readings = ds.synthesize_readings(data, room, schedule, date(2025, 1, 6), seed=11)
    return data, readings, room, schedule


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
