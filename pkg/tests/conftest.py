import pytest

from hashfind.synthetic import generate_synthetic

_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call":
        _ACCEPTANCE.append((report.nodeid, "PASS" if report.passed else "FAIL"))
    elif report.failed:
        # setup/teardown error counts as a failed criterion
        _ACCEPTANCE.append((report.nodeid, "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _ACCEPTANCE:
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"[acceptance] {name}: {outcome}")


@pytest.fixture(scope="session")
def separable_split():
    """Separable 4-class data: 50/class references, 10/class queries.

    One deterministic draw of 60 samples per class, split per class into
    the first 50 (reference) and last 10 (query).
    """
    full = generate_synthetic(4, 60, 8, separation=6.0, noise=0.2, seed=42)
    ref_rows = [i for c in range(4) for i in range(c * 60, c * 60 + 50)]
    qry_rows = [i for c in range(4) for i in range(c * 60 + 50, (c + 1) * 60)]
    return full.subset(ref_rows), full.subset(qry_rows)
