import pytest

from adapted_theta.harness import StudySpec, run_convergence_study

VERDICTS = pytest.StashKey[list]()

EXAMPLE_SCHEMES = ["cn", "ada2", "ada3", "ada4"]
EXAMPLE_SIZES = [8, 16, 32, 64, 128]


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture(scope="session")
def example51_study():
    """The full example51 convergence study, shared by every test that needs it."""
    return run_convergence_study(StudySpec("bsde:example51", EXAMPLE_SCHEMES, EXAMPLE_SIZES))


@pytest.fixture
def verdict(request):
    """Record one acceptance line; call with (criterion, ok, detail) before asserting."""

    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        request.config.stash[VERDICTS].append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(VERDICTS, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
