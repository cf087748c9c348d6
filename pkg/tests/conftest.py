import pytest

from symctl import kernels

_ACCEPTANCE = []


@pytest.fixture(params=["compiled", "python"])
def backend(request):
    """Run a test under each kernel backend, restoring the default afterwards."""
    if request.param == "compiled" and not kernels.compiled_available():
        pytest.skip("compiled kernels not built")
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, title, passed, detail)."""
    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
