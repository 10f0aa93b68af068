import numpy as np
import pytest
from hypothesis import settings

# Same examples on every run.
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""

    def _record(label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        return ok

    return _record


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # Compile the kernels once so timed sections measure execution only.
    from sham.formats import compress
    from sham.kernels import pardot

    W = np.array([[1.0, 0.0], [2.0, 3.0]], dtype=np.float32)
    x = np.ones((1, 2))
    for fmt in ("ham", "sham", "csc", "imap"):
        pardot(x, compress(W, fmt), 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
