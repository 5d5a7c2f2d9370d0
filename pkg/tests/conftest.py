import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SUBSET_DIR = ROOT / "data" / "mnist-5k"

# acceptance results, filled by test_acceptance and echoed in the terminal summary
ACCEPTANCE: dict[str, str] = {}


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False,
                     help="run full-scale acceptance criteria (full MNIST, hours)")
    parser.addoption("--mnist-dir", default=os.environ.get("MEMSTOCH_DATA_DIR"),
                     help="directory holding the full MNIST IDX files")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full"):
        return
    skip = pytest.mark.skip(reason="full-scale run; enable with --full")
    for item in items:
        if item.get_closest_marker("full"):
            item.add_marker(skip)


@pytest.fixture(scope="session")
def data_dir():
    if not (SUBSET_DIR / "train-images-idx3-ubyte.gz").exists():
        pytest.skip(f"bundled MNIST subset missing from {SUBSET_DIR}")
    return SUBSET_DIR


@pytest.fixture(scope="session")
def full_mnist_dir(request):
    d = request.config.getoption("--mnist-dir")
    if not d:
        pytest.skip("full MNIST not configured (--mnist-dir or MEMSTOCH_DATA_DIR)")
    d = Path(d)
    if not any((d / n).exists() for n in ("train-images-idx3-ubyte",
                                          "train-images-idx3-ubyte.gz")):
        pytest.skip(f"no MNIST training images in {d}")
    return d


@pytest.fixture
def record_acceptance():
    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE[criterion] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    lines = dict(ACCEPTANCE)
    for rep in terminalreporter.stats.get("skipped", []):
        name = rep.nodeid.rsplit("::", 1)[-1]
        if "test_acceptance" in rep.nodeid and name.startswith("test_criterion_"):
            num = int(name.split("_")[2])
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            lines.setdefault(str(num), f"[SKIP] {num}: {reason.removeprefix('Skipped: ')}")
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=lambda k: (int(k.split()[0]), k)):
        terminalreporter.write_line(lines[key])
