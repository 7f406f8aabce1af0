import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from econfit import BinaryMatrix  # noqa: E402


def labeled(values, year=None):
    values = [list(r) for r in values]
    return BinaryMatrix(
        year=year,
        countries=tuple(f"C{i}" for i in range(len(values))),
        products=tuple(f"P{j}" for j in range(len(values[0]))),
        values=values,
    )


@pytest.fixture
def two_by_two():
    return labeled([[1, 1], [1, 0]])


CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.yaml"


def make_study(root: Path, seed: int = 7) -> Path:
    """Generate synthetic inputs under ``root/data`` and return a config that reads them."""
    from econfit.cli import main

    rc = main(["--seed", str(seed), "--out-dir", str(root / "data"), "synth", "study",
               "--nc", "20", "--np", "50", "--years", "1990", "1995", "2000"])
    assert rc == 0
    (root / "configs").mkdir(exist_ok=True)
    cfg = root / "configs" / "synthetic.yaml"
    cfg.write_text(CONFIG.read_text())
    return cfg


@pytest.fixture(scope="session")
def study_config(tmp_path_factory):
    return make_study(tmp_path_factory.mktemp("study"))


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:>2}. {title}: {detail}")
