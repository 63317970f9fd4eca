import math

import numpy as np
import pytest

from vscreen import DEFAULT_SCORERS, ScreenDataset, SyntheticSpec, generate_synthetic, orient_scores

NAN = math.nan

# Raw (unoriented) scores for three ligands; autodock is lower-is-better.
TINY_RAW = {
    "autodock": [-9.0, -7.0, -8.0],
    "diffdock": [0.5, 1.0, NAN],
    "gnina_ad": [0.8, 0.2, 0.5],
    "gnina_dd": [0.4, 0.05, 0.7],
    "nmdn_ad": [100.0, -1000.0, 200.0],
    "nmdn_dd": [-900.0, 500.0, -100.0],
}


def tiny_dataset() -> ScreenDataset:
    return ScreenDataset("TINY", ["A", "B", "C"], [1, 0, 0], TINY_RAW, DEFAULT_SCORERS)


@pytest.fixture
def tiny():
    return tiny_dataset()


@pytest.fixture
def tiny_oriented():
    return orient_scores(tiny_dataset())


@pytest.fixture(scope="session")
def small_synth():
    spec = SyntheticSpec(20, 480, {"gnina_ad": 1.5, "nmdn_dd": 1.5}, missing_rate=0.05,
                         seed=3, target_id="S1")
    return generate_synthetic(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} [{number:>2}] {title}"
        if detail:
            line += f" ({detail})"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
