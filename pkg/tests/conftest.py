import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fogsim.scenarios import run_scenario

GRID60_CELLS = [
    ("eeg_game", v, c, p)
    for v in ("A", "B")
    for c in (1, 2, 3)
    for p in ("cloud", "edgeward")
] + [
    ("surveillance", "-", c, p)
    for c in (1, 2, 3)
    for p in ("cloud", "edgeward")
]

GRID20_CELLS = [
    ("eeg_game", "A", c, p) for c in (1, 2, 3, 4, 5) for p in ("cloud", "edgeward")
] + [
    ("surveillance", "-", c, p) for c in (1, 2, 3, 4, 5) for p in ("cloud", "edgeward")
]


def _run_grid(cells, duration_ms):
    out = {}
    for scenario, variant, config, policy in cells:
        out[(scenario, variant, config, policy)] = run_scenario(
            scenario,
            config=config,
            variant=variant,
            placement_policy=policy,
            duration_ms=duration_ms,
        )
    return out


@pytest.fixture(scope="session")
def grid60():
    """60 s runs at configs 1-3, both variants and placements."""
    return _run_grid(GRID60_CELLS, 60_000.0)


@pytest.fixture(scope="session")
def grid20():
    """20 s runs across the full config range 1-5."""
    return _run_grid(GRID20_CELLS, 20_000.0)
