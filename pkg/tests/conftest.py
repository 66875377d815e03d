import sys
from pathlib import Path

import pytest

from cisg import load_game

GAMES = Path(__file__).resolve().parent.parent / "games"
sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def games_dir():
    return GAMES


@pytest.fixture
def cycle2():
    return load_game(GAMES / "cycle2.cisg")


@pytest.fixture
def asym3():
    return load_game(GAMES / "asym3.cisg")
