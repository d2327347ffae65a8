import pytest

from sisgame.game_complete import GameParams


@pytest.fixture
def standard():
    """Fifteen players, C=0.4, H=0.5, tau=2/3."""
    return GameParams(N=15, C=0.4, H=0.5, tau=2 / 3)
