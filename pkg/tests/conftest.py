import pytest

from a3ds.features import ImagePair, make_label
from a3ds.lexicon import default_lexicon

# green floor, light green wall, tiny red ball near the right corner
RED_BALL_TARGET = make_label((4, 3, 0, 0, 2, 13))
RED_BALL_DISTRACTOR = RED_BALL_TARGET.replace(object_color=8)
RED_BALL_EXHAUSTIVE = "a tiny red ball near the right corner in front of a light green wall on green floor"
RED_BALL_DRIFTED = "a tiny red ball green near the floor in green of"


@pytest.fixture(scope="session")
def lex():
    return default_lexicon()


@pytest.fixture
def red_ball_pair():
    return ImagePair(RED_BALL_TARGET, RED_BALL_DISTRACTOR)
