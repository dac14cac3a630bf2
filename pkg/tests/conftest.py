import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fixtures import CLEAN, CONTAMINATED  # noqa: E402


@pytest.fixture
def clean():
    return CLEAN.copy()


@pytest.fixture
def contaminated():
    return CONTAMINATED.copy()
