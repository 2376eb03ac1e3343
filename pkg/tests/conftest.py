import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from src.plaplab.space.generators import path  # noqa: E402
from src.plaplab.space.mms import build_space  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def p3():
    return path(3)


@pytest.fixture
def two_point():
    return build_space([(0, 1, 1.0, 1.0)], [1.0, 1.0])
