"""
Shared fixtures; puts src/ on the import path like the entry script does.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

SRC_DIR = Path(__file__).parent.parent / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from ldpc6481 import synthetic_code  # noqa: E402
from pppmsg import read_schema  # noqa: E402
from prncode import read_code_table  # noqa: E402


@pytest.fixture(scope="session")
def schema():
    return read_schema()


@pytest.fixture(scope="session")
def codes():
    return read_code_table()


@pytest.fixture(scope="session")
def code_pair():
    return synthetic_code()


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)
