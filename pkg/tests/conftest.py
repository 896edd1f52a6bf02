from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from nerdebias.corpus import read_conll
from nerdebias.tokenizer import load_vocab

DATA = Path(str(resources.files("nerdebias").joinpath("data")))
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def golden_dir():
    return GOLDEN


@pytest.fixture
def tiny_train():
    return read_conll(DATA / "tiny_train.conll")


@pytest.fixture
def tiny_test():
    return read_conll(DATA / "tiny_test.conll")


@pytest.fixture
def tiny_vocab():
    return load_vocab(DATA / "tiny_vocab.txt")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}")
