import os

import pytest

from bubbles import blowupTime
from limits import estimateProfile
from structure_data import getCorpus, readDensityFile

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


@pytest.fixture(scope="session")
def corpus():
    """Every density under data/, keyed by file stem."""
    lstModels = [readDensityFile(path) for path in getCorpus(DATA_DIR)]
    return {model.name: model for model in lstModels}


@pytest.fixture(scope="session")
def profiles(corpus):
    return {name: estimateProfile(model) for name, model in corpus.items()}


@pytest.fixture(scope="session")
def blowups(corpus, profiles):
    return {name: blowupTime(model, profiles[name]) for name, model in corpus.items()}


@pytest.fixture(scope="session")
def sqrtShift(corpus):
    return corpus["sqrt_shift"]


@pytest.fixture(scope="session")
def absExp(corpus):
    return corpus["abs_exp"]


@pytest.fixture(scope="session")
def borell(corpus):
    return corpus["borell"]


@pytest.fixture(scope="session")
def arctan(corpus):
    return corpus["arctan"]


@pytest.fixture
def densityFile(tmp_path):
    """Write a throwaway density file and return its path."""

    def write(text, name="scratch"):
        path = tmp_path / (name + ".density")
        path.write_text(text, encoding="UTF-8")
        return str(path)

    return write
