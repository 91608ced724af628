import numpy as np
import pytest

from fieldforge.exact import EnumerableSpace
from fieldforge.model import EmpiricalDistribution, FieldModel
from fieldforge.patterns import pattern

# filled by test_acceptance.report(); echoed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)


@pytest.fixture
def ab_space():
    return EnumerableSpace("ab", 4)


@pytest.fixture
def toy_corpus():
    return EmpiricalDistribution({"ab": 3, "aab": 2, "b": 1, "bba": 1, "abab": 2})


@pytest.fixture
def toy_model(toy_corpus):
    feats = (pattern("a"), pattern("ab"), pattern("b<*>"))
    return FieldModel(feats, np.zeros(3), toy_corpus.length_distribution(4), "ab")
