# pylint: disable=missing-function-docstring, redefined-outer-name
import pytest

from relaxgap.Corpus import load_example
from relaxgap.Problem import Problem, problem_from_dict
from relaxgap.tests.documents import problem_document


@pytest.fixture
def make_problem():
    def factory(**overrides) -> Problem:
        return problem_from_dict(problem_document(**overrides))

    return factory


@pytest.fixture(scope="module")
def example1() -> Problem:
    return load_example("example1")


@pytest.fixture(scope="module")
def convex_steer() -> Problem:
    return load_example("convex_steer")


@pytest.fixture(scope="module")
def terminal_linear() -> Problem:
    return load_example("terminal_linear")


@pytest.fixture(scope="module")
def zero_problem() -> Problem:
    return load_example("zero")


@pytest.fixture(scope="module")
def tangential_disk() -> Problem:
    return load_example("tangential_disk")
