# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import os

import pytest

from relaxgap.ClassicalSolver import solve_classical
from relaxgap.Corpus import CORPUS_DIR, get_example, list_examples, load_example
from relaxgap.OccupationMeasure import GridSpec, solve_occupation
from relaxgap.relaxation_errors import InputError


def test_index_lists_every_example():
    names = [e.name for e in list_examples()]
    assert names == ["example1", "convex_steer", "zero", "tangential_disk", "terminal_linear", "gap_candidate"]
    assert "gap_candidate" not in [e.name for e in list_examples(include_slots=False)]


def test_descriptors_point_at_bundled_files():
    for example in list_examples(include_slots=False):
        assert os.path.dirname(example.path) == CORPUS_DIR
        assert os.path.isfile(example.path)
        assert isinstance(example.grid, GridSpec)
        assert example.provenance in ("published", "derived", "trivial")
        assert example.tolerance == 0.05


def test_empty_slot():
    slot = get_example("gap_candidate")
    assert slot.is_slot
    assert slot.expected_value is None
    assert slot.provenance == "user-supplied"
    with pytest.raises(InputError):
        slot.load()
    assert slot.to_dict()["grid"] is None


def test_unknown_example():
    with pytest.raises(InputError):
        get_example("no_such_example")


def test_young_measure_only_where_bundled(example1, convex_steer):
    assert get_example("example1").load_young_measure(example1) is not None
    assert get_example("convex_steer").load_young_measure(convex_steer) is None


def test_expectations_are_pinned():
    assert get_example("example1").expectations["v4"] == "violated"
    assert get_example("tangential_disk").expectations["ipc"] == "violated"


def test_descriptor_document():
    document = get_example("convex_steer").to_dict()
    assert document["expected_value"] == 0.81
    assert document["grid"] == {"nt": 20, "nx": 40, "nu": 21, "degree": 4}
    assert document["classical_k"] == 20


def test_load_example_by_name():
    assert load_example("terminal_linear").name == "terminal_linear"


@pytest.mark.slow
@pytest.mark.parametrize("name", ["example1", "convex_steer", "zero"])
def test_relaxed_value_matches_the_expected_value(name):
    example = get_example(name)
    objective = solve_occupation(example.load(), example.grid).objective
    assert objective == pytest.approx(example.expected_value, abs=example.tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["convex_steer", "zero", "tangential_disk", "terminal_linear"])
def test_classical_value_matches_the_expected_value(name):
    example = get_example(name)
    result = solve_classical(example.load(), K=example.classical_k, starts=2, seed=0)
    assert result.feasible
    assert result.best_cost == pytest.approx(example.expected_value, abs=example.tolerance)
