# pylint: disable=missing-function-docstring, redefined-outer-name, line-too-long
import json

import numpy as np
import pytest

from relaxgap.Corpus import list_examples
from relaxgap.Problem import (
    ClassicalControl,
    YoungMeasureControl,
    load_control,
    load_problem,
    load_young_measure,
    problem_from_dict,
    region_contains,
    same_region,
    shrink_region,
)
from relaxgap.relaxation_errors import InputError, ProblemInvariantError, ProblemSchemaError
from relaxgap.tests.documents import box_region, implicit_region, problem_document


@pytest.fixture(scope="module")
def parabola_region():
    p = problem_from_dict(
        problem_document(omega=implicit_region("1 - x1^2", [-2.0], [2.0]), target=implicit_region("1 - x1^2", [-2.0], [2.0]))
    )
    return p.omega


def test_load_example1(example1):
    assert example1.name == "example1"
    assert (example1.n, example1.m, example1.T) == (1, 1, 1.0)
    assert example1.omega.kind == "box"
    assert np.array_equal(example1.controls.lower, [-1.0])


def test_horizon_must_be_positive(make_problem):
    with pytest.raises(ProblemInvariantError) as error:
        make_problem(T=0.0)
    assert error.value.check == "T > 0"
    assert "T > 0" in str(error.value)


def test_x0_must_lie_in_omega(make_problem):
    with pytest.raises(ProblemInvariantError) as error:
        make_problem(x0=[3.0])
    assert error.value.check == "x0 ∈ Ω"


def test_lowercase_horizon_key():
    document = problem_document()
    document["t"] = document.pop("T")
    assert problem_from_dict(document).T == 1.0


def test_missing_field_is_reported_by_path():
    document = problem_document()
    del document["lagrangian"]
    with pytest.raises(ProblemSchemaError) as error:
        problem_from_dict(document)
    assert error.value.field_path == "lagrangian"


def test_unknown_field_is_rejected():
    with pytest.raises(ProblemSchemaError):
        problem_from_dict(problem_document(horizon_units="s"))


def test_nested_field_path():
    with pytest.raises(ProblemSchemaError) as error:
        problem_from_dict(problem_document(omega={"kind": "sphere", "bounding_box": {"lower": [-1], "upper": [1]}}))
    assert error.value.field_path.startswith("omega")


def test_dynamics_length_must_match_n(make_problem):
    with pytest.raises(ProblemSchemaError) as error:
        make_problem(f=["u1", "u1"])
    assert error.value.field_path == "f"


def test_bad_expression_names_its_field(make_problem):
    with pytest.raises(ProblemSchemaError) as error:
        make_problem(f=["u1 +"])
    assert error.value.field_path == "f.0"
    with pytest.raises(ProblemSchemaError) as error:
        make_problem(lagrangian="x2^2")
    assert error.value.field_path == "lagrangian"


def test_terminal_cost_may_not_use_controls(make_problem):
    with pytest.raises(ProblemSchemaError) as error:
        make_problem(terminal_cost="u1")
    assert error.value.field_path == "terminal_cost"


def test_flat_bounding_box_is_rejected(make_problem):
    with pytest.raises(ProblemInvariantError):
        make_problem(omega=box_region([-2.0], [2.0], [-2.0], [-2.0]))


def test_nonfinite_lagrangian_is_rejected(make_problem):
    with pytest.raises(ProblemInvariantError) as error:
        make_problem(lagrangian="sqrt(x1)")
    assert error.value.check == "f and L finite on samples"


def test_region_contains_examples(parabola_region, example1):
    assert region_contains(parabola_region, [0.0], "open")
    assert not region_contains(parabola_region, [1.0], "open")
    assert region_contains(parabola_region, [1.0], "closed")
    assert not region_contains(example1.omega, [3.0], "open")
    assert not region_contains(example1.omega, [3.0], "closed")
    assert region_contains(example1.omega, [2.0], "closed")
    assert not region_contains(example1.omega, [2.0], "open")


def test_region_contains_checks_dimension(example1):
    with pytest.raises(ValueError):
        region_contains(example1.omega, [0.0, 0.0])


def test_open_membership_implies_closed():
    rng = np.random.default_rng(0)
    for example in list_examples(include_slots=False):
        p = example.load()
        for region in (p.omega, p.target):
            box = region.bounding_box
            points = rng.uniform(box.lower - 0.5, box.upper + 0.5, size=(10_000, p.n))
            inside_open = region.contains(points, "open")
            inside_closed = region.contains(points, "closed")
            assert not np.any(inside_open & ~inside_closed), example.name


def test_every_corpus_file_loads():
    for example in list_examples(include_slots=False):
        assert example.load().name == example.name


def test_shrink_region(example1, parabola_region):
    shrunk = shrink_region(example1.omega, 0.5)
    assert np.array_equal(shrunk.lower, [-1.5])
    assert np.array_equal(shrunk.upper, [1.5])
    assert np.array_equal(shrunk.bounding_box.lower, example1.omega.bounding_box.lower)
    shrunk = shrink_region(parabola_region, 0.19)
    assert region_contains(shrunk, [0.8999999])
    assert not region_contains(shrunk, [0.9000001])


def test_same_region(example1, parabola_region):
    assert same_region(example1.omega, example1.target)
    assert not same_region(example1.omega, parabola_region)
    assert not same_region(example1.omega, shrink_region(example1.omega, 0.1))


def test_problem_document_round_trip(example1):
    again = problem_from_dict(example1.to_dict())
    assert again.f == example1.f
    assert again.L == example1.L
    assert same_region(again.omega, example1.omega)


def test_autonomy(example1, make_problem):
    assert example1.is_autonomous()
    assert not make_problem(f=["u1 + t"]).is_autonomous()
    assert not make_problem(lagrangian="t*u1^2").is_autonomous()
    assert make_problem(lagrangian="t*u1^2").is_autonomous(include_lagrangian=False)


def test_classical_control_values():
    c = ClassicalControl([0.0, 0.5, 1.0], [1.0, -1.0])
    assert c.values.shape == (2, 1)
    assert c.value_at(np.array([0.25, 0.5, 1.0]))[:, 0].tolist() == [1.0, -1.0, -1.0]
    assert ClassicalControl.constant(2.0, 0.3, intervals=4).intervals == 4


def test_classical_control_grid_must_increase():
    with pytest.raises(ProblemInvariantError):
        ClassicalControl([0.0, 0.5, 0.5], [1.0, -1.0])


def test_young_measure_weights():
    with pytest.raises(ProblemInvariantError) as error:
        YoungMeasureControl([0.0, 1.0], [[1.0], [-1.0]], [[0.5, 0.6]])
    assert error.value.check == "weight rows sum to 1"
    with pytest.raises(ProblemInvariantError):
        YoungMeasureControl([0.0, 1.0], [[1.0], [-1.0]], [[1.5, -0.5]])
    with pytest.raises(ProblemSchemaError):
        YoungMeasureControl([0.0, 1.0], [[1.0], [-1.0]], [[1.0]])


def test_dirac_young_measure():
    c = ClassicalControl([0.0, 0.5, 1.0], [1.0, -1.0])
    y = YoungMeasureControl.dirac(c)
    assert np.array_equal(y.weights, np.eye(2))
    assert np.array_equal(y.atoms, c.values)


def test_load_corpus_young_measure(example1):
    example = next(e for e in list_examples() if e.name == "example1")
    y = load_young_measure(example1, example.young_measure_path)
    assert y.atoms[:, 0].tolist() == [1.0, -1.0]
    assert y.weights.tolist() == [[0.5, 0.5]]


def test_load_control_formats(example1, tmp_path):
    classical = tmp_path / "classical.json"
    classical.write_text(json.dumps({"control": {"time_grid": [0.0, 1.0], "values": [[0.5]]}}))
    assert isinstance(load_control(example1, str(classical)), ClassicalControl)

    young = tmp_path / "young.json"
    young.write_text(json.dumps({"time_grid": [0.0, 1.0], "atoms": [[1.0], [-1.0]], "weights": [[0.5, 0.5]]}))
    assert isinstance(load_control(example1, str(young)), YoungMeasureControl)


def test_control_file_invariants(example1, tmp_path):
    outside = tmp_path / "outside.json"
    outside.write_text(json.dumps({"time_grid": [0.0, 1.0], "values": [[2.0]]}))
    with pytest.raises(ProblemInvariantError):
        load_control(example1, str(outside))

    short = tmp_path / "short.json"
    short.write_text(json.dumps({"time_grid": [0.0, 0.5], "values": [[0.0]]}))
    with pytest.raises(ProblemInvariantError):
        load_control(example1, str(short))


def test_invalid_json_is_an_input_error(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(InputError):
        load_problem(str(broken))


def test_missing_problem_file():
    with pytest.raises(FileNotFoundError):
        load_problem("no_such_problem.json")
