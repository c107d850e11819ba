"""
The bundled example problems and the values they are expected to produce.
"""
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from relaxgap.OccupationMeasure import GridSpec
from relaxgap.Problem import Problem, YoungMeasureControl, load_problem, load_young_measure
from relaxgap.relaxation_errors import InputError

CORPUS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus")
INDEX_FILE = "index.yaml"


@dataclass(frozen=True)
class ExampleDescriptor:
    name: str
    # None for an empty slot
    path: Optional[str]
    description: str
    expected_value: Optional[float]
    tolerance: Optional[float]
    provenance: str
    grid: Optional[GridSpec] = None
    classical_k: Optional[int] = None
    young_measure_path: Optional[str] = None
    expectations: dict[str, Any] = field(default_factory=dict)

    @property
    def is_slot(self) -> bool:
        return self.path is None

    def load(self) -> Problem:
        if self.path is None:
            raise InputError(f"'{self.name}' is an empty slot; put a problem file next to {INDEX_FILE} first")
        return load_problem(self.path)

    def load_young_measure(self, p: Problem) -> Optional[YoungMeasureControl]:
        return None if self.young_measure_path is None else load_young_measure(p, self.young_measure_path)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "path": self.path,
            "description": self.description,
            "expected_value": self.expected_value,
            "tolerance": self.tolerance,
            "provenance": self.provenance,
            "grid": None if self.grid is None else self.grid.to_dict(),
            "classical_k": self.classical_k,
            "expectations": dict(self.expectations),
        }


def _corpus_file(name: Optional[str]) -> Optional[str]:
    return None if name is None else os.path.join(CORPUS_DIR, name)


def _descriptor(entry: dict) -> ExampleDescriptor:
    grid = entry.get("grid")
    expected = entry.get("expected_value")
    tolerance = entry.get("tolerance")
    return ExampleDescriptor(
        name=entry["name"],
        path=_corpus_file(entry.get("file")),
        description=entry.get("description", ""),
        expected_value=None if expected is None else float(expected),
        tolerance=None if tolerance is None else float(tolerance),
        provenance=entry["provenance"],
        grid=None if grid is None else GridSpec(**grid),
        classical_k=entry.get("classical_k"),
        young_measure_path=_corpus_file(entry.get("young_measure")),
        expectations=dict(entry.get("expectations") or {}),
    )


def list_examples(include_slots: bool = True) -> list[ExampleDescriptor]:
    """The bundled problems in index order. Empty slots come back with path None unless include_slots is False."""
    with open(os.path.join(CORPUS_DIR, INDEX_FILE), "r", encoding="utf-8") as file:
        index: dict = yaml.safe_load(file)
    examples = [_descriptor(entry) for entry in index["examples"]]
    return [e for e in examples if include_slots or not e.is_slot]


def get_example(name: str) -> ExampleDescriptor:
    for example in list_examples():
        if example.name == name:
            return example
    raise InputError(f"No bundled example named '{name}'")


def load_example(name: str) -> Problem:
    return get_example(name).load()
