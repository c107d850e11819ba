"""Problem documents shared by the tests."""
import copy

UNIT_BOX = {"kind": "box", "lower": [-2.0], "upper": [2.0], "bounding_box": {"lower": [-2.0], "upper": [2.0]}}

BASE_DOCUMENT = {
    "name": "base",
    "n": 1,
    "m": 1,
    "T": 1.0,
    "x0": [0.0],
    "f": ["u1"],
    "lagrangian": "(u1^2-1)^2 + x1^2",
    "terminal_cost": "0",
    "omega": UNIT_BOX,
    "target": UNIT_BOX,
    "controls": {"lower": [-1.0], "upper": [1.0]},
}


def problem_document(**overrides) -> dict:
    """The double-well document with some top-level fields replaced."""
    document = copy.deepcopy(BASE_DOCUMENT)
    document.update(copy.deepcopy(overrides))
    return document


def box_region(lower, upper, bounding_lower=None, bounding_upper=None) -> dict:
    return {
        "kind": "box",
        "lower": list(lower),
        "upper": list(upper),
        "bounding_box": {
            "lower": list(lower if bounding_lower is None else bounding_lower),
            "upper": list(upper if bounding_upper is None else bounding_upper),
        },
    }


def implicit_region(h: str, bounding_lower, bounding_upper) -> dict:
    return {"kind": "implicit", "h": h, "bounding_box": {"lower": list(bounding_lower), "upper": list(bounding_upper)}}
