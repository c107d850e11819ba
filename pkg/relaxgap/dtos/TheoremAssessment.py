from typing import Any


class TheoremAssessment:
    """
    Which no-gap results have their hypotheses satisfied on samples, given a
    set of condition reports. A result whose hypotheses weren't all checked
    is reported as undecided rather than failed.
    """

    def __init__(self, results: list[dict[str, Any]], target_equals_domain: bool, notes: list[str]) -> None:
        self.results: list[dict[str, Any]] = results
        self.target_equals_domain: bool = target_equals_domain
        self.notes: list[str] = notes

    def status(self, name: str) -> str:
        for result in self.results:
            if result["name"] == name:
                return result["status"]
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "results": self.results,
            "target_equals_domain": self.target_equals_domain,
            "notes": self.notes,
        }
