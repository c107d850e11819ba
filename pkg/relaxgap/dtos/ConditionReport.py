from typing import Any, Optional

SATISFIED = "satisfied-on-samples"
VIOLATED = "violated"
NOT_APPLICABLE = "not-applicable"


class ConditionReport:
    """
    The verdict of one sampled condition check. A violated verdict always
    carries witnesses; satisfied-on-samples means no sample falsified the
    condition, which is not a proof.
    """

    def __init__(
        self,
        condition: str,
        verdict: str,
        samples: int,
        seed: int,
        witnesses: Optional[list[dict[str, Any]]] = None,
        constants: Optional[dict[str, float]] = None,
        notes: Optional[list[str]] = None,
        facts: Optional[dict[str, Any]] = None,
    ) -> None:
        if verdict == VIOLATED and not witnesses:
            raise ValueError(f"A violated {condition} report needs at least one witness")
        self.condition: str = condition
        self.verdict: str = verdict
        self.samples: int = samples
        self.seed: int = seed
        self.witnesses: list[dict[str, Any]] = witnesses or []
        self.constants: dict[str, float] = constants or {}
        self.notes: list[str] = notes or []
        # side observations reported along with the verdict (V1, V2, V3, V5 inside V4)
        self.facts: dict[str, Any] = facts or {}

    @property
    def satisfied(self) -> bool:
        return self.verdict == SATISFIED

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "constants": self.constants,
            "witnesses": self.witnesses,
            "samples": self.samples,
            "seed": self.seed,
            "notes": self.notes,
            "facts": self.facts,
        }
