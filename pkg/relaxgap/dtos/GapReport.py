from typing import Any, Optional


class GapRung:
    """
    One ε of the ladder. upper_shrunk over-estimates the relaxed infimum on
    the shrunk sets (a direct-method cost); lower_full is the uncertified LP
    estimate on the closed sets. A rung that failed keeps its error.
    """

    def __init__(
        self,
        epsilon: float,
        mode: str,
        upper_shrunk: Optional[float] = None,
        lower_full: Optional[float] = None,
        penalty: Optional[float] = None,
        feasible: Optional[bool] = None,
        x0_inside: Optional[bool] = None,
        error: Optional[str] = None,
    ) -> None:
        self.epsilon: float = epsilon
        self.mode: str = mode
        self.upper_shrunk: Optional[float] = upper_shrunk
        self.lower_full: Optional[float] = lower_full
        self.penalty: Optional[float] = penalty
        self.feasible: Optional[bool] = feasible
        self.x0_inside: Optional[bool] = x0_inside
        self.error: Optional[str] = error

    @property
    def valid(self) -> bool:
        return self.error is None and self.upper_shrunk is not None

    @property
    def gap_bound_estimate(self) -> Optional[float]:
        if not self.valid or self.lower_full is None:
            return None
        return self.upper_shrunk - self.lower_full

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "mode": self.mode,
            "upper_shrunk": self.upper_shrunk,
            "lower_full": self.lower_full,
            "gap_bound_estimate": self.gap_bound_estimate,
            "penalty": self.penalty,
            "feasible": self.feasible,
            "x0_inside": self.x0_inside,
            "valid": self.valid,
            "error": self.error,
        }


class GapReport:
    """
    Estimates of the relaxation-gap bound along a decreasing ε ladder,
    with the caveats that say which side each number errs on.
    """

    def __init__(
        self,
        epsilon_ladder: list[float],
        rungs: list[GapRung],
        lower_full: float,
        caveats: list[str],
        settings: dict[str, Any],
        stability: Optional[dict[str, float]] = None,
    ) -> None:
        self.epsilon_ladder: list[float] = epsilon_ladder
        self.rungs: list[GapRung] = rungs
        self.lower_full: float = lower_full
        self.caveats: list[str] = caveats
        self.settings: dict[str, Any] = settings
        self.stability: Optional[dict[str, float]] = stability

    def rung(self, epsilon: float) -> GapRung:
        for rung in self.rungs:
            if rung.epsilon == epsilon:
                return rung
        raise KeyError(epsilon)

    def to_dict(self) -> dict:
        return {
            "epsilon_ladder": self.epsilon_ladder,
            "per_eps": [rung.to_dict() for rung in self.rungs],
            "lower_full": self.lower_full,
            "caveats": self.caveats,
            "settings": self.settings,
            "stability": self.stability,
        }
