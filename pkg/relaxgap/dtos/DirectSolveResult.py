from relaxgap.Problem import ClassicalControl


class DirectSolveResult:
    """
    The best piecewise-constant control found by the direct solver. best_cost
    is the unpenalised total cost; penalty_at_best is the unweighted squared
    constraint violation of that control.
    """

    def __init__(
        self,
        best_control: ClassicalControl,
        best_cost: float,
        penalty_at_best: float,
        starts: int,
        seed: int,
        mode: str,
        feasible: bool,
    ) -> None:
        self.best_control: ClassicalControl = best_control
        self.best_cost: float = best_cost
        self.penalty_at_best: float = penalty_at_best
        self.starts: int = starts
        self.seed: int = seed
        self.mode: str = mode
        self.feasible: bool = feasible

    @property
    def K(self) -> int:
        return self.best_control.intervals

    def to_dict(self) -> dict:
        return {
            "best_cost": self.best_cost,
            "penalty": self.penalty_at_best,
            "feasible": self.feasible,
            "K": self.K,
            "starts": self.starts,
            "seed": self.seed,
            "mode": self.mode,
            "control": self.best_control.to_dict(),
        }
