from relaxgap.Problem import ClassicalControl


class ChatteringReport:
    """
    How far the chattered classical control strays from the Young measure it
    realises: state_error is the largest node-wise state deviation,
    cost_error the deviation of the running cost at T.
    """

    def __init__(
        self,
        control: ClassicalControl,
        N: int,
        dt: float,
        state_error: float,
        cost_error: float,
        frame_length: float,
        young_cost: float,
        chattered_cost: float,
        horizon: float,
    ) -> None:
        self.control: ClassicalControl = control
        self.N: int = N
        self.dt: float = dt
        self.state_error: float = state_error
        self.cost_error: float = cost_error
        self.frame_length: float = frame_length
        self.young_cost: float = young_cost
        self.chattered_cost: float = chattered_cost
        # stateErr / (ν (1 + T)), an empirical look at the constant of the
        # linear-in-ν estimate; it doesn't bound that constant
        self.empirical_ratio: float = state_error / (frame_length * (1.0 + horizon))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "dt": self.dt,
            "state_error": self.state_error,
            "cost_error": self.cost_error,
            "frame_length": self.frame_length,
            "empirical_ratio": self.empirical_ratio,
            "young_cost": self.young_cost,
            "chattered_cost": self.chattered_cost,
            "control": self.control.to_dict(),
        }
