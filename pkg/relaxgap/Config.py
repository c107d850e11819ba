import os
from functools import lru_cache
from typing import Optional

import yaml

CONFIG_ENV_VAR = "RELAXGAP_CONFIG"
REPOSITORY_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config.yaml")


def find_config_file(path: Optional[str] = None) -> str:
    """
    Resolves which config.yaml to read: an explicit path, then $RELAXGAP_CONFIG,
    then ./config.yaml, then the one at the repository root.
    """
    candidates = [path, os.environ.get(CONFIG_ENV_VAR), "config.yaml", REPOSITORY_CONFIG]
    for candidate in candidates:
        if candidate and os.path.isfile(candidate):
            return candidate
    raise FileNotFoundError(f"No config file found (looked at: {', '.join(c for c in candidates if c)})")


class Config:
    """
    A simple class for storing and loading config.yaml
    """

    def __init__(self, path: Optional[str] = None):
        """
        Load config.yaml and parse it into the class fields
        """
        self.path: str = find_config_file(path)
        with open(self.path, "r", encoding="utf-8") as file:
            loaded_file: dict = yaml.safe_load(file)

        # integration
        self.default_steps: int = int(loaded_file["default_steps"])

        # occupation-measure LP
        self.grid_nt: int = int(loaded_file["grid_nt"])
        self.grid_nx: int = int(loaded_file["grid_nx"])
        self.grid_nu: int = int(loaded_file["grid_nu"])
        self.test_degree: int = int(loaded_file["test_degree"])
        self.lp_tolerance: float = float(loaded_file["lp_tolerance"])

        # direct solver
        self.classical_k: int = int(loaded_file["classical_k"])
        self.classical_starts: int = int(loaded_file["classical_starts"])
        self.penalty_weight: float = float(loaded_file["penalty_weight"])
        self.min_step: float = float(loaded_file["min_step"])
        self.optimization_steps: int = int(loaded_file["optimization_steps"])
        self.max_polls: int = int(loaded_file["max_polls"])
        self.stall_polls: int = int(loaded_file["stall_polls"])
        self.stall_tolerance: float = float(loaded_file["stall_tolerance"])
        self.exchange_pairs: int = int(loaded_file["exchange_pairs"])
        self.open_margin: float = float(loaded_file["open_margin"])
        self.feasibility_tolerance: float = float(loaded_file["feasibility_tolerance"])

        # condition checkers
        self.condition_samples: int = int(loaded_file["condition_samples"])
        self.boundary_samples: int = int(loaded_file["boundary_samples"])
        self.ipc_eta: float = float(loaded_file["ipc_eta"])
        self.u_grid_points: int = int(loaded_file["u_grid_points"])
        self.max_u_grid: int = int(loaded_file["max_u_grid"])
        self.fw2_scales: list[float] = [float(s) for s in loaded_file["fw2_scales"]]
        self.fw2_divergence_factor: float = float(loaded_file["fw2_divergence_factor"])
        self.h1_probes: int = int(loaded_file["h1_probes"])
        self.h1_quadrature_nodes: int = int(loaded_file["h1_quadrature_nodes"])
        self.v4_probes: int = int(loaded_file["v4_probes"])
        self.v4_bins: int = int(loaded_file["v4_bins"])
        self.v4_tolerance: float = float(loaded_file["v4_tolerance"])
        self.fd_step: float = float(loaded_file["fd_step"])

        # gap bound
        self.gap_ladder: list[float] = [float(e) for e in loaded_file["gap_ladder"]]
        self.stability_delta: float = float(loaded_file["stability_delta"])

        # logging
        self.log_level: str = str(loaded_file["log_level"])
        self.log_to_file: bool = bool(loaded_file["log_to_file"])
        self.log_folder: str = str(loaded_file["log_folder"])


@lru_cache(maxsize=1)
def default_config() -> Config:
    """The config used when a library call doesn't pass explicit settings."""
    return Config()
