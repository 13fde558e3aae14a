"""Power-minimising resource allocation for a jammed, surface-aided UAV ISAC network."""
from .ao import AoOptions, AoRecord, AoTrace, run_rhosi, verify_monotone
from .metrics import Solution, check_feasibility, network_objective
from .scenario import ScenarioConfig, default_scenario, load_scenario, validate_scenario

__all__ = [
    "AoOptions", "AoRecord", "AoTrace", "ScenarioConfig", "Solution", "check_feasibility", "default_scenario",
    "load_scenario", "network_objective", "run_rhosi", "validate_scenario", "verify_monotone",
]
__version__ = "0.1.0"
