"""Rate certification and convex synthesis of first-order algorithms and extremum controllers."""
from .analysis import (
    AlgorithmRealization, FunctionClass, RateCertificate, bisect_rate, catalog, certify, fixed_point,
    structure_check,
)
from .config import RunConfig, default_config
from .multipliers import ZamesFalbParams
from .sysops import GeneralizedPlant, StateSpace
from .synthesis import optimal_rate, pick_feasible, synthesize

__version__ = "0.1.0"

__all__ = [
    "AlgorithmRealization", "FunctionClass", "GeneralizedPlant", "RateCertificate", "RunConfig", "StateSpace",
    "ZamesFalbParams", "bisect_rate", "catalog", "certify", "default_config", "fixed_point", "optimal_rate",
    "pick_feasible", "structure_check", "synthesize",
]
