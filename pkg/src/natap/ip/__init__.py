"""Binary linear programming: model container, LP relaxation, branch-and-bound."""

from .bnb import BnbParams, IpResult, IpStatus, solve_bnb
from .model import Constraint, Model, ModelError
from .simplex import HighsEngine, LpResult, LpStatus, NumericalError, SimplexEngine, solve_lp_relaxation

__all__ = [
    "BnbParams", "IpResult", "IpStatus", "solve_bnb",
    "Constraint", "Model", "ModelError",
    "HighsEngine", "LpResult", "LpStatus", "NumericalError", "SimplexEngine", "solve_lp_relaxation",
]
