from .model import IlpModel, ModelError, UserConstraint, build_model
from .lpio import export_lp
from .solve import Labeling, solve
from .validate import recompute_objective, validate

__all__ = [
    "IlpModel", "ModelError", "UserConstraint", "build_model",
    "export_lp", "Labeling", "solve", "validate", "recompute_objective",
]
