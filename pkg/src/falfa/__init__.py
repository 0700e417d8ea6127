"""Fast adversarial label-flipping attacks against neural-network classifiers."""
from .attacks import AttackBudget, AttackResult, FalfaConfig, falfa, sln
from .data import DataError, Dataset, DatasetConfig, prepare
from .lp import BACKEND, build_lp, solve_simplex
from .model import MlpModel, TrainConfig, init_model, train

__version__ = "0.1.0"

__all__ = ["AttackBudget", "AttackResult", "FalfaConfig", "falfa", "sln", "DataError",
           "Dataset", "DatasetConfig", "prepare", "BACKEND", "build_lp", "solve_simplex",
           "MlpModel", "TrainConfig", "init_model", "train", "__version__"]
