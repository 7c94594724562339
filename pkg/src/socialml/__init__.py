"""Social machine learning: debiased local classifiers that cooperate over a graph.

Agents train bounded classifiers on their own views, subtract their mean
training output, and combine the resulting statistics through a
left-stochastic combination matrix, either over a stream of observations or
by consensus on a single one. The :mod:`socialml.theory` module evaluates
the accompanying error and sample-size bounds.
"""

from .adaboost import BoostEnsemble, adaboost_predict, train_adaboost
from .datagen import GaussianSource, NetworkDataModel, heterogeneous_preset, scalar_source
from .estimators import DebiasedClassifier, MultiViewAdaBoost, SocialMachineLearning
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DivergedTrainingError,
    InvalidInputError,
    InvalidTopologyError,
    MarginTooLargeError,
    NumericalError,
    OutOfRegimeError,
    PreconditionError,
    SMLError,
    UnsupportedLossError,
)
from .losses import LossSpec, make_loss, verify_assumption1
from .network import CombinationMatrix, build_uniform_averaging, check_strong_connectivity, spectral_analysis
from .prediction import consensus_single_sample, run_statistical_classification, social_learning
from .training import BoundedModel, TrainedAgent, TrainHyper, TrainingSet, train_erm

__version__ = "0.1.0"

__all__ = [
    "BoostEnsemble",
    "adaboost_predict",
    "train_adaboost",
    "GaussianSource",
    "NetworkDataModel",
    "heterogeneous_preset",
    "scalar_source",
    "DebiasedClassifier",
    "MultiViewAdaBoost",
    "SocialMachineLearning",
    "ConfigError",
    "ConvergenceError",
    "DivergedTrainingError",
    "InvalidInputError",
    "InvalidTopologyError",
    "MarginTooLargeError",
    "NumericalError",
    "OutOfRegimeError",
    "PreconditionError",
    "SMLError",
    "UnsupportedLossError",
    "LossSpec",
    "make_loss",
    "verify_assumption1",
    "CombinationMatrix",
    "build_uniform_averaging",
    "check_strong_connectivity",
    "spectral_analysis",
    "consensus_single_sample",
    "run_statistical_classification",
    "social_learning",
    "BoundedModel",
    "TrainedAgent",
    "TrainHyper",
    "TrainingSet",
    "train_erm",
]
