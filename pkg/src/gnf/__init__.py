"""Genetic neuro-fuzzy toolkit.

Evaluate a Mamdani fuzzy system, distill it into a feedforward network by
backpropagation, and refine the network's weights with a genetic algorithm.
"""

from .estimators import FuzzyInferenceRegressor, GNFRegressor, NeuroFuzzyRegressor
from .fuzzy import FuzzySystem, builtin_tipper, infer
from .genetic import GAConfig, evolve
from .network import Dataset, Network, TrainConfig, forward, train_backprop
from .pipeline import PipelineConfig, SamplingPlan, run_pipeline
from .rulebase import ParseError, parse, serialize

__version__ = "0.1.0"

__all__ = [
    "FuzzyInferenceRegressor",
    "GNFRegressor",
    "NeuroFuzzyRegressor",
    "FuzzySystem",
    "builtin_tipper",
    "infer",
    "GAConfig",
    "evolve",
    "Dataset",
    "Network",
    "TrainConfig",
    "forward",
    "train_backprop",
    "PipelineConfig",
    "SamplingPlan",
    "run_pipeline",
    "ParseError",
    "parse",
    "serialize",
]
