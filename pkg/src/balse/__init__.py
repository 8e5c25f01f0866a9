"""Blended ALS + LASSO recommender with a popularity gate and tag explanations."""
from .als import AlsHyperParams, AlsModel, predict_als, train_als
from .dataset import RatingDataset, TagMatrix, map_label, parse_ratings, parse_tags
from .evaluation import CohortReport, ExperimentConfig, make_split, run_experiment
from .gate import BlendSet, GateParams, blend, gate_gradient, gate_loss, train_gate
from .lasso import LassoHyperParams, LassoModel, clamp_tau, predict_lasso, train_lasso
from .synth import SynthConfig, generate

__all__ = [
    "AlsHyperParams", "AlsModel", "predict_als", "train_als",
    "RatingDataset", "TagMatrix", "map_label", "parse_ratings", "parse_tags",
    "CohortReport", "ExperimentConfig", "make_split", "run_experiment",
    "BlendSet", "GateParams", "blend", "gate_gradient", "gate_loss", "train_gate",
    "LassoHyperParams", "LassoModel", "clamp_tau", "predict_lasso", "train_lasso",
    "SynthConfig", "generate",
]
