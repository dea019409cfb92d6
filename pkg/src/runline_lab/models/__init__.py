"""Probabilistic home-win classifiers sharing one fit/predict surface."""

from .ann import NeuralNetwork, ann_fit, gradient_check
from .base import ModelError, NotFittedError, PredictionSet, ProbClassifier
from .elo import elo_model_predict
from .gbdt import GradientBoostedTrees, gbdt_fit
from .homewin import HomeWin, homewin_predict
from .knn import KNearestNeighbors, knn_fit_predict
from .logr import LogisticRegression, logr_fit
from .search import GridSearchResult, expand_grid, grid_search
from .svm import SVM, svm_fit

FAMILIES = {
    "homewin": HomeWin,
    "logr": LogisticRegression,
    "knn": KNearestNeighbors,
    "svm": SVM,
    "gbdt": GradientBoostedTrees,
    "ann": NeuralNetwork,
}


def make_model(family: str, **hyperparameters) -> ProbClassifier:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ModelError(f"unknown model family {family!r}; choose from {sorted(FAMILIES) + ['elo']}") from None
    return cls(**hyperparameters)


__all__ = [
    "FAMILIES", "GradientBoostedTrees", "GridSearchResult", "HomeWin", "KNearestNeighbors", "LogisticRegression",
    "ModelError", "NeuralNetwork", "NotFittedError", "PredictionSet", "ProbClassifier", "SVM", "ann_fit",
    "elo_model_predict", "expand_grid", "gbdt_fit", "gradient_check", "grid_search", "homewin_predict",
    "knn_fit_predict", "logr_fit", "make_model", "svm_fit",
]
