from __future__ import annotations

import numpy as np

from ..data import Dataset
from ..features import FeatureMatrix
from .base import PredictionSet, ProbClassifier


class HomeWin(ProbClassifier):
    """Baseline that always picks the home team with certainty."""

    name = "homewin"

    def __init__(self):
        super().__init__()
        self.fitted = True

    def fit(self, train: FeatureMatrix) -> "HomeWin":
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.ones(len(X))


def homewin_predict(games: Dataset) -> PredictionSet:
    f = games.frame
    return PredictionSet(
        HomeWin.name,
        tuple(f["game_id"]),
        np.ones(len(f)),
        f["home_win"].to_numpy(),
        f["score_diff"].to_numpy(),
    )
