"""Accuracy, AUROC, log-loss and Brier score of a set of home-win probabilities."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .predictions import PredictionSet

DEFAULT_THRESHOLD = 0.5
DEFAULT_EPSILON = 1e-15


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    n_games: int
    accuracy: float
    auroc: float
    log_loss: float
    brier: float
    threshold: float = DEFAULT_THRESHOLD


def _nonempty(preds: PredictionSet) -> None:
    if len(preds) == 0:
        raise MetricsError(f"{preds.model_name}: empty prediction set")


def accuracy(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Share of games where ``p_home >= threshold`` agrees with the outcome."""
    _nonempty(preds)
    return float(np.mean((preds.p_home >= threshold) == preds.label))


def auroc(preds: PredictionSet) -> float:
    """Mann-Whitney estimate of P(score of a home win > score of a home loss), ties counted 1/2."""
    _nonempty(preds)
    y = preds.label
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError(f"{preds.model_name}: AUROC needs both outcomes present")
    ranks = rankdata(preds.p_home, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def log_loss(preds: PredictionSet, epsilon: float = DEFAULT_EPSILON) -> float:
    _nonempty(preds)
    # clamp the probability given to the observed outcome; clamping p and then
    # taking 1 - p is not symmetric in floating point (1 - 1e-15 is inexact)
    q = np.where(preds.label, preds.p_home, 1.0 - preds.p_home)
    return float(-np.mean(np.log(np.clip(q, epsilon, 1.0 - epsilon))))


def brier(preds: PredictionSet) -> float:
    _nonempty(preds)
    return float(np.mean((preds.p_home - preds.label) ** 2))


def report(preds: PredictionSet, threshold: float = DEFAULT_THRESHOLD, epsilon: float = DEFAULT_EPSILON) -> MetricsReport:
    return MetricsReport(
        model_name=preds.model_name,
        n_games=len(preds),
        accuracy=accuracy(preds, threshold),
        auroc=auroc(preds),
        log_loss=log_loss(preds, epsilon),
        brier=brier(preds),
        threshold=threshold,
    )


REPORT_COLUMNS = ["model", "n_games", "accuracy", "auroc", "log_loss", "brier"]


def reports_frame(reports: Iterable[MetricsReport]) -> pd.DataFrame:
    rows = [
        {"model": r.model_name, "n_games": r.n_games, "accuracy": r.accuracy, "auroc": r.auroc,
         "log_loss": r.log_loss, "brier": r.brier}
        for r in reports
    ]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_reports(reports: List[MetricsReport], stem) -> None:
    """Write ``<stem>.csv`` and ``<stem>.json``."""
    stem = Path(stem)
    df = reports_frame(reports)
    df.to_csv(stem.with_suffix(".csv"), index=False, float_format="%.10g", lineterminator="\n")
    stem.with_suffix(".json").write_text(json.dumps(df.to_dict(orient="records"), indent=2) + "\n")
