"""Season-respecting hyperparameter grid search."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .. import metrics
from ..data import Dataset
from ..features import FeatureMatrix
from .base import ModelError, PredictionSet
from .elo import elo_model_predict

log = logging.getLogger(__name__)

# metric name -> (function, higher_is_better)
METRICS: Dict[str, tuple] = {
    "log_loss": (metrics.log_loss, False),
    "brier": (metrics.brier, False),
    "accuracy": (metrics.accuracy, True),
    "auroc": (metrics.auroc, True),
}

# hyperparameters ordering cells from simplest to most complex, for breaking score ties
COMPLEXITY_KEYS = {
    "knn": ("k",),
    "svm": ("c", "gamma"),
    "gbdt": ("rounds", "depth"),
    "ann": ("hidden_sizes", "epochs"),
    "logr": ("epochs",),
    "elo": ("k_factor",),
}


@dataclass
class GridSearchResult:
    family: str
    grid: List[Dict[str, Any]]
    scores: List[Optional[float]]
    metric: str
    best_index: int
    folds: List[int]
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def best(self) -> Dict[str, Any]:
        return self.grid[self.best_index]

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]


def expand_grid(spec: Union[Mapping[str, Sequence[Any]], Sequence[Mapping[str, Any]]]) -> List[Dict[str, Any]]:
    """A list of cells passes through; a mapping of name -> values becomes its cartesian product."""
    if isinstance(spec, Mapping):
        names = list(spec)
        return [dict(zip(names, combo)) for combo in itertools.product(*(spec[n] for n in names))]
    return [dict(cell) for cell in spec]


def validation_seasons(seasons: Sequence[int], n_folds: int) -> List[int]:
    ordered = sorted(set(int(s) for s in seasons))
    if len(ordered) < 2:
        raise ModelError("grid search needs at least two seasons (train on earlier, validate on later)")
    n_folds = max(1, min(n_folds, len(ordered) - 1))
    return ordered[-n_folds:]


def _complexity(family: str, cell: Mapping[str, Any]):
    key = []
    for name in COMPLEXITY_KEYS.get(family, ()):
        v = cell.get(name)
        if isinstance(v, (list, tuple)):
            v = (len(v), sum(v))
        key.append((v is not None, v if v is not None else 0))
    return tuple(key)


def _fold_predictions(family: str, cell: Mapping[str, Any], data, season: int) -> PredictionSet:
    from . import make_model

    if family == "elo":
        if not isinstance(data, Dataset):
            raise ModelError("elo grid search runs on a Dataset")
        upto = data.filter(lambda g: g.season <= season)
        preds = elo_model_predict(upto, first_test_season=season, **cell)
        return preds
    if not isinstance(data, FeatureMatrix):
        raise ModelError(f"{family} grid search runs on a FeatureMatrix")
    train = data.take(data.season < season)
    valid = data.take(data.season == season)
    model = make_model(family, **cell).fit(train)
    return model.predict(valid)


def grid_search(family: str, grid, data: Union[FeatureMatrix, Dataset], metric: str = "log_loss",
                n_folds: int = 2, jobs: int = 1) -> GridSearchResult:
    """Score every cell with rolling-origin validation over the last ``n_folds`` seasons.

    Fold for season ``s`` trains on seasons strictly before ``s`` and validates on ``s``;
    fold predictions are pooled before scoring. Cells that fail to fit are recorded and
    excluded; remaining score ties go to the simpler cell.
    """
    cells = expand_grid(grid)
    if not cells:
        raise ModelError("empty hyperparameter grid")
    if metric not in METRICS:
        raise ModelError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    fn, higher = METRICS[metric]
    seasons = data.season if isinstance(data, FeatureMatrix) else [g.season for g in data.games]
    folds = validation_seasons(seasons, n_folds)

    def score(cell):
        parts = [_fold_predictions(family, cell, data, s) for s in folds]
        pooled = PredictionSet(
            family,
            tuple(itertools.chain.from_iterable(p.game_ids for p in parts)),
            np.concatenate([p.p_home for p in parts]),
            np.concatenate([p.label for p in parts]),
            np.concatenate([p.score_diff for p in parts]),
        )
        return float(fn(pooled))

    def safe(cell):
        try:
            return score(cell), None
        except (ModelError, ValueError, FloatingPointError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(safe, cells))
    else:
        outcomes = [safe(c) for c in cells]

    scores = [s for s, _ in outcomes]
    failures = {i: err for i, (_, err) in enumerate(outcomes) if err is not None}
    for i, err in failures.items():
        log.warning("grid cell %s failed: %s", cells[i], err)
    ok = [i for i, s in enumerate(scores) if s is not None]
    if not ok:
        raise ModelError(f"every grid cell failed for {family}: {failures}")
    best = min(ok, key=lambda i: ((-scores[i] if higher else scores[i]), _complexity(family, cells[i]), i))
    return GridSearchResult(family, cells, scores, metric, best, folds, failures)
