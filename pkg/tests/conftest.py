import datetime as dt

import numpy as np
import pytest

from runline_lab.data import Dataset, GameRecord, SyntheticConfig, generate_synthetic
from runline_lab.features import FeatureMatrix
from runline_lab.predictions import PredictionSet


def make_preds(p, label, score_diff=None, name="m", ids=None):
    p = np.asarray(p, dtype=float)
    label = np.asarray(label, dtype=bool)
    if score_diff is None:
        score_diff = np.where(label, 1, -1)
    ids = ids or tuple(f"g{i:05d}" for i in range(len(p)))
    return PredictionSet(name, tuple(ids), p, label, np.asarray(score_diff, dtype=np.int64))


def make_fm(X, y, season=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=bool)
    n = len(y)
    season = np.full(n, 2001) if season is None else np.asarray(season)
    return FeatureMatrix(
        tuple(f"g{i:05d}" for i in range(n)), tuple(f"x{j}" for j in range(X.shape[1])),
        X, y, np.where(y, 1, -1).astype(np.int64), season.astype(np.int64),
    )


def game(gid, date, home, away, hs, as_, playoff=False):
    d = dt.date.fromisoformat(date)
    return GameRecord(gid, d, d.year, home, away, hs, as_, playoff)


@pytest.fixture(scope="session")
def small_league():
    cfg = SyntheticConfig(n_teams=8, n_seasons=4, games_per_team=42, seed=5)
    data, latent = generate_synthetic(cfg)
    return cfg, data, latent


@pytest.fixture
def xor_data():
    rng = np.random.default_rng(0)
    centres = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    labels = np.array([1, 1, 0, 0], dtype=bool)
    idx = rng.integers(0, 4, 400)
    X = centres[idx] + rng.normal(0, 0.2, (400, 2))
    return X, labels[idx]


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
