import numpy as np
import pytest

from conftest import make_fm
from runline_lab import models
from runline_lab.data import SyntheticConfig, generate_synthetic
from runline_lab.features import latent_feature_matrix
from runline_lab.models import ModelError, ProbClassifier, expand_grid, grid_search
from runline_lab.models.search import validation_seasons


@pytest.fixture(scope="module")
def smooth():
    cfg = SyntheticConfig(n_teams=16, n_seasons=5, strength_spread=0.6, seed=21)
    data, latent = generate_synthetic(cfg)
    return data, latent_feature_matrix(data, latent)


def test_expand_grid_forms():
    assert expand_grid({"k": [1, 2], "minkowski_p": [1.0]}) == [{"k": 1, "minkowski_p": 1.0}, {"k": 2, "minkowski_p": 1.0}]
    assert expand_grid([{"c": 1}]) == [{"c": 1}]


def test_singleton_grid(smooth):
    _, fm = smooth
    res = grid_search("logr", [{"epochs": 50}], fm)
    assert res.best == {"epochs": 50}
    assert res.scores[0] == res.best_score


def test_knn_grid_rejects_k1(smooth):
    _, fm = smooth
    res = grid_search("knn", {"k": [1, 150, 300]}, fm)
    assert res.best["k"] != 1
    assert res.scores[0] > min(res.scores)


def test_failed_cells_are_reported(smooth):
    _, fm = smooth
    res = grid_search("knn", [{"k": 10**7}, {"k": 50}], fm)
    assert 0 in res.failures and res.scores[0] is None
    assert res.best == {"k": 50}
    with pytest.raises(ModelError):
        grid_search("knn", [{"k": 10**7}], fm)


def test_ties_go_to_simpler_cell():
    X = np.zeros((200, 1))
    y = np.arange(200) % 2 == 0
    fm = make_fm(X, y, season=np.repeat([2001, 2002, 2003, 2004], 50))
    # every k sees the same constant feature, so scores tie exactly
    res = grid_search("knn", [{"k": 40}, {"k": 10}, {"k": 20}], fm, metric="accuracy")
    assert len(set(res.scores)) == 1
    assert res.best == {"k": 10}


def test_temporal_hygiene(monkeypatch, smooth):
    _, fm = smooth
    seen = []

    class Spy(ProbClassifier):
        name = "spy"

        def fit(self, train):
            self.train_seasons = set(train.season.tolist())
            self.fitted = True
            return self

        def predict_proba(self, X):
            return np.full(len(X), 0.5)

        def predict(self, fm_):
            seen.append((self.train_seasons, set(fm_.season.tolist())))
            return super().predict(fm_)

    monkeypatch.setitem(models.FAMILIES, "spy", Spy)
    res = grid_search("spy", [{}], fm, n_folds=3)
    assert res.folds == sorted(set(fm.season.tolist()))[-3:]
    assert len(seen) == 3
    for train, valid in seen:
        assert len(valid) == 1 and max(train) < min(valid)


def test_elo_grid_on_dataset(smooth):
    data, fm = smooth
    res = grid_search("elo", {"k_factor": [0.0, 4.0, 20.0]}, data)
    assert res.best["k_factor"] > 0
    with pytest.raises(ModelError):
        grid_search("elo", [{}], fm)


def test_validation_seasons():
    assert validation_seasons([2001, 2002, 2003, 2004], 2) == [2003, 2004]
    with pytest.raises(ModelError):
        validation_seasons([2001, 2001], 2)


def test_parallel_matches_serial(smooth):
    _, fm = smooth
    a = grid_search("knn", {"k": [5, 25, 75]}, fm, jobs=1)
    b = grid_search("knn", {"k": [5, 25, 75]}, fm, jobs=3)
    assert a.scores == b.scores and a.best == b.best
