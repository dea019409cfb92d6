"""Acceptance criteria, each with its runtime budget.

Every criterion records one PASS/FAIL line, printed in the pytest terminal summary.
"""

import filecmp
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES, make_fm, make_preds
from runline_lab import ensemble, metrics, strength
from runline_lab.betting import cutoff_backtest, grid_search_cutoffs, naive_backtest, synth_quotes
from runline_lab.data import SyntheticConfig, generate_synthetic, ingest_games
from runline_lab.features import DEFAULT_COLUMNS, StatStore, build_feature_matrix, elo_expectation, synthesize_team_stats
from runline_lab.models import GradientBoostedTrees, KNearestNeighbors, LogisticRegression, NeuralNetwork, SVM, gradient_check, make_model
from runline_lab.pipeline import run_pipeline
from runline_lab.predictions import PredictionSet


@contextmanager
def criterion(number, title, budget_s, spent_s=0.0):
    """Record PASS/FAIL for one criterion; the runtime budget (including ``spent_s`` of
    fixture setup) is part of the check."""
    start = time.perf_counter() - spent_s
    status, note = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
        status, note = "PASS", f"{elapsed:.1f}s"
    except BaseException as exc:
        note = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    finally:
        line = f"criterion {number} ({title}): {status} [{note}]"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_c1_homewin_row():
    with criterion(1, "home-win baseline metrics", 1.0):
        n, wins = 20_000, 10_630  # base rate 0.5315
        label = np.zeros(n, dtype=bool)
        label[np.random.default_rng(0).permutation(n)[:wins]] = True
        preds = make_preds(np.ones(n), label, name="homewin")
        r = metrics.report(preds)
        assert r.accuracy == 0.5315
        assert r.auroc == 0.5
        assert abs(r.brier - 0.4685) <= 1e-4
        assert abs(r.log_loss - 16.182) <= 0.01


def test_c2_metric_oracles():
    with criterion(2, "metric oracle equivalence", 10.0):
        rng = np.random.default_rng(2024)
        for i in range(200):
            n = int(rng.integers(1, 51))
            # coarse grids force ties and exact 0/1 probabilities
            p = [rng.random(n), np.round(rng.random(n), 1), rng.integers(0, 2, n).astype(float)][i % 3]
            y = rng.random(n) < 0.5
            if i % 7 == 0:
                y[:] = y[0]
            preds = make_preds(p, y)
            pl, yl = list(p), list(y)
            assert abs(metrics.accuracy(preds) - oracles.accuracy(pl, yl)) <= 1e-12
            assert abs(metrics.log_loss(preds) - oracles.log_loss(pl, yl)) <= 1e-12
            assert abs(metrics.brier(preds) - oracles.brier(pl, yl)) <= 1e-12
            if 0 < y.sum() < n:
                assert abs(metrics.auroc(preds) - oracles.auroc(pl, yl)) <= 1e-12
            else:
                with pytest.raises(metrics.MetricsError):
                    metrics.auroc(preds)


def test_c3_model_sanity(xor_data):
    with criterion(3, "model sanity suite", 120.0):
        # LogR on separable data
        x = np.linspace(-3, 3, 400)
        x = x[x != 0]
        m = LogisticRegression().fit(make_fm(x, x > 0))
        xt = np.linspace(-2.95, 2.95, 200)
        assert np.mean((m.predict_proba(xt[:, None]) >= 0.5) == (xt > 0)) >= 0.99

        # KNN against the exhaustive-distance oracle on 20-point sets
        rng = np.random.default_rng(3)
        for _ in range(10):
            X = rng.integers(0, 5, size=(20, 2)).astype(float)
            y = rng.random(20) < 0.5
            Xt = rng.normal(2, 1.5, size=(10, 2))
            for k in (1, 5, 20):
                knn = KNearestNeighbors(k=k, standardize=False).fit(make_fm(X, y))
                assert np.allclose(knn.predict_proba(Xt), oracles.knn_proba(X, y, Xt, k, 2.0), atol=1e-12)

        # GBDT first split against brute force
        for seed in range(5):
            r = np.random.default_rng(seed)
            X = np.round(r.normal(size=(80, 3)), 1)
            y = r.random(80) < 1 / (1 + np.exp(-2 * X[:, seed % 3]))
            tree = GradientBoostedTrees(rounds=1, depth=1, l2_leaf=1.0).fit(make_fm(X, y)).trees_[0]
            prior = y.mean()
            g, h = prior - y.astype(float), np.full(80, prior * (1 - prior))
            best = max(((j, *oracles.best_stump(list(X[:, j]), list(g), list(h), 1.0)) for j in range(3)),
                       key=lambda t: t[2])
            assert tree.feature[0] == best[0] and tree.threshold[0] == pytest.approx(best[1])

        # ANN finite-difference gradient check
        X = rng.normal(size=(12, 4))
        y = rng.random(12) < 0.5
        for hidden in ((8,), (6, 4)):
            assert gradient_check(NeuralNetwork(hidden_sizes=hidden, seed=1), X, y) < 1e-4

        # SVM on XOR clusters
        X, y = xor_data
        svm = SVM().fit(make_fm(X, y))
        assert np.mean((svm.predict_proba(X) >= 0.5) == y) >= 0.95

        # Elo expectation with a 24-point home advantage
        assert abs(elo_expectation(1500.0, 1500.0, 24.0) - 0.5345) <= 1e-4


def test_c4_strength_link():
    with criterion(4, "strength-link recovery", 120.0):
        cfg = SyntheticConfig(n_seasons=22, strength_spread=0.5, seed=1)
        data, latent = generate_synthetic(cfg)
        assert len(data) >= 50_000
        stats = synthesize_team_stats(data, latent, seed=2)
        fm = build_feature_matrix(data, stats, DEFAULT_COLUMNS)
        last_train = cfg.first_season + cfg.n_seasons - 5
        preds = LogisticRegression().fit(fm.seasons_le(last_train)).predict(fm.seasons_gt(last_train))
        fit = strength.prob_diff_regression(preds)
        assert fit.slope > 0, fit
        assert fit.r_squared > 0.05, fit
        means = [b.mean_diff for b in strength.bin_by_probability(preds) if b.n_games > 0]
        assert len(means) >= 3
        assert all(a <= b for a, b in zip(means, means[1:])), means


@pytest.fixture(scope="module")
def five_models():
    start = time.perf_counter()
    cfg = SyntheticConfig(n_teams=12, n_seasons=5, seed=4, strength_spread=0.5)
    data, latent = generate_synthetic(cfg)
    fm = build_feature_matrix(data, synthesize_team_stats(data, latent, seed=1), DEFAULT_COLUMNS)
    train, test = fm.seasons_le(cfg.first_season + 3), fm.seasons_gt(cfg.first_season + 3)
    settings = {
        "logr": {}, "svm": {"subsample_cap": 600}, "knn": {"k": 50},
        "gbdt": {"rounds": 30, "depth": 3}, "ann": {"hidden_sizes": (16,), "epochs": 10},
    }
    preds = [make_model(name, **hp).fit(train).predict(test) for name, hp in settings.items()]
    return preds, time.perf_counter() - start


def test_c5_ensemble_invariants(five_models):
    preds, setup_s = five_models
    with criterion(5, "ensemble invariants", 30.0, spent_s=setup_s):
        acc = {p.model_name: metrics.accuracy(p) for p in preds}
        rows = ensemble.triplet_table(preds)
        assert len(rows) == 10
        for r in rows:
            best = max(acc[m] for m in r.models)
            assert best <= r.oracle_accuracy + 1e-15 and r.oracle_accuracy <= 1.0
            assert r.majority_accuracy <= r.oracle_accuracy
        for p in preds:
            assert ensemble.oracle_accuracy([p, p.renamed("b"), p.renamed("c")]) == acc[p.model_name]
        am = ensemble.agreement_matrix(preds)
        assert np.array_equal(am.agree_fraction, am.agree_fraction.T)
        assert np.all(np.diag(am.agree_fraction) == 1.0)


def _market(seed, n_seasons=4):
    cfg = SyntheticConfig(n_teams=30, n_seasons=n_seasons, seed=100 + seed)
    data, latent = generate_synthetic(cfg)
    f = data.frame
    diff = (f["home_score"] - f["away_score"]).to_numpy()
    # no-skill bettor: probabilities independent of everything
    p = np.random.default_rng(seed).random(len(f))
    return cfg, data, latent, PredictionSet("noskill", tuple(f["game_id"]), p, diff > 0, diff)


def test_c6_betting_engine(five_models):
    with criterion(6, "betting engine", 60.0):
        # (a) and (b) on trained-model predictions priced by a noisy, vigged market
        cfg = SyntheticConfig(n_teams=12, n_seasons=5, seed=4, strength_spread=0.5)
        data, latent = generate_synthetic(cfg)
        logr = five_models[0][0]
        test = data.filter(lambda g: g.season > cfg.first_season + 3)
        quotes = synth_quotes(test, latent=latent, config=cfg, vig=0.045, price_noise=0.3, seed=13)
        naive = naive_backtest(logr, quotes)
        cell = cutoff_backtest(logr, quotes, 0.5, 0.5)
        assert (cell.return_pct, cell.wager_fraction, cell.total_profit) == \
            (naive.return_pct, naive.wager_fraction, naive.total_profit)
        grid = grid_search_cutoffs(logr, quotes)
        assert grid.returns_pct.shape == (20, 20)
        assert grid.low_cutoffs[-1] == 0.5 and grid.high_cutoffs[0] == 0.5
        assert grid.returns_pct[-1, 0] == naive.return_pct
        wf = grid.wager_fraction
        assert np.all(np.diff(wf, axis=0) >= 0) and np.all(np.diff(wf, axis=1) <= 0)
        assert wf[0, -1] <= wf[-1, 0] == 1.0

        # (c) fair zero-vig market: mean return within 3 standard errors of 0 over 20 seeds
        # (d) vig market, no-skill bettor: pooled return near -v/(1+v)
        vig = 0.045
        fair_returns, profit, staked = [], 0.0, 0.0
        for seed in range(20):
            cfg, data, latent, preds = _market(seed)
            fair_returns.append(naive_backtest(preds, synth_quotes(data, latent=latent, config=cfg)).return_pct)
            r = naive_backtest(preds, synth_quotes(data, latent=latent, config=cfg, vig=vig))
            profit += r.total_profit
            staked += r.total_staked
        fair_returns = np.array(fair_returns)
        se = fair_returns.std(ddof=1) / np.sqrt(len(fair_returns))
        assert abs(fair_returns.mean()) <= 3 * se, (fair_returns.mean(), se)
        pooled = 100 * profit / staked
        assert abs(pooled - (-100 * vig / (1 + vig))) <= 1.0, pooled


def _tree(root: Path):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


def test_c7_reproducible_demo(tmp_path, monkeypatch):
    from importlib import resources

    monkeypatch.delenv("RUNLINE_LAB_OUT", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    demo = resources.files("runline_lab").joinpath("data/demo.ini")
    with criterion(7, "byte-identical demo reruns", 300.0):
        a = run_pipeline(str(demo), out_dir=tmp_path / "a").out_dir
        b = run_pipeline(str(demo), out_dir=tmp_path / "b").out_dir
        files = _tree(a)
        assert files == _tree(b) and len(files) > 20
        match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        assert mismatch == [] and errors == []


REAL_GAMES = os.environ.get("RUNLINE_LAB_REAL_GAMES")
REAL_STATS = os.environ.get("RUNLINE_LAB_REAL_STATS")


@pytest.mark.skipif(not (REAL_GAMES and REAL_STATS),
                    reason="optional: set RUNLINE_LAB_REAL_GAMES and RUNLINE_LAB_REAL_STATS to real-data CSVs")
def test_c8_real_data_logr():
    with criterion(8, "real-data LogR accuracy (optional)", 600.0):
        data = ingest_games(REAL_GAMES, exclude_playoffs=True)
        fm = build_feature_matrix(data, StatStore.from_csv(REAL_STATS), DEFAULT_COLUMNS)
        fm = fm.take(fm.season <= 2019)
        preds = LogisticRegression().fit(fm.seasons_le(2015)).predict(fm.seasons_gt(2015))
        assert abs(metrics.accuracy(preds) - 0.6294) <= 0.02
