import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import game, make_preds
from runline_lab.betting import (
    BettingError, QuoteStore, RunLineQuote, american_odds, cutoff_axes, cutoff_backtest, grid_search_cutoffs,
    implied_probability, naive_backtest, payout_ratio, settle, synth_quotes, write_grid,
)
from runline_lab.data import SyntheticConfig, generate_synthetic


def test_payout_ratio():
    assert payout_ratio(150) == 1.5
    assert payout_ratio(-110) == pytest.approx(0.9091, abs=1e-4)
    assert payout_ratio(100) == 1.0
    with pytest.raises(BettingError):
        payout_ratio(50)


def test_american_odds_round_trip():
    assert american_odds(0.5) == -100
    assert american_odds(0.6) == -150
    assert american_odds(0.4) == 150
    assert implied_probability(-150) == pytest.approx(0.6)
    assert implied_probability(150) == pytest.approx(0.4)


def test_settle_examples():
    q = RunLineQuote("g", -1.5, 120, 1.5, -140)
    assert settle(q, game("g", "2019-05-01", "A", "B", 5, 3), "home", 100).profit == pytest.approx(120)
    assert settle(q, game("g", "2019-05-01", "A", "B", 4, 3), "home", 100).profit == -100
    assert settle(q, game("g", "2019-05-01", "A", "B", 4, 3), "away", 140).profit == pytest.approx(100)
    push = settle(RunLineQuote("g", -1.0, 110, 1.0, -130), game("g", "2019-05-01", "A", "B", 4, 3), "home", 100)
    assert push.profit == 0 and push.stake == 100


def test_settle_errors():
    q = RunLineQuote("g", -1.5, 120, 1.5, -140)
    with pytest.raises(BettingError):
        settle(q, game("h", "2019-05-01", "A", "B", 5, 3), "home", 100)
    with pytest.raises(BettingError):
        settle(q, game("g", "2019-05-01", "A", "B", 5, 3), "home", 0)
    with pytest.raises(BettingError):
        RunLineQuote("g", -1.5, 120, -1.5, -140)
    with pytest.raises(BettingError):
        RunLineQuote("g", -1.5, 50, 1.5, -140)


LEDGER = [
    # id, p_home, score_diff, home_line, home_odds, away_odds
    ("g0", 0.70, 3, -1.5, 130, -150),   # home, covers: +1.30
    ("g1", 0.65, 1, -1.5, 140, -160),   # home, no cover: -1
    ("g2", 0.30, -2, 1.5, -120, 100),   # away (-1.5), covers: +1.00
    ("g3", 0.40, 2, 1.5, -130, 110),    # away, loses: -1
    ("g4", 0.50, -1, 1.5, -200, 170),   # home (+1.5), loses by one, covers: +0.50
    ("g5", 0.20, -1, 1.5, -180, 150),   # away (-1.5), wins by one, no cover: -1
]


def ledger():
    ids = tuple(r[0] for r in LEDGER)
    diff = np.array([r[2] for r in LEDGER])
    preds = make_preds([r[1] for r in LEDGER], diff > 0, diff, ids=ids)
    quotes = QuoteStore([RunLineQuote(r[0], r[3], r[4], -r[3], r[5]) for r in LEDGER])
    return preds, quotes


def test_naive_hand_ledger():
    preds, quotes = ledger()
    r = naive_backtest(preds, quotes)
    assert r.total_profit == pytest.approx(1.30 - 1 + 1.00 - 1 + 0.50 - 1)
    assert r.total_staked == 6 and r.wager_fraction == 1.0
    assert r.return_pct == pytest.approx(100 * r.total_profit / 6)
    assert [o.side for o in r.outcomes] == ["home", "home", "away", "away", "home", "away"]


def test_all_push_is_zero_return():
    diff = np.array([1, -1, 1])
    preds = make_preds([0.6, 0.4, 0.7], diff > 0, diff)
    quotes = QuoteStore([RunLineQuote(f"g{i:05d}", -1.0 * d, 110, 1.0 * d, -130) for i, d in enumerate(diff)])
    r = naive_backtest(preds, quotes)
    assert r.return_pct == 0 and r.total_staked == 3 and all(o.profit == 0 for o in r.outcomes)


def test_cutoffs_and_extreme_band():
    preds, quotes = ledger()
    a = cutoff_backtest(preds, quotes, 0.5, 0.5)
    n = naive_backtest(preds, quotes)
    assert a == n
    r = cutoff_backtest(preds, quotes, 0.0, 1.0)
    assert r.wager_fraction == 0 and r.empty and r.return_pct == 0
    sel = cutoff_backtest(preds, quotes, 0.3, 0.65)
    assert [o.side for o in sel.outcomes] == ["home", "home", "away", "abstain", "abstain", "away"]
    assert sel.total_profit == pytest.approx(1.30 - 1 + 1.00 - 1)
    with pytest.raises(BettingError):
        cutoff_backtest(preds, quotes, 0.6, 0.4)


def test_missing_quote():
    preds, quotes = ledger()
    short = QuoteStore([quotes[g] for g in list(quotes)[:-1]])
    with pytest.raises(BettingError, match="g5"):
        naive_backtest(preds, short)


def test_engineered_sure_bets_match_settle():
    preds, quotes = ledger()
    p = preds.p_home.copy()
    p[[0, 2]] = [1.0, 0.0]
    sure = make_preds(p, preds.label, preds.score_diff, ids=preds.game_ids)
    r = cutoff_backtest(sure, quotes, 0.0, 1.0)
    g0 = settle(quotes["g0"], game("g0", "2019-05-01", "A", "B", 5, 2), "home", 1.0)
    g2 = settle(quotes["g2"], game("g2", "2019-05-01", "A", "B", 1, 3), "away", 1.0)
    assert r.total_profit == pytest.approx(g0.profit + g2.profit)
    assert r.wager_fraction == pytest.approx(2 / 6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_accounting_and_monotone_wagers(seed):
    rng = np.random.default_rng(seed)
    n = 50
    diff = rng.choice([-5, -3, -2, -1, 1, 2, 3, 6], n)
    ids = tuple(f"g{i:05d}" for i in range(n))
    preds = make_preds(np.round(rng.random(n), 2), diff > 0, diff, ids=ids)
    lines = rng.choice([-1.5, 1.5, -1.0, 1.0], n).astype(float)
    quotes = QuoteStore([
        RunLineQuote(i, h, int(rng.choice([-150, -110, 100, 120])), -h, int(rng.choice([-130, 105])))
        for i, h in zip(ids, lines)
    ])
    grid = grid_search_cutoffs(preds, quotes, 6, 6, stake=2.0)
    for i, lo in enumerate(grid.low_cutoffs):
        for j, hi in enumerate(grid.high_cutoffs):
            r = cutoff_backtest(preds, quotes, lo, hi, stake=2.0)
            assert r.total_profit == pytest.approx(sum(o.profit for o in r.outcomes), abs=1e-12)
            if not r.empty:
                assert r.return_pct * r.total_staked == pytest.approx(100 * r.total_profit, abs=1e-9)
            assert (grid.returns_pct[i, j], grid.wager_fraction[i, j]) == (r.return_pct, r.wager_fraction)
    # raising high or lowering low never adds wagers
    assert np.all(np.diff(grid.n_wagered, axis=1) <= 0)
    assert np.all(np.diff(grid.n_wagered, axis=0) >= 0)


def test_axes():
    lo, hi = cutoff_axes()
    assert len(lo) == len(hi) == 20 and lo[0] == 0 and lo[-1] == 0.5 and hi[0] == 0.5 and hi[-1] == 1
    lo, hi = cutoff_axes(1, 1)
    assert lo.tolist() == [0.5] and hi.tolist() == [0.5]
    with pytest.raises(BettingError):
        cutoff_axes(0, 3)


def test_singleton_grid_is_naive():
    preds, quotes = ledger()
    g = grid_search_cutoffs(preds, quotes, 1, 1)
    n = naive_backtest(preds, quotes)
    assert g.returns_pct.shape == (1, 1) and g.returns_pct[0, 0] == n.return_pct


@pytest.fixture(scope="module")
def league():
    cfg = SyntheticConfig(n_teams=12, n_seasons=2, games_per_team=80, strength_spread=0.5, seed=6)
    data, latent = generate_synthetic(cfg)
    return cfg, data, latent


def test_synth_quotes_structure(league):
    cfg, data, latent = league
    fair = synth_quotes(data, latent=latent, config=cfg)
    vig = synth_quotes(data, latent=latent, config=cfg, vig=0.045)
    s0 = np.array([implied_probability(q.home_odds) + implied_probability(q.away_odds) for q in fair.values()])
    s1 = np.array([implied_probability(q.home_odds) + implied_probability(q.away_odds) for q in vig.values()])
    # integer American prices round implied probabilities by well under a percent
    assert np.allclose(s0, 1.0, atol=0.01) and abs(s0.mean() - 1) < 1e-3
    assert np.allclose(s1, 1.045, atol=0.01) and abs(s1.mean() - 1.045) < 1e-3
    for g in data:
        stronger_home = latent[g.home_team] - latent[g.away_team] + cfg.home_advantage >= 0
        assert fair[g.game_id].home_line == (-1.5 if stronger_home else 1.5)


def test_synth_quotes_deterministic(league, tmp_path):
    cfg, data, latent = league
    a = synth_quotes(data, latent=latent, config=cfg, price_noise=0.3, seed=1)
    b = synth_quotes(data, latent=latent, config=cfg, price_noise=0.3, seed=1)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert dict(QuoteStore.from_csv(tmp_path / "a.csv")) == dict(a)
    with pytest.raises(BettingError):
        synth_quotes(data, latent=latent, config=cfg, vig=-0.1)


def test_quote_csv_errors(tmp_path):
    with pytest.raises(BettingError, match="not found"):
        QuoteStore.from_csv(tmp_path / "nope.csv")
    (tmp_path / "bad.csv").write_text("game_id,home_line\nx,1.5\n")
    with pytest.raises(BettingError, match="missing columns"):
        QuoteStore.from_csv(tmp_path / "bad.csv")


def test_write_grid(tmp_path):
    preds, quotes = ledger()
    g = grid_search_cutoffs(preds, quotes, 3, 4)
    write_grid(g, tmp_path / "grid")
    rows = (tmp_path / "grid_returns.csv").read_text().splitlines()
    assert len(rows) == 4 and len(rows[0].split(",")) == 5
    assert json.loads((tmp_path / "grid.json").read_text())["n_wagered"] == g.n_wagered.tolist()
