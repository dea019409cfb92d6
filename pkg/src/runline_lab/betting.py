"""Run-line settlement and flat-stake backtests over probability cutoffs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .data import Dataset, GameRecord, SyntheticConfig
from .predictions import PredictionSet

ODDS_COLUMNS = ("game_id", "home_line", "home_odds", "away_line", "away_odds")


class BettingError(ValueError):
    pass


@dataclass(frozen=True)
class RunLineQuote:
    game_id: str
    home_line: float
    home_odds: int
    away_line: float
    away_odds: int

    def __post_init__(self) -> None:
        if self.away_line != -self.home_line:
            raise BettingError(f"{self.game_id}: away line {self.away_line} is not the negated home line")
        for odds in (self.home_odds, self.away_odds):
            if int(odds) != odds or abs(odds) < 100:
                raise BettingError(f"{self.game_id}: American odds must be integers with |odds| >= 100, got {odds}")


@dataclass(frozen=True)
class BetOutcome:
    game_id: str
    side: str  # "home" | "away" | "abstain"
    stake: float
    profit: float


@dataclass(frozen=True)
class BacktestResult:
    return_pct: float
    wager_fraction: float
    outcomes: Tuple[BetOutcome, ...]
    total_staked: float
    total_profit: float
    empty: bool = False


@dataclass(frozen=True)
class BacktestGrid:
    low_cutoffs: np.ndarray
    high_cutoffs: np.ndarray
    returns_pct: np.ndarray
    wager_fraction: np.ndarray
    n_wagered: np.ndarray
    empty: np.ndarray

    def cell(self, low: float, high: float) -> Tuple[float, float]:
        i = int(np.flatnonzero(np.isclose(self.low_cutoffs, low))[0])
        j = int(np.flatnonzero(np.isclose(self.high_cutoffs, high))[0])
        return float(self.returns_pct[i, j]), float(self.wager_fraction[i, j])


def payout_ratio(odds: int) -> float:
    """Profit per unit staked on a winning bet at American ``odds``."""
    if abs(odds) < 100:
        raise BettingError(f"invalid American odds {odds}: |odds| must be >= 100")
    return odds / 100.0 if odds > 0 else 100.0 / abs(odds)


def american_odds(prob: float) -> int:
    """Integer American price whose implied probability is (about) ``prob``."""
    if not 0.0 < prob < 1.0:
        raise BettingError(f"implied probability {prob} outside (0, 1)")
    if prob >= 0.5:
        return -int(round(100.0 * prob / (1.0 - prob)))
    return int(round(100.0 * (1.0 - prob) / prob))


def implied_probability(odds: int) -> float:
    return 100.0 / (odds + 100.0) if odds > 0 else -odds / (-odds + 100.0)


def settle(quote: RunLineQuote, game: GameRecord, side: str, stake: float) -> BetOutcome:
    if quote.game_id != game.game_id:
        raise BettingError(f"quote {quote.game_id} does not match game {game.game_id}")
    if not stake > 0:
        raise BettingError("stake must be positive")
    if side == "home":
        cover = game.score_diff + quote.home_line
        odds = quote.home_odds
    elif side == "away":
        cover = -game.score_diff + quote.away_line
        odds = quote.away_odds
    else:
        raise BettingError(f"side must be 'home' or 'away', got {side!r}")
    if cover > 0:
        profit = stake * payout_ratio(odds)
    elif cover < 0:
        profit = -stake
    else:
        profit = 0.0  # push: stake returned
    return BetOutcome(game.game_id, side, stake, profit)


class QuoteStore(Mapping[str, RunLineQuote]):
    def __init__(self, quotes: Sequence[RunLineQuote]):
        self._q: Dict[str, RunLineQuote] = {}
        for q in quotes:
            if q.game_id in self._q:
                raise BettingError(f"duplicate quote for {q.game_id}")
            self._q[q.game_id] = q

    def __getitem__(self, game_id: str) -> RunLineQuote:
        return self._q[game_id]

    def __iter__(self):
        return iter(self._q)

    def __len__(self) -> int:
        return len(self._q)

    @classmethod
    def from_csv(cls, path) -> "QuoteStore":
        path = Path(path)
        if not path.exists():
            raise BettingError(f"odds file not found: {path}")
        quotes = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(ODDS_COLUMNS) - set(reader.fieldnames or [])
            if missing:
                raise BettingError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                try:
                    quotes.append(
                        RunLineQuote(
                            row["game_id"], float(row["home_line"]), int(row["home_odds"]),
                            float(row["away_line"]), int(row["away_odds"]),
                        )
                    )
                except ValueError as exc:
                    raise BettingError(f"{path}:{reader.line_num}: {exc}") from None
        return cls(quotes)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ODDS_COLUMNS)
            for q in self._q.values():
                w.writerow([q.game_id, f"{q.home_line:g}", q.home_odds, f"{q.away_line:g}", q.away_odds])


def _unit_profits(preds: PredictionSet, quotes: Mapping[str, RunLineQuote]) -> Tuple[np.ndarray, np.ndarray]:
    """Profit per unit stake of a home bet and of an away bet on every game."""
    home = np.empty(len(preds))
    away = np.empty(len(preds))
    for i, (gid, diff) in enumerate(zip(preds.game_ids, preds.score_diff)):
        try:
            q = quotes[gid]
        except KeyError:
            raise BettingError(f"no run-line quote for game {gid}") from None
        for out, cover, odds in ((home, diff + q.home_line, q.home_odds), (away, -diff + q.away_line, q.away_odds)):
            out[i] = payout_ratio(odds) if cover > 0 else (-1.0 if cover < 0 else 0.0)
    return home, away


def _sides(p: np.ndarray, low: float, high: float) -> Tuple[np.ndarray, np.ndarray]:
    bet_home = p >= high
    bet_away = ~bet_home & (p <= low)
    return bet_home, bet_away


def _tally(p, home_unit, away_unit, low, high, stake) -> Tuple[float, float, int]:
    bet_home, bet_away = _sides(p, low, high)
    profit = np.where(bet_home, home_unit, 0.0) + np.where(bet_away, away_unit, 0.0)
    n_bets = int(bet_home.sum() + bet_away.sum())
    return float(stake * np.sum(profit)), float(stake * n_bets), n_bets


def _result(preds, home_unit, away_unit, low, high, stake) -> BacktestResult:
    total_profit, total_staked, n_bets = _tally(preds.p_home, home_unit, away_unit, low, high, stake)
    bet_home, bet_away = _sides(preds.p_home, low, high)
    outcomes = []
    for i, gid in enumerate(preds.game_ids):
        if bet_home[i]:
            outcomes.append(BetOutcome(gid, "home", stake, stake * home_unit[i]))
        elif bet_away[i]:
            outcomes.append(BetOutcome(gid, "away", stake, stake * away_unit[i]))
        else:
            outcomes.append(BetOutcome(gid, "abstain", 0.0, 0.0))
    empty = n_bets == 0
    return BacktestResult(
        return_pct=0.0 if empty else 100.0 * total_profit / total_staked,
        wager_fraction=n_bets / len(preds) if len(preds) else 0.0,
        outcomes=tuple(outcomes),
        total_staked=total_staked,
        total_profit=total_profit,
        empty=empty,
    )


def naive_backtest(preds: PredictionSet, quotes: Mapping[str, RunLineQuote], stake: float = 1.0) -> BacktestResult:
    """Bet every game: home when ``p_home >= 0.5``, away otherwise."""
    home_unit, away_unit = _unit_profits(preds, quotes)
    return _result(preds, home_unit, away_unit, 0.5, 0.5, stake)


def _check_cutoffs(low: float, high: float) -> None:
    if not (0.0 <= low <= 0.5 <= high <= 1.0):
        raise BettingError(f"cutoffs must satisfy 0 <= low <= 0.5 <= high <= 1, got low={low}, high={high}")


def cutoff_backtest(preds: PredictionSet, quotes: Mapping[str, RunLineQuote], low: float, high: float,
                    stake: float = 1.0) -> BacktestResult:
    """Bet home when ``p_home >= high``, away when ``p_home <= low``, otherwise abstain."""
    _check_cutoffs(low, high)
    home_unit, away_unit = _unit_profits(preds, quotes)
    return _result(preds, home_unit, away_unit, low, high, stake)


def cutoff_axes(n_low: int = 20, n_high: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    if n_low < 1 or n_high < 1:
        raise BettingError("grid needs at least one low and one high cutoff")
    low = np.linspace(0.0, 0.5, n_low) if n_low > 1 else np.array([0.5])
    high = np.linspace(0.5, 1.0, n_high) if n_high > 1 else np.array([0.5])
    return low, high


def grid_search_cutoffs(preds: PredictionSet, quotes: Mapping[str, RunLineQuote], n_low: int = 20,
                        n_high: int = 20, stake: float = 1.0) -> BacktestGrid:
    low, high = cutoff_axes(n_low, n_high)
    home_unit, away_unit = _unit_profits(preds, quotes)
    shape = (len(low), len(high))
    returns = np.zeros(shape)
    frac = np.zeros(shape)
    count = np.zeros(shape, dtype=np.int64)
    empty = np.zeros(shape, dtype=bool)
    n = len(preds)
    for i, lo in enumerate(low):
        for j, hi in enumerate(high):
            profit, staked, n_bets = _tally(preds.p_home, home_unit, away_unit, lo, hi, stake)
            count[i, j] = n_bets
            frac[i, j] = n_bets / n if n else 0.0
            empty[i, j] = n_bets == 0
            returns[i, j] = 0.0 if n_bets == 0 else 100.0 * profit / staked
    return BacktestGrid(low, high, returns, frac, count, empty)


def write_grid(grid: BacktestGrid, stem) -> None:
    """``<stem>_returns.csv`` / ``<stem>_wager_fraction.csv`` (+ one JSON with both)."""
    stem = Path(stem)
    for name, mat in (("returns", grid.returns_pct), ("wager_fraction", grid.wager_fraction)):
        lines = ["low\\high," + ",".join(f"{h:.10g}" for h in grid.high_cutoffs)]
        for lo, row in zip(grid.low_cutoffs, mat):
            lines.append(f"{lo:.10g}," + ",".join(f"{v:.10g}" for v in row))
        Path(f"{stem}_{name}.csv").write_text("\n".join(lines) + "\n")
    Path(f"{stem}.json").write_text(
        json.dumps(
            {
                "low_cutoffs": grid.low_cutoffs.tolist(),
                "high_cutoffs": grid.high_cutoffs.tolist(),
                "returns_pct": grid.returns_pct.tolist(),
                "wager_fraction": grid.wager_fraction.tolist(),
                "n_wagered": grid.n_wagered.tolist(),
                "empty": grid.empty.tolist(),
            },
            indent=1,
        )
        + "\n"
    )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def synth_quotes(
    data: Dataset,
    latent: Optional[Mapping[str, float]] = None,
    config: Optional[SyntheticConfig] = None,
    preds: Optional[PredictionSet] = None,
    vig: float = 0.0,
    one_run_prob: float = math.exp(-0.8),
    price_noise: float = 0.0,
    seed: int = 0,
) -> QuoteStore:
    """Price +/-1.5 run lines from a known win model.

    With ``latent`` + ``config`` the synthetic generator itself sets cover
    probabilities; with ``preds`` the home-win probability comes from the
    predictions and ``one_run_prob`` is the chance a game is decided by one run.
    The favourite gets -1.5. Each side's implied probability is its cover
    probability times ``1 + vig``. ``price_noise`` (log-odds sd) perturbs the
    market's belief, seeded.
    """
    if vig < 0:
        raise BettingError("vig must be non-negative")
    games = data.frame
    if latent is not None:
        if config is None:
            raise BettingError("latent strengths need the SyntheticConfig that generated them")
        gap = np.array([latent[h] - latent[a] for h, a in zip(games["home_team"], games["away_team"])])
        p_home = _sigmoid(gap + config.home_advantage)
        one_run = np.exp(-(config.run_scale * np.abs(gap) + 0.8))
        ids = list(games["game_id"])
    elif preds is not None:
        p_home = preds.p_home.copy()
        one_run = np.full(len(p_home), one_run_prob)
        ids = list(preds.game_ids)
    else:
        raise BettingError("synth_quotes needs latent strengths or predictions")
    if price_noise > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        logit = np.log(p_home / (1 - p_home)) + rng.normal(0.0, price_noise, size=len(p_home))
        p_home = _sigmoid(logit)
    home_fav = p_home >= 0.5
    q_home = np.where(home_fav, p_home * (1 - one_run), p_home + (1 - p_home) * one_run)
    # keep both sides strictly inside (0, 1) after the vig markup
    cap = 1.0 / (1.0 + vig) - 1e-6
    q_home = np.clip(q_home, 1e-6, cap)
    q_away = np.clip(1.0 - q_home, 1e-6, cap)
    quotes = []
    for gid, fav, qh, qa in zip(ids, home_fav, q_home, q_away):
        line = -1.5 if fav else 1.5
        quotes.append(
            RunLineQuote(gid, line, american_odds(qh * (1 + vig)), -line, american_odds(qa * (1 + vig)))
        )
    return QuoteStore(quotes)
