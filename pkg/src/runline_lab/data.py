"""Game data model, CSV ingestion, season splits and a seeded synthetic season generator."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

GAMES_COLUMNS = (
    "game_id",
    "date",
    "season",
    "home_team",
    "away_team",
    "home_score",
    "away_score",
    "is_playoff",
)


class DataError(ValueError):
    """Raised for malformed input data or violated dataset invariants."""


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    date: dt.date
    season: int
    home_team: str
    away_team: str
    home_score: int
    away_score: int
    is_playoff: bool = False

    def __post_init__(self) -> None:
        if self.home_score < 0 or self.away_score < 0:
            raise DataError(f"game {self.game_id}: negative score")
        if self.home_team == self.away_team:
            raise DataError(f"game {self.game_id}: team {self.home_team} plays itself")
        if self.home_score == self.away_score:
            raise DataError(
                f"game {self.game_id}: tie score {self.home_score}-{self.away_score} "
                "(regular-season games cannot tie)"
            )
        if self.season != self.date.year:
            raise DataError(
                f"game {self.game_id}: season {self.season} does not match date {self.date.isoformat()}"
            )

    @property
    def home_win(self) -> bool:
        return self.home_score > self.away_score

    @property
    def score_diff(self) -> int:
        return self.home_score - self.away_score


@dataclass(frozen=True)
class Dataset:
    """Immutable, date-ordered collection of games."""

    games: Tuple[GameRecord, ...]

    def __post_init__(self) -> None:
        games = tuple(self.games)
        object.__setattr__(self, "games", games)
        seen = set()
        prev = None
        for g in games:
            if g.game_id in seen:
                raise DataError(f"duplicate game_id {g.game_id}")
            seen.add(g.game_id)
            if prev is not None and g.date < prev:
                raise DataError(f"games not sorted by date at {g.game_id}")
            prev = g.date

    @classmethod
    def from_games(cls, games: Iterable[GameRecord], exclude_playoffs: bool = False) -> "Dataset":
        rows = [g for g in games if not (exclude_playoffs and g.is_playoff)]
        # stable sort keeps file order within a date
        rows.sort(key=lambda g: g.date)
        return cls(tuple(rows))

    def __len__(self) -> int:
        return len(self.games)

    def __iter__(self):
        return iter(self.games)

    @property
    def seasons(self) -> frozenset:
        return frozenset(g.season for g in self.games)

    @property
    def teams(self) -> List[str]:
        return sorted({g.home_team for g in self.games} | {g.away_team for g in self.games})

    def filter(self, predicate) -> "Dataset":
        return Dataset(tuple(g for g in self.games if predicate(g)))

    def select_seasons(self, seasons: Iterable[int]) -> "Dataset":
        keep = set(seasons)
        return self.filter(lambda g: g.season in keep)

    @cached_property
    def frame(self) -> pd.DataFrame:
        """Columnar view; one row per game in dataset order."""
        df = pd.DataFrame(
            {
                "game_id": [g.game_id for g in self.games],
                "date": pd.to_datetime([g.date for g in self.games]),
                "season": np.array([g.season for g in self.games], dtype=np.int64),
                "home_team": [g.home_team for g in self.games],
                "away_team": [g.away_team for g in self.games],
                "home_score": np.array([g.home_score for g in self.games], dtype=np.int64),
                "away_score": np.array([g.away_score for g in self.games], dtype=np.int64),
                "is_playoff": np.array([g.is_playoff for g in self.games], dtype=bool),
            }
        )
        df["score_diff"] = df["home_score"] - df["away_score"]
        df["home_win"] = df["score_diff"] > 0
        return df


@dataclass(frozen=True)
class SeasonSplit:
    train: Dataset
    test: Dataset


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic league.

    ``home_advantage``, ``strength_spread`` are in log-odds units; ``run_scale`` is
    the expected extra winning margin (runs) per unit of latent strength gap.
    """

    n_teams: int = 30
    n_seasons: int = 19
    games_per_team: int = 162
    home_advantage: float = math.log(53.1 / 46.9)
    strength_spread: float = 0.35
    run_scale: float = 2.0
    seed: int = 0
    first_season: int = 2001

    def __post_init__(self) -> None:
        if self.n_teams < 2:
            raise DataError("n_teams must be at least 2")
        if self.n_seasons < 1 or self.games_per_team < 1:
            raise DataError("n_seasons and games_per_team must be positive")
        if not self.run_scale > 0:
            raise DataError("run_scale must be positive")
        if self.strength_spread < 0:
            raise DataError("strength_spread must be non-negative")


def _parse_bool(value: str) -> bool:
    if value not in ("0", "1"):
        raise ValueError(f"expected 0 or 1, got {value!r}")
    return value == "1"


_PARSERS = {
    "game_id": lambda v: v if v else _raise(ValueError("empty game_id")),
    "date": dt.date.fromisoformat,
    "season": int,
    "home_team": lambda v: v if v else _raise(ValueError("empty team code")),
    "away_team": lambda v: v if v else _raise(ValueError("empty team code")),
    "home_score": int,
    "away_score": int,
    "is_playoff": _parse_bool,
}


def _raise(exc: Exception):
    raise exc


def ingest_games(path, exclude_playoffs: bool = False) -> Dataset:
    """Read a games CSV into a validated :class:`Dataset`.

    Errors carry the 1-based file line number and the offending column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"games file not found: {path}")
    games: List[GameRecord] = []
    seen: Dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (header required)") from None
        header = [h.strip() for h in header]
        missing = [c for c in GAMES_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: header missing columns {missing}")
        index = {c: header.index(c) for c in GAMES_COLUMNS}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            values = {}
            for col, parse in _PARSERS.items():
                raw = row[index[col]].strip()
                try:
                    values[col] = parse(raw)
                except ValueError as exc:
                    raise DataError(f"{path}:{line}: column {col}: {exc}") from None
            gid = values["game_id"]
            if gid in seen:
                raise DataError(f"{path}:{line}: duplicate game_id {gid} (first seen on line {seen[gid]})")
            seen[gid] = line
            try:
                games.append(GameRecord(**values))
            except DataError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
    return Dataset.from_games(games, exclude_playoffs=exclude_playoffs)


def write_games(data: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAMES_COLUMNS)
        for g in data.games:
            w.writerow(
                [
                    g.game_id,
                    g.date.isoformat(),
                    g.season,
                    g.home_team,
                    g.away_team,
                    g.home_score,
                    g.away_score,
                    int(g.is_playoff),
                ]
            )


def split_by_season(data: Dataset, last_train_season: int) -> SeasonSplit:
    """Train on seasons <= ``last_train_season``, test on the seasons after it."""
    seasons = data.seasons
    if not seasons:
        raise DataError("cannot split an empty dataset")
    train = data.filter(lambda g: g.season <= last_train_season)
    test = data.filter(lambda g: g.season > last_train_season)
    if len(train) == 0 or len(test) == 0:
        raise DataError(
            f"last_train_season={last_train_season} leaves an empty side "
            f"(seasons {min(seasons)}-{max(seasons)})"
        )
    return SeasonSplit(train=train, test=test)


def team_codes(n: int) -> List[str]:
    return [f"T{i:02d}" for i in range(n)]


def _round_robin(n_teams: int) -> List[List[Tuple[int, int]]]:
    """Circle-method rounds; each pair is (home, away). Odd counts get a bye."""
    ids = list(range(n_teams))
    if n_teams % 2:
        ids.append(-1)
    m = len(ids)
    rounds = []
    for r in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = ids[i], ids[m - 1 - i]
            if a < 0 or b < 0:
                continue
            # alternate venue by round so home counts stay balanced
            pairs.append((a, b) if (r + i) % 2 == 0 else (b, a))
        rounds.append(pairs)
        ids = [ids[0]] + [ids[-1]] + ids[1:-1]
    return rounds


def season_schedule(n_teams: int, games_per_team: int, season: int) -> List[Tuple[dt.date, int, int]]:
    """Repeated round robin with matchdays spread evenly from April 1."""
    rounds = _round_robin(n_teams)
    per_round = len(rounds[0]) * 2 / n_teams  # games per team per matchday (<1 with a bye)
    n_matchdays = int(math.ceil(games_per_team / per_round))
    start = dt.date(season, 4, 1)
    span = 183
    out = []
    for md in range(n_matchdays):
        cycle, r = divmod(md, len(rounds))
        day = start + dt.timedelta(days=(md * span) // n_matchdays)
        for home, away in rounds[r]:
            if cycle % 2:
                home, away = away, home
            out.append((day, home, away))
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_synthetic(config: SyntheticConfig) -> Tuple[Dataset, Dict[str, float]]:
    """Simulate ``config.n_seasons`` regular seasons with fixed latent team strengths.

    Home win ~ Bernoulli(sigmoid(s_home - s_away + home_advantage)); winning margin is
    ``1 + Poisson(run_scale * |gap| + 0.8)``; loser's runs ~ Poisson(3.5).
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    teams = team_codes(config.n_teams)
    strength = rng.normal(0.0, config.strength_spread, size=config.n_teams)
    latent = {t: float(s) for t, s in zip(teams, strength)}

    games: List[GameRecord] = []
    for k in range(config.n_seasons):
        season = config.first_season + k
        sched = season_schedule(config.n_teams, config.games_per_team, season)
        home = np.array([h for _, h, _ in sched])
        away = np.array([a for _, _, a in sched])
        gap = strength[home] - strength[away]
        p_home = _sigmoid(gap + config.home_advantage)
        home_win = rng.random(len(sched)) < p_home
        margin = 1 + rng.poisson(config.run_scale * np.abs(gap) + 0.8)
        loser_runs = rng.poisson(3.5, size=len(sched))
        winner_runs = loser_runs + margin
        hs = np.where(home_win, winner_runs, loser_runs)
        as_ = np.where(home_win, loser_runs, winner_runs)
        for i, (day, h, a) in enumerate(sched):
            games.append(
                GameRecord(
                    game_id=f"{season}-{i:05d}",
                    date=day,
                    season=season,
                    home_team=teams[h],
                    away_team=teams[a],
                    home_score=int(hs[i]),
                    away_score=int(as_[i]),
                )
            )
    return Dataset.from_games(games), latent


def latent_gap(data: Dataset, latent: Dict[str, float]) -> np.ndarray:
    """Home-minus-away latent strength per game, in dataset order."""
    return np.array([latent[g.home_team] - latent[g.away_team] for g in data.games])
