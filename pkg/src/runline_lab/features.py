"""Per-game feature construction from team season statistics.

Column definitions use the abbreviation scheme of the MLB variable table:
``OPSpctDiff`` (percent difference home vs away), ``OPSDiff`` (raw difference),
``FP-1`` (home team's previous-season final value) and bare names (home team's
current value). Stats are looked up as of the latest snapshot strictly before the
game date, so no game ever sees its own result.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .data import Dataset, GameRecord

EPS = 1e-9

# Default team-game columns: batting, pitching, starter and standings rates with
# their home-away differences and percentage differences, plus schedule-derived
# Elo, rest, previous-result and calendar columns.
DEFAULT_COLUMNS: Tuple[str, ...] = (
    "OPSpctDiff", "SLGpctDiff", "OBPpctDiff", "AVGpctDiff", "RpctDiff", "FPpctDiff",
    "OPSDiff", "SLGDiff", "OBPDiff", "AVGDiff",
    "OPS", "SLG", "OBP", "AVG", "R", "RD", "ISO", "FP-1", "R-1",
    "ERApctDiff", "WHIPpctDiff", "RApctDiff",
    "SP-IPpctDiff", "SP-WPApctDiff", "SP-ERApctDiff", "SP-WHIPpctDiff",
    "WHIP-1", "ERA-1", "RA-1", "RA",
    "SP-ERA", "SP-WHIP", "SP-WPA", "SP-IP", "SP-NumG",
    "BayespctDiff", "W-LpctDiff", "RankpctDiff", "PythagpctDiff", "RDpctDiff",
    "Rank-1", "W-L-1", "Attend-1",
    "Bayes", "WD", "Pythag", "WP", "ELO", "Rest", "PrevWL", "Log5", "Y", "M",
)

ALIASES = {
    "Bayes": "BayesWP",
    "Attend": "AvgAttend",
    "TeamPythag": "Pythag",
    "PG-WL": "PrevWL",
}

RATE_STATS = ("AVG", "OBP", "SLG", "FP")
COUNT_STATS = ("R", "RA", "TotalR", "SP-IP", "SP-NumG", "AvgAttend")

# Computed from the game schedule itself rather than the stat store.
CONTEXT_STATS = ("Y", "M", "Rest", "PrevWL", "ELO", "Log5")
SIDED_CONTEXT = ("Rest", "PrevWL", "ELO")

MAX_REST_DAYS = 3


class FeatureError(ValueError):
    pass


class LookaheadError(FeatureError):
    """A stat snapshot dated on or after the game it would feed."""


# -- scalar transforms -------------------------------------------------------


def pct_diff(home_value: float, away_value: float) -> float:
    return (home_value - away_value) / max(abs(away_value), EPS)


def raw_diff(home_value: float, away_value: float) -> float:
    return home_value - away_value


def pythagorean(runs_scored: float, runs_allowed: float) -> float:
    rs2 = runs_scored * runs_scored
    ra2 = runs_allowed * runs_allowed
    if rs2 + ra2 == 0:
        raise FeatureError("pythagorean expectation undefined when runs scored and allowed are both zero")
    return rs2 / (rs2 + ra2)


def log5(p_a: float, p_b: float) -> float:
    """Bill James head-to-head probability that A beats B."""
    den = p_a + p_b - 2.0 * p_a * p_b
    if den == 0:
        raise FeatureError(f"log5 undefined for p_a={p_a}, p_b={p_b}")
    return (p_a - p_a * p_b) / den


def _pct_diff_vec(h: np.ndarray, a: np.ndarray) -> np.ndarray:
    return (h - a) / np.maximum(np.abs(a), EPS)


def _log5_vec(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    den = pa + pb - 2.0 * pa * pb
    if np.any(den == 0):
        raise FeatureError("log5 undefined: degenerate win percentages (0 vs 0 or 1 vs 1)")
    return (pa - pa * pb) / den


# -- Elo ----------------------------------------------------------------------


@dataclass(frozen=True)
class EloState:
    """Team ratings plus the linear adjustment coefficients.

    The travel and rest adjustments are linear; ``travel_coeff`` and ``rest_coeff``
    are placeholder magnitudes with no empirical calibration behind them.
    """

    ratings: Mapping[str, float]
    k_factor: float = 4.0
    home_advantage_points: float = 24.0
    travel_coeff: float = 1.0  # points per 1000 km
    rest_coeff: float = 2.3  # points per rest day

    def __post_init__(self) -> None:
        bad = [t for t, r in self.ratings.items() if not math.isfinite(r)]
        if bad:
            raise FeatureError(f"non-finite Elo ratings for {bad}")

    @classmethod
    def initial(cls, teams: Iterable[str], rating: float = 1500.0, **params) -> "EloState":
        return cls(ratings={t: rating for t in teams}, **params)


def elo_adjustment(state: EloState, travel_km: float, rest_days_home: float, rest_days_away: float) -> float:
    return (
        state.home_advantage_points
        + state.rest_coeff * (rest_days_home - rest_days_away)
        - state.travel_coeff * (travel_km / 1000.0)
    )


def elo_expectation(r_home: float, r_away: float, adj: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((r_away - r_home - adj) / 400.0))


def elo_update(
    state: EloState,
    game: GameRecord,
    travel_km: float = 0.0,
    rest_days_home: float = 0.0,
    rest_days_away: float = 0.0,
) -> EloState:
    """Return the ratings after ``game``; points move zero-sum between the two teams.

    ``travel_km`` is the home team's travel disadvantage relative to the visitor
    (positive values reduce the home side's adjustment).
    """
    for team in (game.home_team, game.away_team):
        if team not in state.ratings:
            raise FeatureError(f"unknown team {team!r} in Elo state")
    r_home = state.ratings[game.home_team]
    r_away = state.ratings[game.away_team]
    adj = elo_adjustment(state, travel_km, rest_days_home, rest_days_away)
    delta = state.k_factor * ((1.0 if game.home_win else 0.0) - elo_expectation(r_home, r_away, adj))
    ratings = dict(state.ratings)
    ratings[game.home_team] = r_home + delta
    ratings[game.away_team] = r_away - delta
    return dataclasses.replace(state, ratings=ratings)


def rest_days(data: Dataset, cap: int = MAX_REST_DAYS) -> Tuple[np.ndarray, np.ndarray]:
    """Days since each side's previous game, capped; season openers get the cap."""
    last: Dict[str, Tuple[int, object]] = {}
    home = np.empty(len(data))
    away = np.empty(len(data))
    for i, g in enumerate(data.games):
        for team, out in ((g.home_team, home), (g.away_team, away)):
            prev = last.get(team)
            if prev is None or prev[0] != g.season:
                out[i] = cap
            else:
                out[i] = min(cap, (g.date - prev[1]).days)
        last[g.home_team] = (g.season, g.date)
        last[g.away_team] = (g.season, g.date)
    return home, away


def previous_result(data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """1.0 if the side won its previous game of the season, 0.0 if it lost, 0.5 for openers."""
    last: Dict[str, Tuple[int, float]] = {}
    home = np.empty(len(data))
    away = np.empty(len(data))
    for i, g in enumerate(data.games):
        for team, out in ((g.home_team, home), (g.away_team, away)):
            prev = last.get(team)
            out[i] = prev[1] if prev is not None and prev[0] == g.season else 0.5
        last[g.home_team] = (g.season, 1.0 if g.home_win else 0.0)
        last[g.away_team] = (g.season, 0.0 if g.home_win else 1.0)
    return home, away


def pregame_elo(data: Dataset, **params) -> Tuple[np.ndarray, np.ndarray]:
    """Ratings of both sides entering every game, evolving through ``data`` in order."""
    state = EloState.initial(data.teams, **params)
    ratings = dict(state.ratings)
    rest_h, rest_a = rest_days(data)
    home = np.empty(len(data))
    away = np.empty(len(data))
    for i, g in enumerate(data.games):
        rh, ra = ratings[g.home_team], ratings[g.away_team]
        home[i], away[i] = rh, ra
        adj = elo_adjustment(state, 0.0, rest_h[i], rest_a[i])
        delta = state.k_factor * (float(g.home_win) - elo_expectation(rh, ra, adj))
        ratings[g.home_team] = rh + delta
        ratings[g.away_team] = ra - delta
    return home, away


# -- stat store ---------------------------------------------------------------


class StatStore:
    """Dated team-stat snapshots: one row per (team, season, as_of_date)."""

    KEY_COLUMNS = ("team", "season", "as_of_date")

    def __init__(self, frame: pd.DataFrame):
        missing = [c for c in self.KEY_COLUMNS if c not in frame.columns]
        if missing:
            raise FeatureError(f"team stats missing columns {missing}")
        df = frame.copy()
        df["as_of_date"] = pd.to_datetime(df["as_of_date"])
        df["season"] = df["season"].astype(np.int64)
        df["team"] = df["team"].astype(str)
        stat_cols = [c for c in df.columns if c not in self.KEY_COLUMNS]
        for c in stat_cols:
            df[c] = pd.to_numeric(df[c], errors="raise").astype(float)
        self._validate(df, stat_cols)
        self.frame = df.sort_values(["team", "as_of_date", "season"], kind="mergesort").reset_index(drop=True)
        self.stat_names = tuple(stat_cols)
        finals = self.frame.groupby(["team", "season"], sort=True).tail(1)
        self._finals = finals.set_index(["team", "season"])[list(stat_cols)]
        self._keys = set(self._finals.index)
        self._league = self._finals.groupby(level="season").mean()

    @staticmethod
    def _validate(df: pd.DataFrame, stat_cols: Sequence[str]) -> None:
        if df.duplicated(list(StatStore.KEY_COLUMNS)).any():
            dup = df[df.duplicated(list(StatStore.KEY_COLUMNS))].iloc[0]
            raise FeatureError(f"duplicate snapshot for {dup['team']} {dup['season']} {dup['as_of_date'].date()}")
        for c in stat_cols:
            col = df[c]
            if col.isna().any():
                raise FeatureError(f"missing values in stat column {c}; impute before loading")
            if c in RATE_STATS and ((col < 0) | (col > 1.5)).any():
                raise FeatureError(f"rate stat {c} outside [0, 1.5]")
            if c in COUNT_STATS and (col < 0).any():
                raise FeatureError(f"counting stat {c} has negative values")

    @classmethod
    def from_csv(cls, path) -> "StatStore":
        path = Path(path)
        if not path.exists():
            raise FeatureError(f"team stats file not found: {path}")
        return cls(pd.read_csv(path, dtype={"team": str}, float_precision="round_trip"))

    def to_csv(self, path) -> None:
        df = self.frame.copy()
        df["as_of_date"] = df["as_of_date"].dt.strftime("%Y-%m-%d")
        df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def has(self, team: str, season: int) -> bool:
        return (team, season) in self._keys

    def final(self, team: str, season: int, stat: str) -> Optional[float]:
        if (team, season) not in self._keys:
            return None
        return float(self._finals.at[(team, season), stat])

    def league_mean(self, season: int, stat: str) -> float:
        if season not in self._league.index:
            raise FeatureError(f"no team stats for season {season}; cannot form a league mean for {stat}")
        return float(self._league.at[season, stat])

    def check_stat(self, stat: str) -> None:
        if stat not in self.stat_names:
            raise FeatureError(f"unknown stat {stat!r}; store has {list(self.stat_names)}")


def offset_prev_season(stats: StatStore, team: str, season: int, stat: str) -> float:
    """Previous-season final value, falling back to that season's league mean."""
    stats.check_stat(stat)
    value = stats.final(team, season - 1, stat)
    if value is None:
        return stats.league_mean(season - 1, stat)
    return value


# -- feature matrix -----------------------------------------------------------


@dataclass(frozen=True)
class ColumnDef:
    name: str
    stat: str
    transform: str  # "plain" | "pctDiff" | "Diff" | "offset"


def parse_column(name: str) -> ColumnDef:
    name = name.strip()
    if not name:
        raise FeatureError("empty column definition")
    for suffix, transform in (("pctDiff", "pctDiff"), ("Diff", "Diff"), ("-1", "offset")):
        if name.endswith(suffix) and len(name) > len(suffix):
            stat = name[: -len(suffix)]
            break
    else:
        stat, transform = name, "plain"
    stat = ALIASES.get(stat, stat)
    if stat in CONTEXT_STATS:
        if transform == "offset" or (transform != "plain" and stat not in SIDED_CONTEXT):
            raise FeatureError(f"transform {transform!r} not supported for {stat}")
    return ColumnDef(name=name, stat=stat, transform=transform)


def read_column_spec(path) -> List[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


@dataclass(frozen=True)
class FeatureMatrix:
    game_ids: Tuple[str, ...]
    column_names: Tuple[str, ...]
    values: np.ndarray
    label: np.ndarray
    score_diff: np.ndarray
    season: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.game_ids)
        if len(set(self.column_names)) != len(self.column_names):
            raise FeatureError("duplicate column names")
        if self.values.shape != (n, len(self.column_names)):
            raise FeatureError(f"values shape {self.values.shape} does not match {n} rows x {len(self.column_names)} columns")
        if len(self.label) != n or len(self.score_diff) != n or len(self.season) != n:
            raise FeatureError("label/score_diff/season not aligned with rows")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("feature matrix contains non-finite values")
        if np.any(self.score_diff == 0):
            raise FeatureError("score_diff of 0 (tie) in feature matrix")

    def __len__(self) -> int:
        return len(self.game_ids)

    @property
    def y(self) -> np.ndarray:
        return self.label.astype(float)

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return FeatureMatrix(
            game_ids=tuple(self.game_ids[i] for i in rows),
            column_names=self.column_names,
            values=self.values[rows],
            label=self.label[rows],
            score_diff=self.score_diff[rows],
            season=self.season[rows],
        )

    def seasons_le(self, season: int) -> "FeatureMatrix":
        return self.take(self.season <= season)

    def seasons_gt(self, season: int) -> "FeatureMatrix":
        return self.take(self.season > season)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=list(self.column_names))
        df.insert(0, "game_id", list(self.game_ids))
        df.insert(1, "season", self.season)
        df.insert(2, "label", self.label.astype(int))
        df.insert(3, "score_diff", self.score_diff)
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        df = pd.read_csv(path, dtype={"game_id": str}, float_precision="round_trip")
        cols = [c for c in df.columns if c not in ("game_id", "season", "label", "score_diff")]
        return cls(
            game_ids=tuple(df["game_id"]),
            column_names=tuple(cols),
            values=df[cols].to_numpy(dtype=float),
            label=df["label"].to_numpy().astype(bool),
            score_diff=df["score_diff"].to_numpy(dtype=np.int64),
            season=df["season"].to_numpy(dtype=np.int64),
        )


def _current_values(stats: StatStore, games: pd.DataFrame, team_col: str, needed: List[str]) -> pd.DataFrame:
    """Latest same-season snapshot strictly before each game, with documented fallbacks."""
    left = pd.DataFrame(
        {"_row": np.arange(len(games)), "team": games[team_col].to_numpy(), "date": games["date"].to_numpy(),
         "season": games["season"].to_numpy()}
    ).sort_values("date", kind="mergesort")
    right = stats.frame[["team", "season", "as_of_date", *needed]].rename(columns={"season": "_snap_season"})
    right = right.sort_values("as_of_date", kind="mergesort")
    merged = pd.merge_asof(
        left, right, left_on="date", right_on="as_of_date", by="team", allow_exact_matches=False,
        direction="backward",
    ).sort_values("_row")
    matched = (merged["_snap_season"] == merged["season"]).to_numpy()
    out = merged[needed].to_numpy(dtype=float).copy()
    for i in np.flatnonzero(~matched):
        team = merged["team"].iat[i]
        season = int(merged["season"].iat[i])
        if stats.has(team, season):
            raise LookaheadError(
                f"{team} {season}: every stat snapshot is dated on/after game date "
                f"{pd.Timestamp(merged['date'].iat[i]).date()}"
            )
        for j, stat in enumerate(needed):
            out[i, j] = offset_prev_season(stats, team, season, stat)
    assert np.all(merged.loc[matched, "as_of_date"].to_numpy() < merged.loc[matched, "date"].to_numpy())
    return pd.DataFrame(out, columns=needed)


def build_feature_matrix(data: Dataset, stats: StatStore, columns: Sequence[str]) -> FeatureMatrix:
    """Assemble one row per game with the requested columns, in order."""
    if len(columns) == 0:
        raise FeatureError("feature spec is empty; models need at least one column")
    defs = [parse_column(c) for c in columns]
    games = data.frame

    def stored(stat: str) -> bool:
        return stat in stats.stat_names

    needed: List[str] = []
    for d in defs:
        if d.stat in CONTEXT_STATS and not stored(d.stat):
            if d.stat == "Log5":
                stats.check_stat("WP")
                needed.append("WP")
            continue
        if d.stat == "Pythag" and not stored("Pythag"):
            stats.check_stat("R")
            stats.check_stat("RA")
            needed.extend(["R", "RA"])
            continue
        stats.check_stat(d.stat)
        needed.append(d.stat)
    needed = list(dict.fromkeys(needed))

    sides = {}
    if needed:
        sides["home"] = _current_values(stats, games, "home_team", needed)
        sides["away"] = _current_values(stats, games, "away_team", needed)

    context: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}

    def side_values(stat: str) -> Tuple[np.ndarray, np.ndarray]:
        if stat in SIDED_CONTEXT and not stored(stat):
            if stat not in context:
                fn = {"Rest": rest_days, "PrevWL": previous_result, "ELO": pregame_elo}[stat]
                context[stat] = fn(data)
            return context[stat]
        if stat == "Pythag" and not stored("Pythag"):
            h, a = sides["home"], sides["away"]
            return (_pythag_vec(h["R"].to_numpy(), h["RA"].to_numpy()),
                    _pythag_vec(a["R"].to_numpy(), a["RA"].to_numpy()))
        return sides["home"][stat].to_numpy(), sides["away"][stat].to_numpy()

    cols = []
    for d in defs:
        if d.stat == "Y":
            col = games["season"].to_numpy(dtype=float)
        elif d.stat == "M":
            col = games["date"].dt.month.to_numpy(dtype=float)
        elif d.stat == "Log5" and not stored("Log5"):
            col = _log5_vec(sides["home"]["WP"].to_numpy(), sides["away"]["WP"].to_numpy())
        elif d.transform == "offset":
            cache: Dict[Tuple[str, int], float] = {}
            col = np.empty(len(games))
            for i, (t, s) in enumerate(zip(games["home_team"], games["season"])):
                key = (t, int(s))
                if key not in cache:
                    cache[key] = offset_prev_season(stats, t, key[1], d.stat)
                col[i] = cache[key]
        else:
            h, a = side_values(d.stat)
            if d.transform == "pctDiff":
                col = _pct_diff_vec(h, a)
            elif d.transform == "Diff":
                col = h - a
            else:
                col = h
        cols.append(np.asarray(col, dtype=float))

    values = np.column_stack(cols) if cols else np.empty((len(games), 0))
    bad = ~np.isfinite(values)
    if bad.any():
        j = int(np.flatnonzero(bad.any(axis=0))[0])
        raise FeatureError(f"column {defs[j].name} has non-finite values")
    return FeatureMatrix(
        game_ids=tuple(games["game_id"]),
        column_names=tuple(d.name for d in defs),
        values=values,
        label=games["home_win"].to_numpy(),
        score_diff=games["score_diff"].to_numpy(dtype=np.int64),
        season=games["season"].to_numpy(dtype=np.int64),
    )


def _pythag_vec(rs: np.ndarray, ra: np.ndarray) -> np.ndarray:
    den = rs * rs + ra * ra
    if np.any(den == 0):
        raise FeatureError("pythagorean expectation undefined for a team with zero runs scored and allowed")
    return rs * rs / den


def latent_feature_matrix(data: Dataset, latent: Mapping[str, float]) -> FeatureMatrix:
    """Single-column matrix holding the true home-minus-away strength gap."""
    games = data.frame
    gap = np.array([latent[h] - latent[a] for h, a in zip(games["home_team"], games["away_team"])])
    return FeatureMatrix(
        game_ids=tuple(games["game_id"]),
        column_names=("StrengthGap",),
        values=gap[:, None],
        label=games["home_win"].to_numpy(),
        score_diff=games["score_diff"].to_numpy(dtype=np.int64),
        season=games["season"].to_numpy(dtype=np.int64),
    )


# -- synthetic team statistics --------------------------------------------------

# (baseline, per-unit-strength slope, per-game noise sd)
_SYNTH_RATES = {
    "OBP": (0.325, 0.020, 0.060),
    "AVG": (0.255, 0.015, 0.050),
    "SLG": (0.415, 0.035, 0.110),
    "FP": (0.984, 0.003, 0.010),
    "ERA": (4.30, -0.60, 2.80),
    "WHIP": (1.32, -0.10, 0.40),
    "SP-ERA": (4.40, -0.70, 3.20),
    "SP-WHIP": (1.30, -0.12, 0.45),
    "SP-IP": (5.60, 0.40, 1.20),
    "SP-WPA": (0.00, 0.15, 0.25),
    "AvgAttend": (30000.0, 5000.0, 4000.0),
}


def synthesize_team_stats(
    data: Dataset,
    latent: Mapping[str, float],
    seed: int = 0,
    prior_games: float = 10.0,
) -> StatStore:
    """Cumulative team stats implied by ``data`` plus noisy strength-linked rates.

    One snapshot per team per game date (stats through that date) and an opening
    snapshot on March 31 holding league baselines; a season before the first one is
    emitted so previous-season columns always resolve.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    g = data.frame
    n = len(g)
    tg = pd.DataFrame(
        {
            "team": np.concatenate([g["home_team"].to_numpy(), g["away_team"].to_numpy()]),
            "season": np.concatenate([g["season"].to_numpy()] * 2),
            "date": np.concatenate([g["date"].to_numpy()] * 2),
            "order": np.concatenate([np.arange(n)] * 2),
            "rf": np.concatenate([g["home_score"].to_numpy(), g["away_score"].to_numpy()]).astype(float),
            "ra": np.concatenate([g["away_score"].to_numpy(), g["home_score"].to_numpy()]).astype(float),
            "win": np.concatenate([g["home_win"].to_numpy(), ~g["home_win"].to_numpy()]).astype(float),
        }
    ).sort_values(["team", "order"], kind="mergesort").reset_index(drop=True)
    s = tg["team"].map(latent).to_numpy()
    by = tg.groupby(["team", "season"], sort=False)
    games_played = by.cumcount().to_numpy() + 1.0
    league_r = float(tg["rf"].mean())

    def cum_mean(obs: np.ndarray, prior: float) -> np.ndarray:
        csum = pd.Series(obs).groupby([tg["team"], tg["season"]], sort=False).cumsum().to_numpy()
        return (csum + prior_games * prior) / (games_played + prior_games)

    out = pd.DataFrame({"team": tg["team"], "season": tg["season"], "as_of_date": tg["date"]})
    for stat, (base, slope, sd) in _SYNTH_RATES.items():
        obs = base + slope * s + rng.normal(0.0, sd, size=len(tg))
        out[stat] = cum_mean(obs, base)
    out["OPS"] = out["OBP"] + out["SLG"]
    out["ISO"] = out["SLG"] - out["AVG"]
    out["R"] = cum_mean(tg["rf"].to_numpy(), league_r)
    out["RA"] = cum_mean(tg["ra"].to_numpy(), league_r)
    out["TotalR"] = pd.Series(tg["rf"].to_numpy()).groupby([tg["team"], tg["season"]], sort=False).cumsum().to_numpy()
    wins = pd.Series(tg["win"].to_numpy()).groupby([tg["team"], tg["season"]], sort=False).cumsum().to_numpy()
    out["RD"] = (out["R"] - out["RA"]) * games_played
    out["WD"] = 2 * wins - games_played
    out["W-L"] = wins / games_played
    out["WP"] = (wins + prior_games * 0.5) / (games_played + prior_games)
    out["BayesWP"] = (wins + 20 * 0.5) / (games_played + 20)
    out["SP-NumG"] = np.ceil(games_played / 5.0)
    # doubleheaders: keep the state after the day's last game
    out = out.groupby(["team", "as_of_date"], sort=False).tail(1)

    opening_rows = []
    teams = sorted(latent)
    seasons = sorted(data.seasons)
    baseline = {stat: base for stat, (base, _, _) in _SYNTH_RATES.items()}
    baseline.update(
        OPS=baseline["OBP"] + baseline["SLG"], ISO=baseline["SLG"] - baseline["AVG"], R=league_r, RA=league_r,
        TotalR=0.0, RD=0.0, WD=0.0, **{"W-L": 0.5}, WP=0.5, BayesWP=0.5, **{"SP-NumG": 0.0},
    )
    for season in seasons:
        for t in teams:
            opening_rows.append({"team": t, "season": season, "as_of_date": pd.Timestamp(season, 3, 31), **baseline})
    # burn-in season ahead of the data so "-1" columns resolve in the first season
    prev = seasons[0] - 1 if seasons else None
    if prev is not None:
        for t in teams:
            row = {"team": t, "season": prev, "as_of_date": pd.Timestamp(prev, 12, 31)}
            for stat, (base, slope, sd) in _SYNTH_RATES.items():
                row[stat] = base + slope * latent[t] + rng.normal(0.0, sd / math.sqrt(162))
            wp = 1.0 / (1.0 + math.exp(-latent[t]))
            row.update(
                OPS=row["OBP"] + row["SLG"], ISO=row["SLG"] - row["AVG"], R=league_r * (1 + 0.2 * latent[t]),
                RA=league_r * (1 - 0.2 * latent[t]), TotalR=162 * league_r * (1 + 0.2 * latent[t]),
                WD=162 * (2 * wp - 1), WP=wp, BayesWP=wp, **{"W-L": wp, "SP-NumG": 33.0},
            )
            row["RD"] = (row["R"] - row["RA"]) * 162
            opening_rows.append(row)
    frame = pd.concat([out, pd.DataFrame(opening_rows)], ignore_index=True)
    frame = frame.sort_values(["season", "as_of_date", "team"], kind="mergesort").reset_index(drop=True)
    frame["Rank"] = _season_rank(frame)
    for c in ("R", "RA", "TotalR", "SP-IP", "AvgAttend"):
        frame[c] = frame[c].clip(lower=0.0)
    return StatStore(frame)


def _season_rank(frame: pd.DataFrame) -> np.ndarray:
    """Standings position (1 = best win pct) of each snapshot among its season's teams on that date."""
    ranks = np.empty(len(frame))
    for _, part in frame.groupby("season", sort=False):
        wide = part.pivot(index="as_of_date", columns="team", values="WP").sort_index().ffill().fillna(0.5)
        r = wide.rank(axis=1, ascending=False, method="min")
        ranks[part.index.to_numpy()] = r.stack().reindex(
            pd.MultiIndex.from_arrays([part["as_of_date"], part["team"]])
        ).to_numpy()
    return ranks
