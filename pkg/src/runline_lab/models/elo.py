from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..data import Dataset
from ..features import EloState, elo_adjustment, elo_expectation, rest_days
from .base import ModelError, PredictionSet


def elo_model_predict(
    data: Dataset,
    first_test_season: Optional[int] = None,
    travel_km: Optional[Mapping[str, float]] = None,
    initial_rating: float = 1500.0,
    **params,
) -> PredictionSet:
    """Run Elo through every game in date order, recording pre-game home expectations.

    Games before ``first_test_season`` only warm the ratings; predictions are emitted
    for the rest (all games when ``first_test_season`` is None). ``travel_km`` maps
    game_id to the home side's net travel disadvantage in km.
    """
    games = data.games
    for prev, cur in zip(games, games[1:]):
        if cur.date < prev.date:
            raise ModelError(f"elo: games out of date order at {cur.game_id}")
    state = EloState.initial(data.teams, rating=initial_rating, **params)
    ratings = dict(state.ratings)
    rest_h, rest_a = rest_days(data)
    travel_km = travel_km or {}
    ids, probs, labels, diffs = [], [], [], []
    for i, g in enumerate(games):
        rh, ra = ratings[g.home_team], ratings[g.away_team]
        adj = elo_adjustment(state, travel_km.get(g.game_id, 0.0), rest_h[i], rest_a[i])
        e = elo_expectation(rh, ra, adj)
        if first_test_season is None or g.season >= first_test_season:
            ids.append(g.game_id)
            probs.append(e)
            labels.append(g.home_win)
            diffs.append(g.score_diff)
        delta = state.k_factor * (float(g.home_win) - e)
        ratings[g.home_team] = rh + delta
        ratings[g.away_team] = ra - delta
    return PredictionSet("elo", tuple(ids), np.array(probs), np.array(labels, dtype=bool), np.array(diffs))
