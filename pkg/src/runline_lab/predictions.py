"""Per-game home-win probabilities produced by one model on one evaluation set."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from .features import FeatureMatrix


class PredictionError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionSet:
    model_name: str
    game_ids: Tuple[str, ...]
    p_home: np.ndarray
    label: np.ndarray
    score_diff: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "game_ids", tuple(self.game_ids))
        object.__setattr__(self, "p_home", np.asarray(self.p_home, dtype=float))
        object.__setattr__(self, "label", np.asarray(self.label, dtype=bool))
        object.__setattr__(self, "score_diff", np.asarray(self.score_diff, dtype=np.int64))
        n = len(self.game_ids)
        if not (len(self.p_home) == len(self.label) == len(self.score_diff) == n):
            raise PredictionError(f"{self.model_name}: misaligned prediction arrays")
        p = self.p_home
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise PredictionError(f"{self.model_name}: probabilities must be finite and within [0, 1]")

    def __len__(self) -> int:
        return len(self.game_ids)

    @classmethod
    def from_matrix(cls, name: str, fm: FeatureMatrix, p_home) -> "PredictionSet":
        return cls(name, fm.game_ids, np.clip(np.asarray(p_home, dtype=float), 0.0, 1.0), fm.label, fm.score_diff)

    def renamed(self, name: str) -> "PredictionSet":
        return PredictionSet(name, self.game_ids, self.p_home, self.label, self.score_diff)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "game_id": list(self.game_ids),
                "model": self.model_name,
                "p_home": self.p_home,
                "label": self.label.astype(int),
                "score_diff": self.score_diff,
            }
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "PredictionSet":
        missing = {"game_id", "model", "p_home", "label", "score_diff"} - set(df.columns)
        if missing:
            raise PredictionError(f"predictions missing columns {sorted(missing)}")
        models = df["model"].unique()
        if len(models) != 1:
            raise PredictionError(f"expected one model per predictions file, got {list(models)}")
        return cls(
            str(models[0]),
            tuple(df["game_id"].astype(str)),
            df["p_home"].to_numpy(dtype=float),
            df["label"].to_numpy().astype(bool),
            df["score_diff"].to_numpy(dtype=np.int64),
        )

    @classmethod
    def from_csv(cls, path) -> "PredictionSet":
        path = Path(path)
        if not path.exists():
            raise PredictionError(f"predictions file not found: {path}")
        return cls.from_frame(pd.read_csv(path, dtype={"game_id": str, "model": str}, float_precision="round_trip"))
