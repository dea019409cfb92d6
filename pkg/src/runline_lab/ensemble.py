"""Pairwise agreement, majority voting and best-case (oracle) accuracy over model pools."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .predictions import PredictionSet


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class AgreementMatrix:
    model_names: Tuple[str, ...]
    agree_fraction: np.ndarray


@dataclass(frozen=True)
class VotePrediction(PredictionSet):
    """Ensemble output: ``vote`` holds the majority class, ``p_home`` the averaged probability."""

    vote: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TripletResult:
    models: Tuple[str, str, str]
    majority_accuracy: float
    oracle_accuracy: float
    individual_accuracy: Tuple[float, float, float]


def _aligned(preds: Sequence[PredictionSet]) -> None:
    if not preds:
        raise EnsembleError("no prediction sets given")
    ref = preds[0].game_ids
    for p in preds[1:]:
        if p.game_ids != ref:
            raise EnsembleError(f"{p.model_name} covers different games than {preds[0].model_name}")


def _calls(preds: Sequence[PredictionSet], threshold: float) -> np.ndarray:
    return np.stack([p.p_home >= threshold for p in preds])


def agreement_matrix(preds: Sequence[PredictionSet], threshold: float = 0.5) -> AgreementMatrix:
    _aligned(preds)
    calls = _calls(preds, threshold)
    m = len(preds)
    out = np.ones((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = float(np.mean(calls[i] == calls[j]))
    return AgreementMatrix(tuple(p.model_name for p in preds), out)


def majority_vote(preds: Sequence[PredictionSet], threshold: float = 0.5,
                  weights: Optional[Sequence[float]] = None) -> VotePrediction:
    """Weighted vote of thresholded calls; ``p_home`` is the (weighted) mean probability."""
    _aligned(preds)
    if len(preds) % 2 == 0:
        raise EnsembleError("majority vote needs an odd number of models")
    w = np.ones(len(preds)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(preds) or np.any(w < 0) or w.sum() <= 0:
        raise EnsembleError("weights must be non-negative, one per model, not all zero")
    calls = _calls(preds, threshold)
    home_weight = w @ calls
    vote = home_weight * 2 > w.sum()
    p_mean = (w @ np.stack([p.p_home for p in preds])) / w.sum()
    name = "vote(" + ",".join(p.model_name for p in preds) + ")"
    ref = preds[0]
    return VotePrediction(name, ref.game_ids, p_mean, ref.label, ref.score_diff, vote=vote)


def vote_accuracy(vote: VotePrediction) -> float:
    return float(np.mean(vote.vote == vote.label))


def oracle_accuracy(preds: Sequence[PredictionSet], threshold: float = 0.5) -> float:
    """Share of games that at least one model calls correctly."""
    _aligned(preds)
    correct = _calls(preds, threshold) == preds[0].label[None, :]
    return float(np.mean(correct.any(axis=0)))


def triplet_table(preds: Sequence[PredictionSet], threshold: float = 0.5) -> List[TripletResult]:
    """Every 3-combination of models, models sorted by name."""
    if len(preds) < 3:
        raise EnsembleError("triplet table needs at least three models")
    _aligned(preds)
    pool = sorted(preds, key=lambda p: p.model_name)
    acc = {p.model_name: float(np.mean((p.p_home >= threshold) == p.label)) for p in pool}
    out = []
    for trio in itertools.combinations(pool, 3):
        names = tuple(p.model_name for p in trio)
        out.append(
            TripletResult(
                models=names,
                majority_accuracy=vote_accuracy(majority_vote(trio, threshold)),
                oracle_accuracy=oracle_accuracy(trio, threshold),
                individual_accuracy=tuple(acc[n] for n in names),
            )
        )
    return out


def write_agreement(matrix: AgreementMatrix, stem) -> None:
    stem = Path(stem)
    names = matrix.model_names
    lines = ["model," + ",".join(names)]
    for i, n in enumerate(names):
        lines.append(n + "," + ",".join(f"{v:.10g}" for v in matrix.agree_fraction[i]))
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    stem.with_suffix(".json").write_text(
        json.dumps({"models": list(names), "agree_fraction": matrix.agree_fraction.tolist()}, indent=2) + "\n"
    )


def write_triplets(rows: Sequence[TripletResult], stem) -> None:
    stem = Path(stem)
    lines = ["model_1,model_2,model_3,majority_accuracy,oracle_accuracy"]
    lines += [f"{','.join(r.models)},{r.majority_accuracy:.10g},{r.oracle_accuracy:.10g}" for r in rows]
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    stem.with_suffix(".json").write_text(
        json.dumps(
            [
                {"models": list(r.models), "majority_accuracy": r.majority_accuracy,
                 "oracle_accuracy": r.oracle_accuracy, "individual_accuracy": list(r.individual_accuracy)}
                for r in rows
            ],
            indent=2,
        )
        + "\n"
    )
