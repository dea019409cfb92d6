"""How predicted home-win probability relates to the eventual score differential."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .predictions import PredictionSet

# toss-up, home favourite, home underdog
STANDARD_RANGES: Tuple[Tuple[float, float], ...] = (
    (0.45, 0.55),
    (0.49, 0.51),
    (0.75, 1.00),
    (0.85, 1.00),
    (0.00, 0.25),
    (0.00, 0.15),
)


class StrengthError(ValueError):
    pass


@dataclass(frozen=True)
class BinSummary:
    bin_center: float
    n_games: int
    mean_diff: Optional[float]
    sd_diff: Optional[float]


@dataclass(frozen=True)
class RangeReport:
    model_name: str
    low: float
    high: float
    n_games: int
    mean_diff: Optional[float]
    sd_diff: Optional[float]

    @property
    def label(self) -> str:
        return f"{round(self.low * 100):d}%-{round(self.high * 100):d}%"


@dataclass(frozen=True)
class FitSummary:
    slope: float
    intercept: float
    r_squared: float


def _sd(values: np.ndarray, ddof: int) -> Optional[float]:
    # one game (or none) gives no spread estimate; report it as absent, not zero
    if len(values) < 2 or len(values) <= ddof:
        return None
    return float(np.std(values, ddof=ddof))


def bin_by_probability(preds: PredictionSet, bin_width: float = 0.1, ddof: int = 1) -> List[BinSummary]:
    """Round each probability to the nearest multiple of ``bin_width`` (halves round up)."""
    if len(preds) == 0:
        raise StrengthError(f"{preds.model_name}: empty prediction set")
    n_bins = 1.0 / bin_width
    if bin_width <= 0 or abs(n_bins - round(n_bins)) > 1e-9:
        raise StrengthError(f"bin_width {bin_width} must divide 1 evenly")
    n_bins = int(round(n_bins))
    # rounding to 9 places first keeps e.g. 0.35/0.1 = 3.4999999999999996 on the upper bin
    idx = np.floor(np.round(preds.p_home / bin_width, 9) + 0.5).astype(int)
    diffs = preds.score_diff.astype(float)
    out = []
    for b in range(n_bins + 1):
        sel = diffs[idx == b]
        out.append(
            BinSummary(
                bin_center=round(b * bin_width, 10),
                n_games=int(len(sel)),
                mean_diff=float(sel.mean()) if len(sel) else None,
                sd_diff=_sd(sel, ddof),
            )
        )
    return out


def prob_diff_regression(preds: PredictionSet) -> FitSummary:
    """Ordinary least squares of score differential on predicted probability."""
    if len(preds) < 3:
        raise StrengthError(f"{preds.model_name}: need at least 3 games for a regression")
    x = preds.p_home
    y = preds.score_diff.astype(float)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise StrengthError(f"{preds.model_name}: constant predictions, slope undefined")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return FitSummary(slope=slope, intercept=intercept, r_squared=min(1.0, max(0.0, r2)))


def range_report(preds: PredictionSet, low: float, high: float, ddof: int = 1) -> RangeReport:
    """Score-differential statistics over games with ``low <= p_home <= high``."""
    if not (0.0 <= low < high <= 1.0):
        raise StrengthError(f"invalid probability range [{low}, {high}]")
    sel = preds.score_diff[(preds.p_home >= low) & (preds.p_home <= high)].astype(float)
    return RangeReport(
        model_name=preds.model_name,
        low=low,
        high=high,
        n_games=int(len(sel)),
        mean_diff=float(sel.mean()) if len(sel) else None,
        sd_diff=_sd(sel, ddof),
    )


def standard_report_suite(preds: PredictionSet, ddof: int = 1) -> List[RangeReport]:
    return [range_report(preds, lo, hi, ddof) for lo, hi in STANDARD_RANGES]


# -- output ---------------------------------------------------------------


def _num(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.10g}"


def write_bins(bins: Sequence[BinSummary], stem) -> None:
    stem = Path(stem)
    lines = ["bin_center,n,mean_diff,sd_diff"]
    lines += [f"{b.bin_center:.10g},{b.n_games},{_num(b.mean_diff)},{_num(b.sd_diff)}" for b in bins]
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    stem.with_suffix(".json").write_text(json.dumps([asdict(b) for b in bins], indent=2) + "\n")


def write_ranges(reports: Sequence[RangeReport], stem) -> None:
    stem = Path(stem)
    lines = ["model,range,low,high,n,mean_diff,sd_diff"]
    lines += [
        f"{r.model_name},{r.label},{r.low:.10g},{r.high:.10g},{r.n_games},{_num(r.mean_diff)},{_num(r.sd_diff)}"
        for r in reports
    ]
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    stem.with_suffix(".json").write_text(json.dumps([{**asdict(r), "range": r.label} for r in reports], indent=2) + "\n")


def write_fits(fits: Sequence[Tuple[str, FitSummary]], stem) -> None:
    stem = Path(stem)
    lines = ["model,slope,intercept,r_squared"]
    lines += [f"{name},{f.slope:.10g},{f.intercept:.10g},{f.r_squared:.10g}" for name, f in fits]
    stem.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    stem.with_suffix(".json").write_text(
        json.dumps([{"model": name, **asdict(f)} for name, f in fits], indent=2) + "\n"
    )
