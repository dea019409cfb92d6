import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_preds
from runline_lab.data import SyntheticConfig, generate_synthetic
from runline_lab.features import latent_feature_matrix
from runline_lab.models import LogisticRegression
from runline_lab.strength import (
    STANDARD_RANGES, StrengthError, bin_by_probability, prob_diff_regression, range_report, standard_report_suite,
    write_bins, write_fits, write_ranges,
)


def preds(p, diff):
    diff = np.asarray(diff)
    return make_preds(p, diff > 0, diff)


def test_single_bin_hand_stats():
    bins = bin_by_probability(preds([0.52, 0.52], [1, -1]))
    populated = [b for b in bins if b.n_games]
    assert len(populated) == 1
    b = populated[0]
    assert b.bin_center == 0.5 and b.mean_diff == 0.0 and b.sd_diff == pytest.approx(math.sqrt(2))


def test_rounding_boundaries():
    bins = {b.bin_center: b.n_games for b in bin_by_probability(preds([0.04, 0.96, 0.05, 0.35, 0.65], [1, 1, 1, 1, 1]))}
    assert bins[0.0] == 1 and bins[1.0] == 1
    # halves round up
    assert bins[0.1] == 1 and bins[0.4] == 1 and bins[0.7] == 1


def test_single_game_bin_has_no_sd():
    b = [x for x in bin_by_probability(preds([0.3], [2])) if x.n_games][0]
    assert b.mean_diff == 2 and b.sd_diff is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(-12, 12).filter(lambda d: d != 0)), min_size=1, max_size=60))
def test_bins_partition(rows):
    p = [r[0] for r in rows]
    d = [r[1] for r in rows]
    bins = bin_by_probability(preds(p, d))
    assert sum(b.n_games for b in bins) == len(rows)
    assert len(bins) == 11


def test_bad_bin_width_and_empty():
    with pytest.raises(StrengthError):
        bin_by_probability(preds([0.5], [1]), 0.3)
    with pytest.raises(StrengthError):
        bin_by_probability(preds([], []))


def test_regression_exact_line():
    # score_diff is integer-valued; use p values that make 10p - 5 integral
    p = np.array([0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0])
    f = prob_diff_regression(preds(p, np.round(10 * p - 5).astype(int)))
    assert f.slope == pytest.approx(10) and f.intercept == pytest.approx(-5) and f.r_squared == pytest.approx(1.0)


def test_regression_matches_normal_equations():
    p = np.array([0.2, 0.4, 0.5, 0.7, 0.9])
    d = np.array([-3, 1, -1, 2, 5])
    f = prob_diff_regression(preds(p, d))
    A = np.column_stack([np.ones(5), p])
    beta = np.linalg.solve(A.T @ A, A.T @ d)
    resid = d - A @ beta
    r2 = 1 - resid @ resid / np.sum((d - d.mean()) ** 2)
    assert (f.intercept, f.slope) == pytest.approx(tuple(beta))
    assert f.r_squared == pytest.approx(r2)


def test_regression_errors():
    with pytest.raises(StrengthError, match="logr"):
        prob_diff_regression(make_preds([0.5] * 4, [1, 0, 1, 0], name="logr"))
    with pytest.raises(StrengthError):
        prob_diff_regression(preds([0.1, 0.9], [1, 2]))


def test_range_reports():
    p = np.array([0.1, 0.45, 0.5, 0.55, 0.9])
    d = np.array([-3, 1, -1, 2, 5])
    full = range_report(preds(p, d), 0.0, 1.0)
    assert full.n_games == 5 and full.mean_diff == pytest.approx(d.mean()) and full.sd_diff == pytest.approx(d.std(ddof=1))
    tossup = range_report(preds(p, d), 0.45, 0.55)
    assert tossup.n_games == 3 and tossup.label == "45%-55%"
    empty = range_report(preds(p, d), 0.95, 1.0)
    assert empty.n_games == 0 and empty.mean_diff is None and empty.sd_diff is None
    with pytest.raises(StrengthError):
        range_report(preds(p, d), 0.6, 0.4)


def test_standard_suite_boundaries_and_measure():
    rng = np.random.default_rng(0)
    n = 200_000
    p = rng.random(n)
    reps = standard_report_suite(preds(p, np.where(rng.random(n) < 0.5, 1, -1)))
    assert [(r.low, r.high) for r in reps] == list(STANDARD_RANGES)
    assert [r.label for r in reps] == ["45%-55%", "49%-51%", "75%-100%", "85%-100%", "0%-25%", "0%-15%"]
    assert reps[0].n_games / n == pytest.approx(0.10, abs=0.005)
    assert reps[1].n_games / n == pytest.approx(0.02, abs=0.002)
    assert reps[1].n_games <= reps[0].n_games
    half = standard_report_suite(preds(np.full(10, 0.5), np.arange(1, 11)))
    assert [r.n_games for r in half[2:]] == [0, 0, 0, 0]


def test_symmetric_generator_tossup_centred():
    cfg = SyntheticConfig(n_teams=20, n_seasons=8, home_advantage=0.0, strength_spread=0.3, seed=2)
    data, latent = generate_synthetic(cfg)
    fm = latent_feature_matrix(data, latent)
    p = LogisticRegression(epochs=300).fit(fm).predict(fm)
    r = range_report(p, 0.45, 0.55)
    se = r.sd_diff / math.sqrt(r.n_games)
    assert abs(r.mean_diff) < 3 * se


def test_writers(tmp_path):
    pr = preds([0.1, 0.5, 0.52, 0.9], [-2, 1, -1, 3])
    write_bins(bin_by_probability(pr), tmp_path / "bins")
    write_ranges(standard_report_suite(pr), tmp_path / "ranges")
    write_fits([("m", prob_diff_regression(pr))], tmp_path / "fits")
    assert (tmp_path / "bins.csv").read_text().splitlines()[0] == "bin_center,n,mean_diff,sd_diff"
    assert len(json.loads((tmp_path / "bins.json").read_text())) == 11
    assert json.loads((tmp_path / "ranges.json").read_text())[2]["n_games"] == 1
    assert json.loads((tmp_path / "fits.json").read_text())[0]["model"] == "m"
