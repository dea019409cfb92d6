"""``runline-lab`` command line."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, betting, ensemble, metrics, strength
from .data import SyntheticConfig, generate_synthetic, ingest_games, write_games
from .features import DEFAULT_COLUMNS, FeatureMatrix, StatStore, build_feature_matrix, read_column_spec, synthesize_team_stats
from .models import FAMILIES, elo_model_predict, grid_search, make_model
from .pipeline import ENV_OUT, PipelineError, _parse_value, diff_reports, reference_config, run_pipeline
from .predictions import PredictionSet

log = logging.getLogger("runline_lab")


def out_path(arg: Optional[str], default: str) -> Path:
    """Relative outputs land under ``$RUNLINE_LAB_OUT`` when it is set."""
    p = Path(arg if arg else default)
    root = os.environ.get(ENV_OUT)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _params(pairs: Sequence[str]) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise SystemExit(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    if "hidden_sizes" in out and not isinstance(out["hidden_sizes"], tuple):
        out["hidden_sizes"] = (out["hidden_sizes"],)
    return out


def _load_preds(paths: Sequence[str]) -> List[PredictionSet]:
    files: List[Path] = []
    for p in map(Path, paths):
        files += sorted(p.glob("*.csv")) if p.is_dir() else [p]
    return [PredictionSet.from_csv(f) for f in files]


def _print_table(path: Path) -> None:
    sys.stdout.write(path.read_text())


# -- subcommands ---------------------------------------------------------------


def cmd_synth(a) -> int:
    cfg = SyntheticConfig(
        n_teams=a.teams, n_seasons=a.seasons, games_per_team=a.games_per_team,
        strength_spread=a.spread, seed=a.seed, first_season=a.first_season,
    )
    data, latent = generate_synthetic(cfg)
    out = out_path(a.out, "synthetic")
    out.mkdir(parents=True, exist_ok=True)
    write_games(data, out / "games.csv")
    synthesize_team_stats(data, latent, seed=a.stats_seed).to_csv(out / "team_stats.csv")
    betting.synth_quotes(data, latent=latent, config=cfg, vig=a.vig, seed=a.seed).to_csv(out / "odds.csv")
    with (out / "latent.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["team", "strength"])
        for team in sorted(latent):
            w.writerow([team, f"{latent[team]:.17g}"])
    print(f"{len(data)} games, {len(data.teams)} teams, seasons {min(data.seasons)}-{max(data.seasons)} -> {out}")
    return 0


def cmd_ingest(a) -> int:
    data = ingest_games(a.games, exclude_playoffs=a.exclude_playoffs)
    out = out_path(a.out, "games.csv")
    write_games(data, out)
    print(f"{len(data)} games, {len(data.teams)} teams, seasons {min(data.seasons)}-{max(data.seasons)} -> {out}")
    return 0


def cmd_features(a) -> int:
    data = ingest_games(a.games, exclude_playoffs=a.exclude_playoffs)
    stats = StatStore.from_csv(a.stats)
    columns = list(DEFAULT_COLUMNS) if a.spec == "default" else read_column_spec(a.spec)
    fm = build_feature_matrix(data, stats, columns)
    out = out_path(a.out, "features.csv")
    fm.to_csv(out)
    print(f"{len(fm)} rows x {len(fm.column_names)} columns -> {out}")
    return 0


def cmd_train(a) -> int:
    hp = _params(a.param)
    out = out_path(a.out, f"predictions_{a.family}.csv")
    if a.family == "elo":
        if not a.games:
            raise SystemExit("elo trains on games: pass --games")
        data = ingest_games(a.games, exclude_playoffs=a.exclude_playoffs)
        preds = elo_model_predict(data, first_test_season=a.last_train_season + 1, **hp)
    else:
        if not a.features:
            raise SystemExit(f"{a.family} trains on a feature matrix: pass --features")
        fm = FeatureMatrix.from_csv(a.features)
        train, test = fm.seasons_le(a.last_train_season), fm.seasons_gt(a.last_train_season)
        preds = make_model(a.family, **hp).fit(train).predict(test)
    preds.to_csv(out)
    print(f"{a.family}: {len(preds)} test predictions -> {out}")
    return 0


def cmd_gridsearch(a) -> int:
    grid = json.loads(Path(a.grid).read_text())
    if a.family == "elo":
        games = ingest_games(a.games, exclude_playoffs=True)
        data = games.select_seasons([s for s in games.seasons if s <= a.last_train_season])
    else:
        data = FeatureMatrix.from_csv(a.features).seasons_le(a.last_train_season)
    res = grid_search(a.family, grid, data, metric=a.metric, n_folds=a.folds, jobs=a.jobs)
    out = out_path(a.out, f"gridsearch_{a.family}.json")
    payload = {
        "family": res.family, "metric": res.metric, "validation_seasons": res.folds,
        "cells": [{k: list(v) if isinstance(v, tuple) else v for k, v in c.items()} for c in res.grid],
        "scores": res.scores, "best_index": res.best_index,
        "failures": {str(k): v for k, v in res.failures.items()},
    }
    out.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"best {res.best} ({res.metric} = {res.best_score:.6g}) -> {out}")
    return 0


def cmd_evaluate(a) -> int:
    reps = [metrics.report(p, threshold=a.threshold) for p in _load_preds(a.preds)]
    stem = out_path(a.out, "metrics")
    metrics.write_reports(reps, stem)
    _print_table(stem.with_suffix(".csv"))
    return 0


def cmd_strength(a) -> int:
    out = out_path(a.out, "strength")
    out.mkdir(parents=True, exist_ok=True)
    ranges, fits = [], []
    for p in _load_preds(a.preds):
        strength.write_bins(strength.bin_by_probability(p, a.bin_width, a.ddof), out / f"bins_{p.model_name}")
        ranges += strength.standard_report_suite(p, a.ddof)
        fits.append((p.model_name, strength.prob_diff_regression(p)))
    strength.write_ranges(ranges, out / "ranges")
    strength.write_fits(fits, out / "fits")
    _print_table(out / "fits.csv")
    return 0


def cmd_ensemble(a) -> int:
    preds = _load_preds(a.preds)
    out = out_path(a.out, "ensemble")
    out.mkdir(parents=True, exist_ok=True)
    ensemble.write_agreement(ensemble.agreement_matrix(preds, a.threshold), out / "agreement")
    ensemble.write_triplets(ensemble.triplet_table(preds, a.threshold), out / "triplets")
    _print_table(out / "triplets.csv")
    return 0


def cmd_backtest(a) -> int:
    preds = PredictionSet.from_csv(a.preds)
    quotes = betting.QuoteStore.from_csv(a.odds)
    stem = out_path(a.out, "backtest")
    if a.naive or not a.grid:
        r = betting.naive_backtest(preds, quotes, a.stake)
        payload = {"model": preds.model_name, "return_pct": r.return_pct, "wager_fraction": r.wager_fraction,
                   "total_staked": r.total_staked, "total_profit": r.total_profit}
        stem.with_suffix(".json").write_text(json.dumps(payload, indent=2) + "\n")
        print(f"naive: return {r.return_pct:.4f}% over {r.total_staked:g} staked -> {stem.with_suffix('.json')}")
        return 0
    try:
        n_low, n_high = (int(x) for x in a.grid.lower().split("x"))
    except ValueError:
        raise SystemExit(f"--grid expects NxM, got {a.grid!r}") from None
    grid = betting.grid_search_cutoffs(preds, quotes, n_low, n_high, a.stake)
    betting.write_grid(grid, stem)
    print(f"{n_low}x{n_high} grid -> {stem}_returns.csv, {stem}_wager_fraction.csv")
    return 0


def cmd_run(a) -> int:
    if a.print_config:
        sys.stdout.write(reference_config())
        return 0
    config = a.config or str(resources.files("runline_lab").joinpath("data/demo.ini"))
    out = out_path(a.out, a.out) if a.out else None
    res = run_pipeline(config, out_dir=out, jobs=a.jobs)
    print(f"{len(res.outputs)} outputs -> {res.out_dir}")
    return 0


def cmd_diff(a) -> int:
    summary = diff_reports(a.run_a, a.run_b, a.tolerance)
    sys.stdout.write(summary.render())
    return 0 if summary.ok else 1


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="runline-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic league (games, team stats, odds)")
    p.add_argument("--teams", type=int, default=30)
    p.add_argument("--seasons", type=int, default=19)
    p.add_argument("--games-per-team", type=int, default=162)
    p.add_argument("--spread", type=float, default=0.35, help="sd of latent team strength")
    p.add_argument("--first-season", type=int, default=2001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats-seed", type=int, default=1)
    p.add_argument("--vig", type=float, default=0.0)
    p.add_argument("--out", help="output directory (default: synthetic)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate and normalise a games CSV")
    p.add_argument("--games", required=True)
    p.add_argument("--exclude-playoffs", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="build a feature matrix")
    p.add_argument("--games", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--spec", default="default", help='column-spec file, or "default" for the bundled 53-column list')
    p.add_argument("--exclude-playoffs", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit one model and predict the test seasons")
    p.add_argument("--model", dest="family", required=True, choices=sorted(FAMILIES) + ["elo"])
    p.add_argument("--features")
    p.add_argument("--games", help="games CSV (elo only)")
    p.add_argument("--exclude-playoffs", action="store_true")
    p.add_argument("--last-train-season", type=int, required=True)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gridsearch", help="rolling-origin hyperparameter search")
    p.add_argument("--model", dest="family", required=True, choices=sorted(FAMILIES) + ["elo"])
    p.add_argument("--features")
    p.add_argument("--games")
    p.add_argument("--grid", required=True, help="JSON: list of cells or mapping of value lists")
    p.add_argument("--last-train-season", type=int, required=True)
    p.add_argument("--metric", default="log_loss")
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("evaluate", help="accuracy, AUROC, log-loss, Brier per prediction file")
    p.add_argument("--preds", nargs="+", required=True, help="prediction CSVs or directories of them")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="output stem (default: metrics)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("strength", help="probability bins, range reports and regression fits")
    p.add_argument("--preds", nargs="+", required=True, help="prediction CSVs or directories of them")
    p.add_argument("--bin-width", type=float, default=0.1)
    p.add_argument("--ddof", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_strength)

    p = sub.add_parser("ensemble", help="agreement matrix and triplet table")
    p.add_argument("--preds", nargs="+", required=True, help="prediction CSVs or directories of them")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("backtest", help="run-line betting backtest")
    p.add_argument("--preds", required=True)
    p.add_argument("--odds", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--naive", action="store_true")
    g.add_argument("--grid", metavar="NxM", help="cutoff grid, e.g. 20x20")
    p.add_argument("--stake", type=float, default=1.0)
    p.add_argument("--out", help="output stem (default: backtest)")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("run", help="full pipeline from a config file (default: bundled demo)")
    p.add_argument("config", nargs="?")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.add_argument("--print-config", action="store_true", help="print the reference config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", help="compare two run directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_diff)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
