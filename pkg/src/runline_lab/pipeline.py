"""End-to-end experiment runner driven by an INI config, plus run-to-run diffing."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__, betting, ensemble, metrics, strength
from .data import Dataset, SyntheticConfig, generate_synthetic, ingest_games, split_by_season, write_games
from .features import DEFAULT_COLUMNS, StatStore, build_feature_matrix, read_column_spec, synthesize_team_stats
from .models import elo_model_predict, grid_search, make_model
from .predictions import PredictionSet

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
MODEL_ORDER = ("homewin", "logr", "svm", "knn", "gbdt", "ann", "elo")
ENV_OUT = "RUNLINE_LAB_OUT"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def reference_config() -> str:
    return resources.files("runline_lab").joinpath("data/demo.ini").read_text(encoding="utf-8")


def load_config(path) -> Tuple[configparser.ConfigParser, Path]:
    path = Path(path)
    if not path.exists():
        raise PipelineError("config", f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(reference_config())
    user = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        user.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise PipelineError("config", str(exc)) from None
    for section in user.sections():
        if not cp.has_section(section):
            cp.add_section(section)
        for key, value in user.items(section, raw=True):
            cp.set(section, key, value)
    return cp, path.parent.resolve()


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    if "," in raw:
        return tuple(_parse_value(p) for p in raw.split(",") if p.strip())
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def section(cp: configparser.ConfigParser, name: str) -> Dict[str, Any]:
    if not cp.has_section(name):
        return {}
    return {k: _parse_value(v) for k, v in cp.items(name, raw=True)}


def _as_tuple(v) -> Tuple:
    if v is None:
        return ()
    return v if isinstance(v, tuple) else (v,)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else (base / q)


@dataclass
class RunResult:
    out_dir: Path
    outputs: List[str] = field(default_factory=list)
    manifest: Dict[str, Any] = field(default_factory=dict)


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, f"{type(exc).__name__}: {exc}") from exc
        return False


def _validate_inputs(cp, base: Path) -> None:
    data = section(cp, "data")
    stats = section(cp, "stats")
    bt = section(cp, "backtest")
    feats = section(cp, "features")
    needed = []
    if data.get("source") == "file":
        needed.append(("data.games", data.get("games")))
    if stats.get("source") == "file":
        needed.append(("stats.path", stats.get("path")))
    if feats.get("spec") not in (None, "default"):
        needed.append(("features.spec", feats.get("spec")))
    if bt.get("enabled") and bt.get("odds") not in (None, "synthetic"):
        needed.append(("backtest.odds", bt.get("odds")))
    for key, p in needed:
        if p is None:
            raise PipelineError("config", f"{key} must be set")
        if not _resolve(base, str(p)).exists():
            raise PipelineError("config", f"{key}: file not found: {_resolve(base, str(p))}")


def run_pipeline(config_path, out_dir=None, jobs: Optional[int] = None) -> RunResult:
    """Run every enabled stage and write artifacts plus ``manifest.json`` to the output directory."""
    cp, base = load_config(config_path)
    _validate_inputs(cp, base)
    run_cfg = section(cp, "run")
    if out_dir is None:
        env = os.environ.get(ENV_OUT)
        out_dir = Path(env) if env else Path(str(run_cfg.get("out") or "runline_out"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = int(jobs if jobs is not None else run_cfg.get("jobs", 1) or 1)
    written: List[Path] = []
    inputs: Dict[str, str] = {}
    seeds: Dict[str, int] = {}

    def emit(path: Path) -> None:
        written.append(path)

    # -- data --
    with _Stage("data"):
        dcfg = section(cp, "data")
        (out / "inputs").mkdir(exist_ok=True)
        latent = None
        synth_cfg = None
        if dcfg.get("source", "synthetic") == "synthetic":
            synth_cfg = SyntheticConfig(
                n_teams=int(dcfg["n_teams"]), n_seasons=int(dcfg["n_seasons"]),
                games_per_team=int(dcfg["games_per_team"]), home_advantage=float(dcfg["home_advantage"]),
                strength_spread=float(dcfg["strength_spread"]), run_scale=float(dcfg["run_scale"]),
                seed=int(dcfg["seed"]), first_season=int(dcfg["first_season"]),
            )
            seeds["data"] = synth_cfg.seed
            data, latent = generate_synthetic(synth_cfg)
            write_games(data, out / "inputs" / "games.csv")
            emit(out / "inputs" / "games.csv")
        else:
            gpath = _resolve(base, str(dcfg["games"]))
            inputs[str(dcfg["games"])] = _sha256(gpath)
            data = ingest_games(gpath, exclude_playoffs=bool(dcfg.get("exclude_playoffs", True)))
        last_train = int(run_cfg["last_train_season"])
        split = split_by_season(data, last_train)
        first_test = min(split.test.seasons)

    # -- stats + features --
    with _Stage("features"):
        scfg = section(cp, "stats")
        if scfg.get("source", "synthetic") == "synthetic":
            if latent is None:
                raise PipelineError("features", "synthetic stats need synthetic games (data.source = synthetic)")
            seeds["stats"] = int(scfg.get("seed", 0))
            stats = synthesize_team_stats(data, latent, seed=seeds["stats"])
        else:
            spath = _resolve(base, str(scfg["path"]))
            inputs[str(scfg["path"])] = _sha256(spath)
            stats = StatStore.from_csv(spath)
        fcfg = section(cp, "features")
        spec = fcfg.get("spec", "default")
        if spec in (None, "default"):
            columns = list(DEFAULT_COLUMNS)
        else:
            spath = _resolve(base, str(spec))
            inputs[str(spec)] = _sha256(spath)
            columns = read_column_spec(spath)
        fm = build_feature_matrix(data, stats, columns)
        train_fm, test_fm = fm.seasons_le(last_train), fm.seasons_gt(last_train)
        if fcfg.get("write_matrix", False):
            fm.to_csv(out / "inputs" / "features.csv")
            emit(out / "inputs" / "features.csv")

    # -- models --
    preds: Dict[str, PredictionSet] = {}
    chosen: Dict[str, Dict[str, Any]] = {}
    enabled = [m for m in MODEL_ORDER if m in _as_tuple(section(cp, "models").get("enabled"))]
    (out / "predictions").mkdir(exist_ok=True)
    for name in enabled:
        with _Stage(f"train:{name}"):
            hp = {k: v for k, v in section(cp, name).items() if k != "grid"}
            if "hidden_sizes" in hp:
                hp["hidden_sizes"] = _as_tuple(hp["hidden_sizes"])
            if "seed" in hp:
                seeds[name] = int(hp["seed"])
            grid_file = section(cp, name).get("grid")
            if grid_file:
                gpath = _resolve(base, str(grid_file))
                inputs[str(grid_file)] = _sha256(gpath)
                grid = json.loads(gpath.read_text())
                gdata = split.train if name == "elo" else train_fm
                result = grid_search(name, grid, gdata, n_folds=int(run_cfg.get("cv_folds", 2)), jobs=jobs)
                hp.update(result.best)
                _write_grid_search(result, out / "predictions" / f"{name}_gridsearch.json")
                emit(out / "predictions" / f"{name}_gridsearch.json")
            chosen[name] = hp
            if name == "elo":
                p = elo_model_predict(data, first_test_season=first_test, **hp)
            else:
                p = make_model(name, **hp).fit(train_fm).predict(test_fm)
            preds[name] = p
            p.to_csv(out / "predictions" / f"{name}.csv")
            emit(out / "predictions" / f"{name}.csv")

    # -- evaluate --
    threshold = float(section(cp, "evaluate").get("threshold", 0.5))
    with _Stage("evaluate"):
        reps = [metrics.report(preds[m], threshold=threshold) for m in enabled]
        metrics.write_reports(reps, out / "metrics")
        emit(out / "metrics.csv")
        emit(out / "metrics.json")

    # -- strength --
    with _Stage("strength"):
        st = section(cp, "strength")
        width = float(st.get("bin_width", 0.1))
        ddof = int(st.get("ddof", 1))
        sdir = out / "strength"
        sdir.mkdir(exist_ok=True)
        ranges, fits = [], []
        for m in enabled:
            strength.write_bins(strength.bin_by_probability(preds[m], width, ddof), sdir / f"bins_{m}")
            emit(sdir / f"bins_{m}.csv")
            emit(sdir / f"bins_{m}.json")
            ranges += strength.standard_report_suite(preds[m], ddof)
            if np.ptp(preds[m].p_home) > 0:
                fits.append((m, strength.prob_diff_regression(preds[m])))
        strength.write_ranges(ranges, sdir / "ranges")
        strength.write_fits(fits, sdir / "fits")
        for stem in ("ranges", "fits"):
            emit(sdir / f"{stem}.csv")
            emit(sdir / f"{stem}.json")

    # -- ensemble --
    ecfg = section(cp, "ensemble")
    pool = [m for m in _as_tuple(ecfg.get("models")) if m in preds]
    if ecfg.get("enabled", True) and len(pool) >= 3:
        with _Stage("ensemble"):
            edir = out / "ensemble"
            edir.mkdir(exist_ok=True)
            sets = [preds[m] for m in pool]
            ensemble.write_agreement(ensemble.agreement_matrix(sets, threshold), edir / "agreement")
            rows = ensemble.triplet_table(sets, threshold)
            ensemble.write_triplets(rows, edir / "triplets")
            oracle_all = ensemble.oracle_accuracy(sets, threshold)
            (edir / "oracle.json").write_text(json.dumps({"models": pool, "oracle_accuracy": oracle_all}, indent=2) + "\n")
            for f in ("agreement.csv", "agreement.json", "triplets.csv", "triplets.json", "oracle.json"):
                emit(edir / f)

    # -- backtest --
    bcfg = section(cp, "backtest")
    if bcfg.get("enabled", False):
        with _Stage("backtest"):
            model = str(bcfg.get("model", "logr"))
            if model not in preds:
                raise PipelineError("backtest", f"model {model!r} is not among the trained models {enabled}")
            odds = bcfg.get("odds", "synthetic")
            if odds in (None, "synthetic"):
                if latent is None:
                    raise PipelineError("backtest", "synthetic odds need synthetic games")
                seeds["odds"] = int(bcfg.get("seed", 0))
                quotes = betting.synth_quotes(
                    split.test, latent=latent, config=synth_cfg, vig=float(bcfg.get("vig", 0.0)),
                    price_noise=float(bcfg.get("price_noise", 0.0)), seed=seeds["odds"],
                )
                quotes.to_csv(out / "inputs" / "odds.csv")
                emit(out / "inputs" / "odds.csv")
            else:
                opath = _resolve(base, str(odds))
                inputs[str(odds)] = _sha256(opath)
                quotes = betting.QuoteStore.from_csv(opath)
            stake = float(bcfg.get("stake", 1.0))
            bdir = out / "backtest"
            bdir.mkdir(exist_ok=True)
            naive = betting.naive_backtest(preds[model], quotes, stake)
            (bdir / "naive.json").write_text(
                json.dumps(
                    {"model": model, "return_pct": naive.return_pct, "wager_fraction": naive.wager_fraction,
                     "total_staked": naive.total_staked, "total_profit": naive.total_profit},
                    indent=2,
                )
                + "\n"
            )
            grid = betting.grid_search_cutoffs(
                preds[model], quotes, int(bcfg.get("n_low", 20)), int(bcfg.get("n_high", 20)), stake
            )
            betting.write_grid(grid, bdir / "grid")
            for f in ("naive.json", "grid_returns.csv", "grid_wager_fraction.csv", "grid.json"):
                emit(bdir / f)

    manifest = {
        "schema": 1,
        "tool_version": __version__,
        "config": {s: dict(cp.items(s, raw=True)) for s in cp.sections()},
        "resolved_hyperparameters": {k: {kk: _jsonable(vv) for kk, vv in v.items()} for k, v in chosen.items()},
        "seeds": seeds,
        "input_digests": inputs,
        "timestamps": {
            "data_first_date": data.games[0].date.isoformat(),
            "data_last_date": data.games[-1].date.isoformat(),
            **({"created": int(os.environ["SOURCE_DATE_EPOCH"])} if "SOURCE_DATE_EPOCH" in os.environ else {}),
        },
        "outputs": {str(p.relative_to(out)): _sha256(p) for p in written},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(out, [str(p.relative_to(out)) for p in written], manifest)


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _write_grid_search(result, path: Path) -> None:
    path.write_text(
        json.dumps(
            {
                "family": result.family,
                "metric": result.metric,
                "validation_seasons": result.folds,
                "cells": [{k: _jsonable(v) for k, v in c.items()} for c in result.grid],
                "scores": result.scores,
                "best": {k: _jsonable(v) for k, v in result.best.items()},
                "failures": {str(k): v for k, v in result.failures.items()},
            },
            indent=2,
        )
        + "\n"
    )


# -- diffing -------------------------------------------------------------------


class DiffError(ValueError):
    pass


@dataclass
class DiffSummary:
    lines: List[str]
    n_files_compared: int
    n_files_differing: int
    n_values_differing: int

    @property
    def ok(self) -> bool:
        return self.n_files_differing == 0

    def render(self) -> str:
        head = f"{self.n_files_compared} files compared, {self.n_files_differing} differ"
        return "\n".join([head, *self.lines]) + "\n"


def _num(s: str) -> Optional[float]:
    try:
        return float(s)
    except ValueError:
        return None


def _close(a: Any, b: Any, tol: float) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if math.isnan(a) and math.isnan(b):
            return True
        return abs(a - b) <= tol
    return a == b


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _diff_csv(a: Path, b: Path, tol: float) -> Tuple[int, List[str]]:
    ra = list(csv.reader(io.StringIO(a.read_text(encoding="utf-8"))))
    rb = list(csv.reader(io.StringIO(b.read_text(encoding="utf-8"))))
    if not ra or not rb or ra[0] != rb[0]:
        raise DiffError(f"{a.name}: incompatible CSV headers")
    notes = []
    if len(ra) != len(rb):
        return 1, [f"row count {len(ra) - 1} vs {len(rb) - 1}"]
    bad = 0
    for i, (x, y) in enumerate(zip(ra[1:], rb[1:]), start=2):
        for j, (u, v) in enumerate(zip(x, y)):
            fu, fv = _num(u), _num(v)
            same = _close(fu, fv, tol) if fu is not None and fv is not None else u == v
            if not same:
                bad += 1
                if len(notes) < 5:
                    notes.append(f"line {i} column {ra[0][j]}: {u} vs {v}")
    return bad, notes


def _diff_json(a: Path, b: Path, tol: float) -> Tuple[int, List[str]]:
    fa = dict(_flatten(json.loads(a.read_text())))
    fb = dict(_flatten(json.loads(b.read_text())))
    bad, notes = 0, []
    for key in sorted(set(fa) | set(fb)):
        if key not in fa or key not in fb or not _close(fa[key], fb[key], tol):
            bad += 1
            if len(notes) < 5:
                notes.append(f"{key}: {fa.get(key, '<missing>')} vs {fb.get(key, '<missing>')}")
    return bad, notes


def diff_reports(run_a, run_b, tolerance: float = 1e-9) -> DiffSummary:
    """Compare every output both manifests declare; numbers match within ``tolerance`` (absolute)."""
    run_a, run_b = Path(run_a), Path(run_b)
    manifests = []
    for d in (run_a, run_b):
        m = d / MANIFEST
        if not m.exists():
            raise DiffError(f"{d}: no {MANIFEST}")
        manifests.append(json.loads(m.read_text()))
    if manifests[0].get("schema") != manifests[1].get("schema"):
        raise DiffError("manifests have different schema versions")
    outs_a, outs_b = manifests[0]["outputs"], manifests[1]["outputs"]
    lines: List[str] = []
    n_files_diff = n_values = 0
    for name in sorted(set(outs_a) | set(outs_b)):
        if name not in outs_a or name not in outs_b:
            n_files_diff += 1
            lines.append(f"{name}: only in {'A' if name in outs_a else 'B'}")
            continue
        if outs_a[name] == outs_b[name]:
            continue
        pa, pb = run_a / name, run_b / name
        if name.endswith(".csv"):
            bad, notes = _diff_csv(pa, pb, tolerance)
        elif name.endswith(".json"):
            bad, notes = _diff_json(pa, pb, tolerance)
        else:
            bad, notes = (0, []) if pa.read_bytes() == pb.read_bytes() else (1, ["binary content differs"])
        if bad:
            n_files_diff += 1
            n_values += bad
            lines.append(f"{name}: {bad} value(s) differ")
            lines += [f"  {n}" for n in notes]
    n_compared = len(set(outs_a) | set(outs_b))
    return DiffSummary(lines, n_compared, n_files_diff, n_values)
