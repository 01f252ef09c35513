"""Command-line entry point: ``ssboost <subcommand> ...``.

Subcommands: generate, bands, train, evaluate, predict, importance, run,
inspect.  Configuration is read from JSON files only.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analysis import (BIN_LOWS, class_bandpower_summary, importance_profile,
                       normalized_variance, temporal_differences)
from .boost import predict_dataset, train_session
from .core import Band, BoostConfig, ChannelSet, DEFAULT_CHANNELS, SessionDataset
from .io import dump_json, load_model, read_eegb, save_model, write_eegb, MAGIC
from .precondition import (BandUniverseSpec, build_universe, generate_band_universe,
                           verify_band_constraints)
from .synthgen import DriftSchedule, PlantSpec, generate_drift_series, generate_session

log = logging.getLogger("ssboost")

MODE_NAMES = ("plain", "sb", "fb", "sfb")


class CliError(Exception):
    pass


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{p}: invalid JSON ({exc})") from exc


def _read_dataset(path, session_index: int = 0) -> SessionDataset:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"file not found: {p}")
    return read_eegb(p, session_index)


def _load_config(path, seed) -> BoostConfig:
    cfg = BoostConfig.from_dict(_read_json(path)) if path else BoostConfig()
    return cfg.replace(rng_seed=seed) if seed is not None else cfg


@contextmanager
def _executor(threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex
    else:
        yield None


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(rows, header, path=None) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _emit(obj, out=None):
    if out:
        dump_json(obj, out)
    else:
        print(json.dumps(obj, sort_keys=True, indent=1))


# --------------------------------------------------------------------------
# spec parsing

def _drift_from_dict(d: dict, seed=None) -> DriftSchedule:
    base = dict(d["base"])
    names = tuple(base.get("channel_names", DEFAULT_CHANNELS))
    base.setdefault("planted_channels", d["start_channels"])
    base.setdefault("planted_band", d["start_band"])
    if seed is not None:
        base["seed"] = seed
    base_spec = PlantSpec.from_dict(base)
    return generate_drift_series(int(d["n_sessions"]), Band(*d["start_band"]), Band(*d["end_band"]),
                                 ChannelSet.from_names(d["start_channels"], names),
                                 ChannelSet.from_names(d["end_channels"], names), base_spec)


def _sessions_from_spec(d: dict, seed=None) -> list:
    """Turn a PlantSpec, DriftSchedule or drift recipe JSON into datasets."""
    if "drift" in d:
        sched = _drift_from_dict(d["drift"], seed)
    elif "sessions" in d:
        sched = DriftSchedule.from_dict(d)
    else:
        spec = dict(d)
        if seed is not None:
            spec["seed"] = seed
        return [generate_session(PlantSpec.from_dict(spec))]
    return [generate_session(s, t) for t, s in enumerate(sched.sessions)]


# --------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    datasets = _sessions_from_spec(_read_json(args.spec), args.seed)
    out = Path(args.out)
    if len(datasets) == 1 and out.suffix:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_eegb(datasets[0], out)
        log.info("wrote %s", out)
    else:
        out.mkdir(parents=True, exist_ok=True)
        for d in datasets:
            write_eegb(d, out / f"session_{d.session_index:02d}.eegb")
        log.info("wrote %d sessions to %s", len(datasets), out)
    return 0


def cmd_bands(args) -> int:
    spec = BandUniverseSpec(**_read_json(args.spec)) if args.spec else BandUniverseSpec()
    bands = generate_band_universe(spec)
    report = verify_band_constraints(bands, spec.global_band)
    _emit({"count": len(bands), "bands": [[b.low_hz, b.high_hz] for b in bands],
           "constraints": report.to_dict()}, args.out)
    return 0


@lru_cache(maxsize=8)
def _universe(mode: str, n_channels: int, min_channels: int) -> tuple:
    return tuple(build_universe(mode, n_channels, BoostConfig(min_channels=min_channels)))


def _train(dataset, mode, config, threads):
    universe = _universe(mode, dataset.n_channels, config.min_channels)
    with _executor(threads) as ex:
        return train_session(dataset, universe, config, executor=ex)


def cmd_train(args) -> int:
    dataset = _read_dataset(args.input)
    config = _load_config(args.config, args.seed)
    model, trace = _train(dataset, args.mode, config, args.threads)
    save_model(model, args.model_out)
    if args.trace_out:
        dump_json(trace.to_dict(), args.trace_out)
    log.info("trained %s model: %d terms, selected_k=%d", args.mode, len(model.terms), model.selected_k)
    return 0


def _confusion(y_true, y_pred) -> dict:
    return {"tp": int(np.sum((y_true == 1) & (y_pred == 1))),
            "tn": int(np.sum((y_true == -1) & (y_pred == -1))),
            "fp": int(np.sum((y_true == -1) & (y_pred == 1))),
            "fn": int(np.sum((y_true == 1) & (y_pred == -1)))}


def cmd_evaluate(args) -> int:
    model = load_model(_existing(args.model))
    dataset = _read_dataset(args.input)
    _, labels = predict_dataset(model, dataset)
    y = dataset.labels
    _emit({"accuracy": float(np.mean(labels == y)), "n_trials": int(y.size),
           "confusion": _confusion(y, labels)}, args.out)
    return 0


def cmd_predict(args) -> int:
    model = load_model(_existing(args.model))
    dataset = _read_dataset(args.input)
    scores, labels = predict_dataset(model, dataset)
    text = _write_csv(zip(range(len(dataset)), scores, labels), ["trial", "score", "label"], args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"file not found: {p}")
    return p


def importance_tables(models, channel_names):
    """CSV rows and drift summary for a session-ordered list of models."""
    profiles = [importance_profile(m, t) for t, m in enumerate(models)]
    header = ["session", *channel_names, *(f"bin_{l}" for l in BIN_LOWS), "variance", "band_com"]
    rows = [[p.session_index, *p.channel_importance, *p.band_importance,
             p.channel_variance, p.band_com] for p in profiles]
    summary = {"n_sessions": len(profiles)}
    if len(profiles) >= 2:
        ch = temporal_differences(profiles, range(len(channel_names)), "channel")
        bd = temporal_differences(profiles, range(len(BIN_LOWS)), "band")
        summary["channels"] = {channel_names[i]: {"differences": v["differences"].tolist(),
                                                  "spearman": v["spearman"], "constant": v["constant"]}
                               for i, v in ch.items()}
        summary["bins"] = {f"bin_{BIN_LOWS[i]}": {"differences": v["differences"].tolist(),
                                                  "spearman": v["spearman"], "constant": v["constant"]}
                           for i, v in bd.items()}
        coms = [p.band_com for p in profiles]
        summary["band_com"] = coms
        summary["band_com_spearman"] = _spearman(coms)
        summary["channel_variance"] = [p.channel_variance for p in profiles]
    return header, rows, summary


def _spearman(series) -> float:
    from scipy import stats

    s = np.asarray(series, dtype=np.float64)
    if s.size < 2 or not np.isfinite(s).all() or np.ptp(s) == 0:
        return 0.0
    return float(stats.spearmanr(np.arange(s.size), s)[0])


def cmd_importance(args) -> int:
    models = [load_model(_existing(p)) for p in args.models]
    if len({m.channel_names for m in models}) != 1:
        raise CliError("models disagree on channel names")
    header, rows, summary = importance_tables(models, list(models[0].channel_names))
    text = _write_csv(rows, header, args.out_csv)
    if not args.out_csv:
        sys.stdout.write(text)
    if args.out_json:
        dump_json(summary, args.out_json)
    return 0


def cmd_inspect(args) -> int:
    p = _existing(args.path)
    with open(p, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        d = read_eegb(p)
        labels = d.labels
        info = {"kind": "eegb", "n_trials": len(d), "n_samples": d.n_samples,
                "n_channels": d.n_channels, "sample_rate_hz": d.sample_rate_hz,
                "channel_names": list(d.channel_names),
                "labels": {"-1": int(np.sum(labels == -1)), "+1": int(np.sum(labels == 1))},
                "problems": []}
        from .core import validate_dataset
        info["problems"] = validate_dataset(d)
    else:
        m = load_model(p)
        info = {"kind": "model", "mode": m.mode, "intercept": m.intercept,
                "n_terms": len(m.terms), "selected_k": m.selected_k,
                "active_terms": [{"alpha": t.alpha, "channels": [m.channel_names[i] for i in
                                                                 t.precondition.channels.indices],
                                  "band": [t.precondition.band.low_hz, t.precondition.band.high_hz]}
                                 for t in m.active_terms]}
    _emit(info, None)
    return 0


# --------------------------------------------------------------------------
# experiment runner

def split_session(d: SessionDataset):
    """First 7/8 of the trials (by order) for training, the rest for testing."""
    n_test = len(d) // 8
    n_train = len(d) - n_test
    return d.subset(range(n_train)), d.subset(range(n_train, len(d)))


def run_experiment(config: dict, out_dir, threads: int = 1, seed=None) -> dict:
    """Train and evaluate every requested mode on every session.

    Returns the accuracy table ``{session: {mode: accuracy}}``.  Outputs are
    staged in a temporary directory and moved into ``out_dir`` only when the
    whole run succeeds.
    """
    modes = [m.lower() for m in config.get("modes", ["plain", "sfb"])]
    bad = [m for m in modes if m not in MODE_NAMES]
    if bad:
        raise CliError(f"unknown modes: {bad}")
    boost = BoostConfig.from_dict(config.get("boost", {}))
    if seed is not None:
        boost = boost.replace(rng_seed=seed)
    if "inputs" in config:
        datasets = [_read_dataset(p, t) for t, p in enumerate(config["inputs"])]
    elif "spec" in config:
        datasets = _sessions_from_spec(config["spec"])
    else:
        raise CliError("experiment config needs 'inputs' or 'spec'")

    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".ssboost-", dir=out_dir.parent))
    try:
        (stage / "models").mkdir()
        (stage / "traces").mkdir()
        table = {}
        models = {m: [] for m in modes}
        bp_rows = []
        bands = generate_band_universe()
        for d in datasets:
            train, test = split_session(d)
            table[d.session_index] = {}
            for mode in modes:
                log.info("session %d mode %s", d.session_index, mode)
                model, trace = _train(train, mode, boost, threads)
                _, labels = predict_dataset(model, test)
                table[d.session_index][mode] = float(np.mean(labels == test.labels))
                stem = f"session_{d.session_index:02d}_{mode}.json"
                save_model(model, stage / "models" / stem)
                dump_json(trace.to_dict(), stage / "traces" / stem)
                models[mode].append(model)
            power = class_bandpower_summary(train, [Band(lo, lo + 5) for lo in range(5, 40, 5)])
            for c, mat in power.items():
                for bi, row in enumerate(mat):
                    for ci, v in enumerate(row):
                        bp_rows.append([d.session_index, c, 5 + 5 * bi, 10 + 5 * bi,
                                        d.channel_names[ci], v])
        _write_csv([[t, *(table[t][m] for m in modes)] for t in sorted(table)],
                   ["session", *modes], stage / "accuracy.csv")
        _write_csv(bp_rows, ["session", "label", "low_hz", "high_hz", "channel", "log_power"],
                   stage / "bandpower.csv")
        for mode in modes:
            header, rows, summary = importance_tables(models[mode], list(datasets[0].channel_names))
            _write_csv(rows, header, stage / f"importance_{mode}.csv")
            dump_json(summary, stage / f"drift_{mode}.json")
        del bands
        if out_dir.exists():
            shutil.rmtree(out_dir)
        stage.rename(out_dir)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return table


def cmd_run(args) -> int:
    config = _read_json(args.config)
    out = args.out or config.get("output_dir")
    if not out:
        raise CliError("no output directory (use --out or 'output_dir')")
    table = run_experiment(config, out, args.threads, args.seed)
    log.info("accuracy: %s", table)
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--verbose", "-v", action="store_true")

    p = argparse.ArgumentParser(prog="ssboost", parents=[common],
                                description="Spatial-spectral precondition boosting.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate synthetic EEGB sessions")
    g.add_argument("--spec", required=True, help="PlantSpec, DriftSchedule or drift recipe JSON")
    g.add_argument("--out", required=True, help="output .eegb file, or directory for several sessions")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bands", parents=[common], help="dump the band universe and constraint report")
    b.add_argument("--spec", help="BandUniverseSpec JSON")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bands)

    t = sub.add_parser("train", parents=[common], help="train a model on one session")
    t.add_argument("--input", required=True)
    t.add_argument("--mode", choices=MODE_NAMES, default="sfb")
    t.add_argument("--config", help="BoostConfig JSON")
    t.add_argument("--model-out", required=True)
    t.add_argument("--trace-out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="accuracy and confusion counts as JSON")
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", parents=[common], help="per-trial scores as CSV")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    im = sub.add_parser("importance", parents=[common], help="importance profiles and drift summary")
    im.add_argument("--models", nargs="+", required=True, help="model files in session order")
    im.add_argument("--out-csv")
    im.add_argument("--out-json")
    im.set_defaults(func=cmd_importance)

    r = sub.add_parser("run", parents=[common], help="run a full experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.set_defaults(func=cmd_run)

    ins = sub.add_parser("inspect", parents=[common], help="summarize an EEGB file or model")
    ins.add_argument("path")
    ins.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"ssboost {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
