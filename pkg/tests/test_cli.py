import csv
import json

import numpy as np
import pytest

import direct_pipeline as ref
from ssboost.cli import main, split_session
from ssboost.core import Precondition
from ssboost.io import read_eegb

BASE = {"planted_channels": ["C3", "CP3"], "planted_band": [8, 13], "snr": 5.0, "n_trials": 48,
        "n_samples": 256, "seed": 1}
FAST = {"k_max": 3, "candidate_sample_size": 16}


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_generate_train_evaluate_predict(tmp_path, capsys):
    spec = _write(tmp_path / "spec.json", BASE)
    data = str(tmp_path / "s.eegb")
    assert main(["generate", "--spec", spec, "--out", data]) == 0
    assert len(read_eegb(data)) == 48
    cfg = _write(tmp_path / "cfg.json", FAST)
    model = str(tmp_path / "m.json")
    trace = tmp_path / "t.json"
    assert main(["train", "--input", data, "--mode", "fb", "--config", cfg, "--seed", "3",
                 "--model-out", model, "--trace-out", str(trace)]) == 0
    assert len(json.loads(trace.read_text())["records"]) == 3
    capsys.readouterr()
    assert main(["evaluate", "--model", model, "--input", data]) == 0
    out = json.loads(capsys.readouterr().out)
    c = out["confusion"]
    assert c["tp"] + c["tn"] + c["fp"] + c["fn"] == 48
    assert out["accuracy"] == pytest.approx((c["tp"] + c["tn"]) / 48)
    pred = tmp_path / "p.csv"
    assert main(["predict", "--model", model, "--input", data, "--out", str(pred)]) == 0
    rows = _rows(pred)
    assert rows[0] == ["trial", "score", "label"] and len(rows) == 49
    assert main(["inspect", data]) == 0
    assert json.loads(capsys.readouterr().out)["n_trials"] == 48
    assert main(["inspect", model]) == 0
    assert json.loads(capsys.readouterr().out)["mode"] == "FB"


def test_generate_drift_directory(tmp_path):
    spec = _write(tmp_path / "d.json", {"drift": {
        "n_sessions": 3, "start_band": [25, 35], "end_band": [10, 20],
        "start_channels": ["C3", "CP3"], "end_channels": ["C4", "CP4"],
        "base": {k: v for k, v in BASE.items() if k not in ("planted_channels", "planted_band")}}})
    out = tmp_path / "sessions"
    assert main(["generate", "--spec", spec, "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["session_00.eegb", "session_01.eegb",
                                                    "session_02.eegb"]


def test_importance_command(tmp_path):
    data = str(tmp_path / "s.eegb")
    main(["generate", "--spec", _write(tmp_path / "spec.json", BASE), "--out", data])
    cfg = _write(tmp_path / "cfg.json", FAST)
    models = []
    for seed in range(2):
        m = str(tmp_path / f"m{seed}.json")
        main(["train", "--input", data, "--mode", "sfb", "--config", cfg, "--seed", str(seed),
              "--model-out", m])
        models.append(m)
    out_csv, out_json = tmp_path / "imp.csv", tmp_path / "drift.json"
    assert main(["importance", "--models", *models, "--out-csv", str(out_csv),
                 "--out-json", str(out_json)]) == 0
    rows = _rows(out_csv)
    assert rows[0][0] == "session" and rows[0][-2:] == ["variance", "band_com"]
    assert len(rows[0]) == 1 + 12 + 35 + 2 and len(rows) == 3
    summary = json.loads(out_json.read_text())
    assert set(summary["channels"]) == set(rows[0][1:13])


def _experiment(tmp_path, n_sessions=7, modes=("plain", "sfb")):
    base = {k: v for k, v in BASE.items() if k not in ("planted_channels", "planted_band")}
    return {"spec": {"drift": {"n_sessions": n_sessions, "start_band": [25, 35], "end_band": [10, 20],
                               "start_channels": ["C3", "CP3"], "end_channels": ["C4", "CP4"],
                               "base": base}},
            "modes": list(modes), "boost": FAST}


def test_run_experiment_outputs(tmp_path):
    cfg = _write(tmp_path / "exp.json", _experiment(tmp_path))
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "accuracy.csv")
    assert rows[0] == ["session", "plain", "sfb"] and len(rows) == 8
    assert len(list((out / "models").iterdir())) == 14
    assert (out / "importance_sfb.csv").exists() and (out / "drift_sfb.json").exists()
    assert (out / "bandpower.csv").exists()


def test_run_plain_matches_direct_pipeline(tmp_path):
    cfg = _write(tmp_path / "exp.json", _experiment(tmp_path, n_sessions=2, modes=("plain",)))
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    acc = [float(r[1]) for r in _rows(out / "accuracy.csv")[1:]]
    from ssboost.cli import _sessions_from_spec
    from ssboost.boost import stratified_split
    datasets = _sessions_from_spec(_experiment(tmp_path, 2)["spec"])
    prec = Precondition.plain(12)
    for d, a in zip(datasets, acc):
        train, test = split_session(d)
        ss = np.random.SeedSequence(0)
        tr, _ = stratified_split(train.labels, 0.1, np.random.default_rng(ss.spawn(4)[0]))
        model = ref.fit([train.trials[i] for i in tr], prec, 256.0)
        g = ref.decision(model, test.trials, prec, 256.0)
        y = train.labels[tr]
        f = np.where(ref.decision(model, [train.trials[i] for i in tr], prec, 256.0) >= 0, 1, -1)
        alpha = (y - y.mean()) @ f / f.size
        pred = np.where(y.mean() + alpha * np.where(g >= 0, 1, -1) >= 0, 1, -1)
        assert a == pytest.approx(np.mean(pred == test.labels))


def test_run_missing_input_fails_cleanly(tmp_path, capsys):
    missing = tmp_path / "nope.eegb"
    cfg = _write(tmp_path / "exp.json", {"inputs": [str(missing)], "modes": ["plain"]})
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) != 0
    assert str(missing) in capsys.readouterr().err
    assert not out.exists()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".ssboost-")]


def test_run_is_reproducible(tmp_path):
    cfg = _write(tmp_path / "exp.json", _experiment(tmp_path, n_sessions=2, modes=("fb",)))
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", cfg, "--out", str(a)])
    main(["run", "--config", cfg, "--out", str(b), "--threads", "3"])
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


def test_bad_config_reports_error(tmp_path, capsys):
    data = str(tmp_path / "s.eegb")
    main(["generate", "--spec", _write(tmp_path / "spec.json", BASE), "--out", data])
    cfg = _write(tmp_path / "cfg.json", {"k_max": 3, "unknown": 1})
    assert main(["train", "--input", data, "--config", cfg, "--model-out", str(tmp_path / "m")]) == 2
    assert "unknown" in capsys.readouterr().err
