import csv
import json

import numpy as np
import pytest

from conftest import synth_cached
from vocalscreen.audio_io import MetadataRow, save_wav, write_metadata
from vocalscreen.cli import main
from vocalscreen.dysphonia import feature_names, read_feature_csv, write_feature_csv
from vocalscreen.dysphonia.extract import FeatureMatrix
from vocalscreen.errors import ConvergenceError, InputError


def rows(path):
    with open(path) as fh:
        return [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))]


@pytest.fixture
def feature_file(tmp_path):
    rng = np.random.default_rng(0)
    n = 50
    y = np.repeat([1, 0], n // 2)
    X = rng.standard_normal((n, 307))
    X[:, [4, 40, 200]] += 2.0 * y[:, None]
    X[3, 7] = np.nan
    fm = FeatureMatrix(X, [f"p{i:02d}_1" for i in range(n)], ["PD" if v else "HC" for v in y],
                       [float(a) for a in rng.uniform(40, 80, n)], ["M"] * n)
    p = tmp_path / "features.csv"
    write_feature_csv(fm, p, "test")
    return p


# -- usage ------------------------------------------------------------------------------

def test_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(["eval", "--bogus"]) == 1
    assert main(["eval", "--features", "f.csv", "--out", "o", "--reps", "x"]) == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("no_such_key = 3\n")
    assert main(["eval", "--config", str(cfg), "--out", "o"]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_error_exit_codes():
    assert InputError("x").exit_code == 2
    assert ConvergenceError("x", lam=0.1).exit_code == 3


def test_config_file_and_override(tmp_path, feature_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# eval settings\nfeatures = {feature_file}\nmodel-type = nb\n"
                   "reps = 2\nfolds = 5\n")
    out = tmp_path / "r.json"
    assert main(["eval", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["model"] == "nb" and len(doc["iterations"]) == 10
    assert main(["eval", "--config", str(cfg), "--reps", "1", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["iterations"]) == 5


# -- extraction ---------------------------------------------------------------------------

def test_extract_gates_short_recording(tmp_path, caplog):
    wav = tmp_path / "wav"
    wav.mkdir()
    meta = []
    for i in range(10):
        dur = 1.5 if i == 6 else 2.5
        rec = synth_cached(duration=dur, jitter_pct=0.5 + 0.2 * i, seed=i)
        save_wav(rec, wav / f"r{i}.wav")
        meta.append(MetadataRow(f"r{i}", f"wav/r{i}.wav", "PD" if i % 2 else "HC", 60.0, "F"))
    write_metadata(meta, tmp_path / "meta.csv")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["extract", "--metadata", str(tmp_path / "meta.csv"), "--threads", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert "r6: rejected" in caplog.text
    fm = read_feature_csv(a)
    assert len(fm) == 9 and "r6" not in fm.ids and fm.values.shape[1] == 307
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("# vocalscreen ")


def test_extract_without_usable_recordings(tmp_path):
    meta = tmp_path / "meta.csv"
    write_metadata([], meta)
    assert main(["extract", "--metadata", str(meta), "--out", str(tmp_path / "o.csv")]) == 2
    assert main(["extract", "--metadata", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path / "o.csv")]) == 2


# -- analysis commands ------------------------------------------------------------------

def test_pipeline_sizes_and_outputs(tmp_path, feature_file):
    out = tmp_path / "run"
    args = ["pipeline", "--features", str(feature_file), "--reps", "1", "--folds", "2",
            "--sizes", "5,10", "--n-trees", "10", "--top-k", "10", "--out-dir", str(out),
            "--threads", "1"]
    assert main(args) == 0
    sweep = rows(out / "sweep.csv")
    assert len(sweep) == 1 + 10
    assert {r[0] for r in sweep[1:]} == {"mRMR", "GSO", "RELIEF", "LASSO", "Ensemble"}
    rep = json.loads((out / "report.json").read_text())
    summary = rep["cohorts"]["all"]["summary"]
    assert set(summary) == {"RF", "NB", "random"}
    for alg in ("mRMR", "GSO", "RELIEF", "LASSO", "Ensemble"):
        assert (out / f"tally_{alg}.csv").exists()


def test_pipeline_female_cohort_without_females(tmp_path, feature_file):
    assert main(["pipeline", "--features", str(feature_file), "--cohort", "female",
                 "--out-dir", str(tmp_path / "o")]) == 2


def test_train_and_predict(tmp_path, feature_file):
    model = tmp_path / "m.json"
    pred = tmp_path / "p.csv"
    assert main(["train", "--features", str(feature_file), "--n-trees", "15",
                 "--out", str(model)]) == 0
    assert main(["predict", "--model", str(model), "--features", str(feature_file),
                 "--out", str(pred)]) == 0
    out = rows(pred)
    assert out[0] == ["id", "predicted", "probability_pd", "tie"] and len(out) == 51
    assert all(r[1] in ("PD", "HC") and 0 <= float(r[2]) <= 1 for r in out[1:])
    assert main(["predict", "--model", str(tmp_path / "missing.json"), "--features",
                 str(feature_file), "--out", str(pred)]) == 2


def test_select_then_eval_subset(tmp_path, feature_file):
    sel = tmp_path / "sel"
    assert main(["select", "--features", str(feature_file), "--reps", "1", "--folds", "2",
                 "--top-k", "5", "--out-dir", str(sel)]) == 0
    out = tmp_path / "e.json"
    assert main(["eval", "--features", str(feature_file), "--rankings", str(sel / "rankings.csv"),
                 "--algorithm", "GSO", "--n-features", "3", "--model-type", "rf",
                 "--n-trees", "10", "--reps", "1", "--folds", "5", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["n_features"] == 3
    assert main(["sweep", "--features", str(feature_file), "--rankings", str(sel / "rankings.csv"),
                 "--sizes", "400", "--out", str(tmp_path / "s.csv")]) == 2


def test_stats_outputs(tmp_path, feature_file):
    out = tmp_path / "st"
    assert main(["stats", "--features", str(feature_file), "--reps", "10", "--top", "3",
                 "--out-dir", str(out)]) == 0
    st = rows(out / "stats.csv")
    assert len(st) == 1 + 307
    assert {int(r[0]) for r in st[1:4]} <= {4, 40, 200}
    assert len(rows(out / "age_association.csv")) == 4
    assert len(list(out.glob("age_scatter_*.csv"))) == 3


def test_synth_and_pitch(tmp_path):
    wav = tmp_path / "s.wav"
    assert main(["synth", "--spec", "f0=150,jitter=1", "--duration", "2.5", "--label", "PD",
                 "--out", str(wav)]) == 0
    assert (tmp_path / "s.csv").exists()
    out = tmp_path / "f0.csv"
    assert main(["pitch", "--wav", str(wav), "--out", str(out)]) == 0
    f0 = np.array([float(r[1]) for r in rows(out)[1:]])
    assert abs(np.median(f0[f0 > 0]) - 150) < 3
    assert main(["synth", "--spec", "f0=20", "--out", str(wav)]) == 2
