import csv
import json
from pathlib import Path

import numpy as np
import pytest

from gustuq import artifact
from gustuq.cli import main

from synth import grid_rows, station_rows, write_grid_file, write_station_file


def run(*args) -> int:
    return main([str(a) for a in args])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One trained model + station/grid inputs shared across CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    station_csv = root / "stations.csv"
    write_station_file(station_csv, n_storms=5, n_stations=3, n_hours=8, seed=14)
    grid_csv = root / "grid.csv"
    write_grid_file(grid_csv, n_storms=1, n_rows=5, n_cols=6, n_hours=4, seed=2)
    train_out = root / "train"
    code = run(
        "train", "--data", station_csv, "--out", train_out, "--split", "3,1,1",
        "--hidden-neurons", "16", "--max-epochs", "30", "--patience", "30",
        "--learning-rate", "0.005", "--evidential-coef", "0.05", "--seed", "5",
    )
    assert code == 0
    return {
        "root": root,
        "station_csv": station_csv,
        "grid_csv": grid_csv,
        "train_out": train_out,
        "model": train_out / "model.json",
    }


# ---------------------------------------------------------------------------
# train


def test_train_outputs(pipeline):
    out = pipeline["train_out"]
    for name in (
        "model.json",
        "epoch_log.csv",
        "split.json",
        "validation_report.json",
        "validation_discard.csv",
        "validation_spread_skill.csv",
        "validation_pit_hist.csv",
    ):
        assert (out / name).exists(), name
    split = json.loads((out / "split.json").read_text())
    assert len(split["train"]) == 3
    assert len(split["validation"]) == 1
    assert len(split["test"]) == 1
    log = read_rows(out / "epoch_log.csv")
    assert 1 <= len(log) <= 30
    assert list(log[0]) == ["epoch", "train_loss", "val_loss", "val_mae"]


def test_train_artifact_round_trip(pipeline):
    model = artifact.load_model(pipeline["model"])
    assert model.feature_names is not None
    assert model.standardizer is not None
    assert model.mlp.output_dim == 4
    # reload and compare serialized form byte for byte
    resaved = pipeline["root"] / "resaved.json"
    artifact.save_model(model, resaved)
    assert resaved.read_bytes() == Path(pipeline["model"]).read_bytes()


def test_train_same_seed_identical_artifacts(pipeline, tmp_path):
    out2 = tmp_path / "train2"
    code = run(
        "train", "--data", pipeline["station_csv"], "--out", out2, "--split", "3,1,1",
        "--hidden-neurons", "16", "--max-epochs", "30", "--patience", "30",
        "--learning-rate", "0.005", "--evidential-coef", "0.05", "--seed", "5",
    )
    assert code == 0
    assert (out2 / "model.json").read_bytes() == Path(pipeline["model"]).read_bytes()


def test_train_missing_target_column_fails(tmp_path, capsys):
    bad = tmp_path / "notarget.csv"
    rows = station_rows(n_storms=2, n_stations=1, n_hours=3)
    for row in rows:
        row[-1] = ""
    write_station_file(bad, rows=rows)
    code = run("train", "--data", bad, "--out", tmp_path / "out", "--split", "1,1,0")
    assert code != 0
    err = capsys.readouterr().err
    assert err.startswith("ingest-error:")
    assert err.count("\n") == 1


# ---------------------------------------------------------------------------
# predict


def test_predict_station_mode(pipeline, tmp_path):
    out = tmp_path / "pred"
    code = run(
        "predict", "--model", pipeline["model"], "--data", pipeline["station_csv"],
        "--out", out, "--levels", "0.70,0.95",
    )
    assert code == 0
    rows = read_rows(out / "predictions.csv")
    assert len(rows) == 5 * 3 * 8
    first = rows[0]
    for col in (
        "station_id", "timestamp_utc", "storm_id", "lat", "lon", "mean",
        "aleatoric_sd", "epistemic_sd", "total_sd",
        "lower_70", "upper_70", "lower_95", "upper_95", "highly_uncertain",
    ):
        assert col in first, col
    mean = np.array([float(r["mean"]) for r in rows])
    total = np.array([float(r["total_sd"]) for r in rows])
    lo95 = np.array([float(r["lower_95"]) for r in rows])
    hi95 = np.array([float(r["upper_95"]) for r in rows])
    assert np.array_equal(hi95, mean + 1.96 * total)
    assert np.array_equal(lo95, mean - 1.96 * total)
    flagged = np.array([int(r["highly_uncertain"]) for r in rows])
    assert flagged.mean() <= 0.05 + 1.0 / len(rows)


def test_predict_feature_mismatch_reports_diff(pipeline, tmp_path, capsys):
    # an artifact trained on a single anonymous feature cannot serve the
    # station schema
    from gustuq.evidential import train_evidential
    from gustuq.nncore import TrainConfig

    rng = np.random.default_rng(0)
    x = rng.normal(size=300)
    y = x + rng.normal(0, 0.1, size=300)
    model, _ = train_evidential(
        x[:200], y[:200], x[200:], y[200:], hidden_sizes=[4],
        config=TrainConfig(max_epochs=2, patience=2, seed=0),
        feature_names=["x"],
    )
    other = tmp_path / "other_model.json"
    artifact.save_model(model, other)
    code = run(
        "predict", "--model", other, "--data", pipeline["station_csv"],
        "--out", tmp_path / "out",
    )
    assert code != 0
    err = capsys.readouterr().err
    assert err.startswith("usage-error:")
    assert "WS_10m" in err and "[x]" in err


def test_predict_grid_mode(pipeline, tmp_path):
    out = tmp_path / "gridpred"
    code = run(
        "predict", "--model", pipeline["model"], "--data", pipeline["grid_csv"],
        "--out", out,
    )
    assert code == 0
    rows = read_rows(out / "grid_predictions.csv")
    assert len(rows) == 5 * 6 * 4
    grads = read_rows(out / "gradient_mean.csv")
    assert len(grads) == 5 * 6 * 4
    assert all(float(g["gradient"]) >= 0 for g in grads)
    norm = read_rows(out / "normalized_fields.csv")
    assert len(norm) == 5 * 6
    values = [float(r["mean_norm"]) for r in norm]
    assert min(values) == 0.0 and max(values) == 1.0


def test_predict_constant_grid_constant_mean_zero_gradient(pipeline, tmp_path):
    const_grid = tmp_path / "const_grid.csv"
    rows = grid_rows(n_storms=1, n_rows=3, n_cols=4, n_hours=2, seed=0)
    for row in rows:
        row[6:] = ["8.0", "10.0", "9.0", "1.0", "0.5", "180.0", "100.0", "1.0", "2.0"]
    write_grid_file(const_grid, rows=rows)
    out = tmp_path / "out"
    with pytest.warns(UserWarning):
        code = run("predict", "--model", pipeline["model"], "--data", const_grid,
                   "--out", out)
    assert code == 0
    pred = read_rows(out / "grid_predictions.csv")
    means = {r["mean"] for r in pred}
    assert len(means) == 1
    grads = read_rows(out / "gradient_mean.csv")
    assert all(float(g["gradient"]) == 0.0 for g in grads)


# ---------------------------------------------------------------------------
# evaluate


def test_evaluate_report_and_per_station(pipeline, tmp_path):
    pred_out = tmp_path / "pred"
    assert run("predict", "--model", pipeline["model"], "--data",
               pipeline["station_csv"], "--out", pred_out) == 0
    eval_out = tmp_path / "eval"
    code = run(
        "evaluate", "--pred", pred_out / "predictions.csv",
        "--data", pipeline["station_csv"], "--out", eval_out,
        "--levels", "0.70,0.95",
    )
    assert code == 0
    report = json.loads((eval_out / "report.json").read_text())
    assert report["n_samples"] == 5 * 3 * 8
    assert set(report["picp"]) == {"0.7", "0.95"}
    assert report["rmse"] ** 2 == pytest.approx(
        report["crmse"] ** 2 + report["bias"] ** 2, rel=1e-9
    )
    stations = read_rows(eval_out / "picp_stations.csv")
    assert len(stations) == 3 * 2  # one row per station per level
    for name in ("discard.csv", "spread_skill.csv", "pit_hist.csv"):
        assert (eval_out / name).exists()


def test_evaluate_perfect_predictions_full_coverage(pipeline, tmp_path):
    pred_out = tmp_path / "pred"
    assert run("predict", "--model", pipeline["model"], "--data",
               pipeline["station_csv"], "--out", pred_out) == 0
    # craft observations equal to the predicted means
    pred_rows = read_rows(pred_out / "predictions.csv")
    by_key = {(r["station_id"], r["timestamp_utc"]): float(r["mean"]) for r in pred_rows}
    obs_csv = tmp_path / "obs.csv"
    src = read_rows(pipeline["station_csv"])
    with open(obs_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(src[0]))
        writer.writeheader()
        for row in src:
            key = (row["station_id"], row["timestamp_utc"])
            row["gust_obs"] = repr(max(0.0, by_key[key]))
            writer.writerow(row)
    eval_out = tmp_path / "eval"
    assert run("evaluate", "--pred", pred_out / "predictions.csv", "--data", obs_csv,
               "--out", eval_out) == 0
    stations = read_rows(eval_out / "picp_stations.csv")
    assert all(float(r["picp"]) == 1.0 for r in stations if r["picp"] != "")


def test_evaluate_empty_join_lists_keys(pipeline, tmp_path, capsys):
    pred_out = tmp_path / "pred"
    assert run("predict", "--model", pipeline["model"], "--data",
               pipeline["station_csv"], "--out", pred_out) == 0
    other_obs = tmp_path / "othertimes.csv"
    rows = station_rows(n_storms=2, n_stations=2, n_hours=3, seed=99)
    for i, row in enumerate(rows):
        row[2] = f"ZZ{i % 2}"  # station ids that never match
    write_station_file(other_obs, rows=rows)
    code = run("evaluate", "--pred", pred_out / "predictions.csv", "--data", other_obs,
               "--out", tmp_path / "eval")
    assert code != 0
    err = capsys.readouterr().err
    assert err.startswith("usage-error:")
    assert "unmatched" in err


# ---------------------------------------------------------------------------
# explain


def test_explain_outputs(pipeline, tmp_path):
    out = tmp_path / "xai"
    code = run(
        "explain", "--model", pipeline["model"], "--data", pipeline["station_csv"],
        "--out", out, "--n-shuffles", "4", "--pdp-grid", "20", "--seed", "3",
    )
    assert code == 0
    pfi = read_rows(out / "pfi.csv")
    assert len(pfi) == 11
    assert {r["feature"] for r in pfi} >= {"WS_10m", "yday", "WindDC_sin"}
    pdp = read_rows(out / "pdp.csv")
    assert len(pdp) == 11 * 20
    ws_rows = [r for r in pdp if r["feature"] == "WS_10m"]
    grid_values = np.array([float(r["grid_value"]) for r in ws_rows])
    assert np.all(np.diff(grid_values) > 0)


def test_explain_threads_match_serial(pipeline, tmp_path):
    out1 = tmp_path / "xai1"
    out2 = tmp_path / "xai2"
    args = ["explain", "--model", pipeline["model"], "--data", pipeline["station_csv"],
            "--n-shuffles", "3", "--pdp-grid", "10", "--seed", "3"]
    assert run(*args, "--out", out1, "--threads", "1") == 0
    assert run(*args, "--out", out2, "--threads", "4") == 0
    assert (out1 / "pdp.csv").read_bytes() == (out2 / "pdp.csv").read_bytes()
    assert (out1 / "pfi.csv").read_bytes() == (out2 / "pfi.csv").read_bytes()


# ---------------------------------------------------------------------------
# spatial


def make_grid_predictions_csv(path, grid_csv, sd_from="WS_10m", shift_cols=0):
    """Craft a grid predictions file whose total_sd mirrors a feature field."""
    rows = read_rows(grid_csv)
    ws = {}
    for r in rows:
        ws[(r["storm_id"], r["timestamp_utc"], int(r["row"]), int(r["col"]))] = float(
            r["WS_10m"]
        )
    n_cols = max(int(r["col"]) for r in rows) + 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["storm_id", "timestamp_utc", "row", "col", "lat", "lon",
             "mean", "aleatoric_sd", "epistemic_sd", "total_sd", "highly_uncertain"]
        )
        for r in rows:
            key = (
                r["storm_id"], r["timestamp_utc"],
                int(r["row"]), (int(r["col"]) + shift_cols) % n_cols,
            )
            writer.writerow(
                [r["storm_id"], r["timestamp_utc"], r["row"], r["col"],
                 r["lat"], r["lon"], "5.0", "0.5", "0.5", repr(ws[key]), "0"]
            )


def test_spatial_alignment_of_identical_fields(pipeline, tmp_path):
    pred_csv = tmp_path / "gp.csv"
    make_grid_predictions_csv(pred_csv, pipeline["grid_csv"])
    out = tmp_path / "spatial"
    code = run("spatial", "--pred", pred_csv, "--data", pipeline["grid_csv"],
               "--out", out, "--align-k", "0,1")
    assert code == 0
    alignment = json.loads((out / "alignment.json").read_text())
    assert alignment["G00"]["0"] == 1.0
    tracks = read_rows(out / "max_tracks.csv")
    assert len(tracks) == 4  # one per hour
    for row in tracks:
        assert (row["wind_row"], row["wind_col"]) == (row["uq_row"], row["uq_col"])
    series = read_rows(out / "normalized_series.csv")
    ws_norm = [float(r["wind_max_norm"]) for r in series]
    assert min(ws_norm) == 0.0 and max(ws_norm) == 1.0


def test_spatial_shifted_copy_alignment(pipeline, tmp_path):
    pred_csv = tmp_path / "gp_shift.csv"
    make_grid_predictions_csv(pred_csv, pipeline["grid_csv"], shift_cols=2)
    out = tmp_path / "spatial"
    code = run("spatial", "--pred", pred_csv, "--data", pipeline["grid_csv"],
               "--out", out, "--align-k", "0,1,2,3")
    assert code == 0
    alignment = json.loads((out / "alignment.json").read_text())["G00"]
    assert alignment["1"] == 0.0
    assert alignment["2"] == 1.0


def test_spatial_missing_total_sd_is_usage_error(pipeline, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    with open(bad, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["storm_id", "timestamp_utc", "row", "col", "lat", "lon", "mean"])
        writer.writerow(["G00", "2020-01-01T00:00:00Z", 0, 0, "41.0", "-74.0", "5.0"])
    code = run("spatial", "--pred", bad, "--data", pipeline["grid_csv"],
               "--out", tmp_path / "out")
    assert code != 0
    assert capsys.readouterr().err.startswith("usage-error:")


# ---------------------------------------------------------------------------
# tune


def test_tune_cli(pipeline, tmp_path):
    out = tmp_path / "tune"
    config = tmp_path / "tune.json"
    config.write_text(json.dumps({
        "space": {
            "learning_rate": [1e-3, 1e-2],
            "hidden_neurons": [4, 8],
            "hidden_layers": [1, 1],
            "batch_size": [32, 64],
            "dropout": [0.0, 0.1],
            "evidential_coef": [0.01, 0.5],
            "l1": [1e-12, 1e-10],
            "l2": [1e-12, 1e-10],
        },
        "trials": 4,
        "max_epochs": 5,
        "patience": 5,
    }))
    code = run("tune", "--config", config, "--data", pipeline["station_csv"],
               "--out", out, "--split", "3,1,1", "--seed", "9")
    assert code == 0
    log = read_rows(out / "trials_log.csv")
    assert len(log) == 4
    pareto = json.loads((out / "pareto.json").read_text())
    assert pareto["n_trials"] == 4
    assert len(pareto["pareto"]) >= 1
    assert "recommended" in pareto
    # resume with a larger budget appends only the new trials
    code = run("tune", "--config", config, "--data", pipeline["station_csv"],
               "--out", out, "--split", "3,1,1", "--seed", "9", "--trials", "6")
    assert code == 0
    log2 = read_rows(out / "trials_log.csv")
    assert len(log2) == 6
    assert [r["trial_id"] for r in log2[:4]] == [r["trial_id"] for r in log]


# ---------------------------------------------------------------------------
# config precedence, errors, hygiene


def test_config_file_and_flag_precedence(pipeline, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"levels": [0.9], "mask_percentile": 90}))
    out = tmp_path / "pred"
    code = run("predict", "--config", config, "--model", pipeline["model"],
               "--data", pipeline["station_csv"], "--out", out, "--levels", "0.99")
    assert code == 0
    rows = read_rows(out / "predictions.csv")
    assert "lower_99" in rows[0]       # flag wins over config file
    assert "lower_90" not in rows[0]


def test_unknown_config_key_rejected(pipeline, tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"bogus_key": 1}))
    code = run("predict", "--config", config, "--model", pipeline["model"],
               "--data", pipeline["station_csv"], "--out", tmp_path / "o")
    assert code != 0
    assert "bogus_key" in capsys.readouterr().err


def test_missing_input_file_one_line_error(tmp_path, capsys):
    code = run("train", "--data", tmp_path / "nope.csv", "--out", tmp_path / "out")
    assert code != 0
    err = capsys.readouterr().err
    assert err.count("\n") == 1
    assert err.split(":")[0] in {"io-error", "ingest-error", "usage-error"}


def test_unexpected_failure_still_one_line(pipeline, tmp_path, capsys):
    # a negative seed reaches numpy's generator and blows up there; the CLI
    # must still emit a single machine-parsable line
    code = run("train", "--data", pipeline["station_csv"], "--out", tmp_path / "o",
               "--split", "3,1,1", "--max-epochs", "1", "--seed", "-4")
    assert code != 0
    err = capsys.readouterr().err
    assert err.count("\n") == 1
    assert err.split(":")[0] in {"internal-error", "usage-error", "config-error"}


def test_no_temp_files_left_behind(pipeline):
    leftovers = list(Path(pipeline["train_out"]).glob("*.tmp"))
    assert leftovers == []


def test_end_to_end_determinism(pipeline, tmp_path):
    outputs = []
    for tag in ("a", "b"):
        t_out = tmp_path / f"train_{tag}"
        p_out = tmp_path / f"pred_{tag}"
        e_out = tmp_path / f"eval_{tag}"
        assert run("train", "--data", pipeline["station_csv"], "--out", t_out,
                   "--split", "3,1,1", "--hidden-neurons", "8", "--max-epochs", "10",
                   "--patience", "10", "--seed", "21") == 0
        assert run("predict", "--model", t_out / "model.json",
                   "--data", pipeline["station_csv"], "--out", p_out) == 0
        assert run("evaluate", "--pred", p_out / "predictions.csv",
                   "--data", pipeline["station_csv"], "--out", e_out) == 0
        outputs.append((t_out, p_out, e_out))
    (ta, pa, ea), (tb, pb, eb) = outputs
    for da, db in ((ta, tb), (pa, pb), (ea, eb)):
        files_a = sorted(f.name for f in da.iterdir())
        files_b = sorted(f.name for f in db.iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (da / name).read_bytes() == (db / name).read_bytes(), name
