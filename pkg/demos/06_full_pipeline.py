#!/usr/bin/env python3
"""The whole command-line pipeline on a synthetic storm archive.

Generates a station CSV (several storms, a few stations, hourly rows with a
learnable gust signal) plus a gridded feature file, then drives the CLI:

    train -> predict (station + grid) -> evaluate -> explain -> spatial

Everything lands in a scratch directory printed at the end.
"""

import csv
import json
import tempfile
from pathlib import Path

import numpy as np

from gustuq.cli import main

out_root = Path(tempfile.mkdtemp(prefix="gustuq_demo_"))
rng = np.random.default_rng(8)

# ---------------------------------------------------------------- inputs
station_csv = out_root / "stations.csv"
header = ["storm_id", "timestamp_utc", "station_id", "lat", "lon",
          "WS_10m", "WS_850mb", "WS_950mb", "PBLH", "Ustar", "wind_dir_deg",
          "terrain_height_m", "lapse_sfc_1km", "lapse_sfc_2km", "gust_obs"]
with open(station_csv, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(header)
    start = np.datetime64("2021-01-01T00:00:00")
    for s in range(6):
        for st in range(4):
            for h in range(10):
                ts = start + np.timedelta64(s * 96 + h, "h")
                ws10 = rng.uniform(3, 24)
                ustar = rng.uniform(0.1, 1.4)
                gust = max(0.0, 1.1 * ws10 + 3.0 * ustar + rng.normal(0, 1.2))
                writer.writerow([
                    f"storm{s}", str(ts) + "Z", f"stn{st}",
                    41.0 + 0.3 * st, -73.5 + 0.2 * st,
                    ws10, ws10 + rng.uniform(0, 10), ws10 + rng.uniform(0, 6),
                    rng.uniform(0.1, 2.2), ustar, rng.uniform(0, 360),
                    rng.uniform(0, 900), rng.uniform(-9, 9), rng.uniform(-9, 9),
                    gust,
                ])

grid_csv = out_root / "grid.csv"
with open(grid_csv, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(header[:2] + ["row", "col"] + header[3:5] + header[5:14])
    start = np.datetime64("2021-06-01T00:00:00")
    for h in range(5):
        for r in range(6):
            for c in range(7):
                bump = 15 * np.exp(-0.4 * ((r - h) ** 2 + (c - h) ** 2))
                ws10 = 5 + bump + rng.uniform(0, 0.5)
                writer.writerow([
                    "gridstorm", str(start + np.timedelta64(h, "h")) + "Z", r, c,
                    41.0 + 0.25 * r, -74.0 + 0.25 * c,
                    ws10, ws10 + rng.uniform(0, 8), ws10 + rng.uniform(0, 5),
                    rng.uniform(0.1, 2.0), rng.uniform(0.1, 1.2), rng.uniform(0, 360),
                    rng.uniform(0, 700), rng.uniform(-8, 8), rng.uniform(-8, 8),
                ])


def run(*args):
    argv = [str(a) for a in args]
    print(f"\n$ gustuq {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"command failed with exit code {code}"


# ---------------------------------------------------------------- pipeline
run("train", "--data", station_csv, "--out", out_root / "model",
    "--split", "4,1,1", "--hidden-neurons", "32", "--batch-size", "32",
    "--max-epochs", "400", "--patience", "400", "--learning-rate", "0.01",
    "--evidential-coef", "0.02", "--seed", "1")
model = out_root / "model" / "model.json"

run("predict", "--model", model, "--data", station_csv,
    "--out", out_root / "pred_station", "--levels", "0.70,0.95")
run("predict", "--model", model, "--data", grid_csv, "--out", out_root / "pred_grid")
run("evaluate", "--pred", out_root / "pred_station" / "predictions.csv",
    "--data", station_csv, "--out", out_root / "eval")
run("explain", "--model", model, "--data", station_csv,
    "--out", out_root / "xai", "--n-shuffles", "5", "--pdp-grid", "30")
run("spatial", "--pred", out_root / "pred_grid" / "grid_predictions.csv",
    "--data", grid_csv, "--out", out_root / "spatial")

# ---------------------------------------------------------------- a look
report = json.loads((out_root / "eval" / "report.json").read_text())
print("\n=== evaluation summary ===")
print(f"samples {report['n_samples']}, bias {report['bias']:+.2f} m/s, "
      f"RMSE {report['rmse']:.2f} m/s, r {report['pearson_r']:.3f}")
print("PICP by level:", report["picp"])
print(f"PITD skill (total): {report['pitd']['total']['skill']:.3f}")
print(f"spread-skill R2: {report['r2_rmse_sigma_total']}")

alignment = json.loads((out_root / "spatial" / "alignment.json").read_text())
print("\nwind-vs-uncertainty max alignment:", alignment["gridstorm"])

with open(out_root / "xai" / "pfi.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
rows.sort(key=lambda r: float(r["delta_rmse_mean"]), reverse=True)
print("\ntop features by permutation importance:")
for row in rows[:3]:
    print(f"  {row['feature']:>15}: dRMSE {float(row['delta_rmse_mean']):+.3f}")

print(f"\nall artifacts under {out_root}")
