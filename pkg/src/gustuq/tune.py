"""Multi-objective random search over the training hyperparameter space.

Each trial draws an independent configuration, trains a model, and records
three validation objectives: MAE (minimize), the spread-skill R^2 between
binned RMSE and total uncertainty (maximize), and the PITD skill score
(maximize). The result is the non-dominated set under those objectives plus
one scalarized recommendation. Trials derive their RNG streams from the
master seed and their index, so a search is reproducible and resumable from
its append-only log.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import GustUQError, SearchFailure, UsageError
from .metrics import pit_values, pitd, spread_skill
from .nncore import TrainConfig


@dataclass
class HyperSpace:
    """Sampling bounds; log-scaled dimensions are drawn log-uniformly."""

    learning_rate: tuple[float, float] = (1e-6, 0.01)  # log-uniform
    dropout: tuple[float, float] = (0.0, 0.5)  # uniform
    hidden_layers: tuple[int, int] = (1, 5)  # integer uniform
    hidden_neurons: tuple[int, int] = (1, 1000)  # integer uniform
    batch_size: tuple[int, int] = (10, 20000)  # log-uniform integer
    evidential_coef: tuple[float, float] = (1e-5, 100.0)  # log-uniform
    l1: tuple[float, float] = (1e-12, 0.01)  # log-uniform
    l2: tuple[float, float] = (1e-12, 0.01)  # log-uniform

    def validate(self) -> None:
        for f in dc_fields(self):
            lo, hi = getattr(self, f.name)
            if not lo <= hi:
                raise UsageError(f"{f.name}: lower bound {lo} exceeds upper bound {hi}")
        for name in ("learning_rate", "batch_size", "evidential_coef", "l1", "l2"):
            if getattr(self, name)[0] <= 0:
                raise UsageError(f"{name} is log-scaled and needs positive bounds")


@dataclass
class TrialConfig:
    learning_rate: float
    dropout: float
    hidden_layers: int
    hidden_neurons: int
    batch_size: int
    evidential_coef: float
    l1: float
    l2: float


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo == hi:
        return float(lo)
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample(space: HyperSpace, rng: np.random.Generator) -> TrialConfig:
    """Draw one configuration, each dimension independently."""
    space.validate()
    batch = int(round(_log_uniform(rng, *space.batch_size)))
    return TrialConfig(
        learning_rate=_log_uniform(rng, *space.learning_rate),
        dropout=float(rng.uniform(*space.dropout)),
        hidden_layers=int(rng.integers(space.hidden_layers[0], space.hidden_layers[1] + 1)),
        hidden_neurons=int(rng.integers(space.hidden_neurons[0], space.hidden_neurons[1] + 1)),
        batch_size=int(np.clip(batch, *space.batch_size)),
        evidential_coef=_log_uniform(rng, *space.evidential_coef),
        l1=_log_uniform(rng, *space.l1),
        l2=_log_uniform(rng, *space.l2),
    )


@dataclass
class TrialResult:
    trial_id: int
    config: TrialConfig
    val_mae: float = float("nan")
    val_r2_rmse_sigma_total: float = float("nan")
    val_pitd_skill: float = float("nan")
    n_epochs: int = 0
    wall_time_s: float = 0.0
    status: str = "ok"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def dominates(a: TrialResult, b: TrialResult) -> bool:
    """True when ``a`` is at least as good on all three objectives and
    strictly better on at least one (MAE down, R^2 up, PITD skill up)."""
    at_least = (
        a.val_mae <= b.val_mae
        and a.val_r2_rmse_sigma_total >= b.val_r2_rmse_sigma_total
        and a.val_pitd_skill >= b.val_pitd_skill
    )
    strictly = (
        a.val_mae < b.val_mae
        or a.val_r2_rmse_sigma_total > b.val_r2_rmse_sigma_total
        or a.val_pitd_skill > b.val_pitd_skill
    )
    return at_least and strictly


def pareto_front(trials: list[TrialResult]) -> list[TrialResult]:
    """Non-dominated subset of the successful trials (archive sweep)."""
    front: list[TrialResult] = []
    for trial in trials:
        if not trial.ok:
            continue
        if any(dominates(other, trial) for other in front):
            continue
        front = [other for other in front if not dominates(trial, other)]
        front.append(trial)
    return sorted(front, key=lambda t: t.trial_id)


def scalarized_best(
    trials: list[TrialResult], weight: float = 0.5
) -> TrialResult:
    """Single recommendation: minimize MAE - weight*(R^2 + PITD skill)."""
    ok = [t for t in trials if t.ok]
    if not ok:
        raise SearchFailure("no successful trials to choose from")
    key = lambda t: t.val_mae - weight * (t.val_r2_rmse_sigma_total + t.val_pitd_skill)
    return min(ok, key=key)


@dataclass
class SearchResult:
    trials: list[TrialResult]
    pareto: list[TrialResult]
    best: TrialResult
    n_failed: int


TRIALS_LOG_COLUMNS = [
    "trial_id",
    "learning_rate",
    "dropout",
    "hidden_layers",
    "hidden_neurons",
    "batch_size",
    "evidential_coef",
    "l1",
    "l2",
    "val_mae",
    "val_r2_rmse_sigma_total",
    "val_pitd_skill",
    "n_epochs",
    "wall_time_s",
    "status",
]


def _log_row(result: TrialResult) -> list:
    cfg = result.config
    num = lambda v: "" if isinstance(v, float) and np.isnan(v) else repr(float(v))
    return [
        result.trial_id,
        repr(cfg.learning_rate),
        repr(cfg.dropout),
        cfg.hidden_layers,
        cfg.hidden_neurons,
        cfg.batch_size,
        repr(cfg.evidential_coef),
        repr(cfg.l1),
        repr(cfg.l2),
        num(result.val_mae),
        num(result.val_r2_rmse_sigma_total),
        num(result.val_pitd_skill),
        result.n_epochs,
        repr(result.wall_time_s),
        result.status,
    ]


def load_trials_log(path) -> list[TrialResult]:
    """Read back an append-only trials log (used for resuming a search)."""
    results = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != TRIALS_LOG_COLUMNS:
            raise UsageError(f"{path}: unexpected trials log header")
        for row in reader:
            cfg = TrialConfig(
                learning_rate=float(row["learning_rate"]),
                dropout=float(row["dropout"]),
                hidden_layers=int(row["hidden_layers"]),
                hidden_neurons=int(row["hidden_neurons"]),
                batch_size=int(row["batch_size"]),
                evidential_coef=float(row["evidential_coef"]),
                l1=float(row["l1"]),
                l2=float(row["l2"]),
            )
            blank = lambda s: float("nan") if s == "" else float(s)
            results.append(
                TrialResult(
                    trial_id=int(row["trial_id"]),
                    config=cfg,
                    val_mae=blank(row["val_mae"]),
                    val_r2_rmse_sigma_total=blank(row["val_r2_rmse_sigma_total"]),
                    val_pitd_skill=blank(row["val_pitd_skill"]),
                    n_epochs=int(row["n_epochs"]),
                    wall_time_s=float(row["wall_time_s"]),
                    status=row["status"],
                )
            )
    return results


# An objective maps (config, rng) -> (val_mae, val_r2, val_pitd_skill, n_epochs).
Objective = Callable[[TrialConfig, np.random.Generator], tuple[float, float, float, int]]


def search(
    space: HyperSpace,
    n_trials: int,
    objective: Objective,
    seed: int = 0,
    log_path=None,
    scalarization_weight: float = 0.5,
) -> SearchResult:
    """Run (or resume) a seeded random search and filter the Pareto set.

    Each trial's RNG stream is derived from ``(seed, trial_id)``, so results
    do not depend on execution order and a partially written log can be
    resumed without repeating completed trials.
    """
    if n_trials < 1:
        raise UsageError("need at least one trial")
    space.validate()

    done: dict[int, TrialResult] = {}
    if log_path is not None and Path(log_path).exists():
        for result in load_trials_log(log_path):
            done[result.trial_id] = result

    log_fh = None
    writer = None
    if log_path is not None:
        fresh = not Path(log_path).exists()
        log_fh = open(log_path, "a", newline="")
        writer = csv.writer(log_fh)
        if fresh:
            writer.writerow(TRIALS_LOG_COLUMNS)
            log_fh.flush()

    try:
        results: list[TrialResult] = []
        for trial_id in range(n_trials):
            if trial_id in done:
                results.append(done[trial_id])
                continue
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(trial_id,))
            )
            config = sample(space, rng)
            started = time.perf_counter()
            try:
                mae, r2, skill, n_epochs = objective(config, rng)
                result = TrialResult(
                    trial_id=trial_id,
                    config=config,
                    val_mae=float(mae),
                    val_r2_rmse_sigma_total=float(r2),
                    val_pitd_skill=float(skill),
                    n_epochs=int(n_epochs),
                    wall_time_s=time.perf_counter() - started,
                )
                if not (
                    np.isfinite(result.val_mae)
                    and np.isfinite(result.val_r2_rmse_sigma_total)
                    and np.isfinite(result.val_pitd_skill)
                ):
                    result.status = "failed"
                    result.message = "non-finite objective"
            except GustUQError as exc:
                result = TrialResult(
                    trial_id=trial_id,
                    config=config,
                    wall_time_s=time.perf_counter() - started,
                    status="failed",
                    message=str(exc),
                )
            results.append(result)
            if writer is not None:
                writer.writerow(_log_row(result))
                log_fh.flush()
    finally:
        if log_fh is not None:
            log_fh.close()

    n_failed = sum(1 for r in results if not r.ok)
    if n_failed == len(results):
        raise SearchFailure(f"all {len(results)} trials failed")
    front = pareto_front(results)
    best = scalarized_best(results, weight=scalarization_weight)
    return SearchResult(trials=results, pareto=front, best=best, n_failed=n_failed)


def make_evidential_objective(
    train_features: np.ndarray,
    train_targets: np.ndarray,
    val_features: np.ndarray,
    val_targets: np.ndarray,
    max_epochs: int = 200,
    patience: int = 10,
    pit_bins: int = 10,
    spread_bins: int = 20,
) -> Objective:
    """Objective that trains an evidential model and scores it on validation."""
    from .evidential import train_evidential

    y_val = np.asarray(val_targets, dtype=float)

    def objective(config: TrialConfig, rng: np.random.Generator):
        train_config = TrainConfig(
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            max_epochs=max_epochs,
            patience=patience,
            evidential_coef=config.evidential_coef,
            seed=int(rng.integers(2**31)),
        )
        model, log = train_evidential(
            train_features,
            train_targets,
            val_features,
            val_targets,
            hidden_sizes=[config.hidden_neurons] * config.hidden_layers,
            config=train_config,
            dropout=config.dropout,
            l1=config.l1,
            l2=config.l2,
        )
        dec = model.predict(val_features)
        mae = float(np.mean(np.abs(dec.mean - y_val)))
        r2 = spread_skill(dec.total_sd, dec.mean - y_val, n_bins=spread_bins).r_squared
        skill = pitd(pit_values(dec.mean, dec.total_sd, y_val), n_bins=pit_bins).skill
        return mae, r2, skill, len(log)

    return objective
