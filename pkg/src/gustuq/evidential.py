"""Normal-Inverse-Gamma evidential head, dual-objective loss, and training.

A width-4 network output is mapped to the NIG parameters (gamma, nu, alpha,
beta), which define a distribution over the mean and variance of a Gaussian
target. Closed-form moments split the predictive variance into an aleatoric
part beta/(alpha-1) and an epistemic part beta/(nu*(alpha-1)); their sum is
the total predictive variance (law of total variance). The training loss is
the negative log of the Student-t marginal plus an evidence regularizer
|y - gamma| * (2*nu + alpha) weighted by the evidential coefficient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, expit, gammaln

from . import nncore
from .data import Standardizer
from .errors import CalibrationWarning, ConfigError, DomainError, NumericError
from .nncore import MLP, Adam, TrainConfig

# Floor keeping nu, beta strictly positive and alpha strictly above 1.
PARAM_FLOOR = 1e-6


@dataclass
class NIGParams:
    """Per-sample Normal-Inverse-Gamma parameters (columnar arrays)."""

    gamma: np.ndarray  # predicted mean, target units
    nu: np.ndarray  # virtual observation count, > 0
    alpha: np.ndarray  # shape, > 1
    beta: np.ndarray  # scale, target units squared, > 0

    def validate(self) -> None:
        for name, arr in (("gamma", self.gamma), ("nu", self.nu),
                          ("alpha", self.alpha), ("beta", self.beta)):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"NIG parameter {name} contains non-finite values")
        if np.any(self.nu <= 0):
            raise DomainError("NIG parameter nu must be > 0")
        if np.any(self.alpha <= 1):
            raise DomainError("NIG parameter alpha must be > 1")
        if np.any(self.beta <= 0):
            raise DomainError("NIG parameter beta must be > 0")


@dataclass
class UncertaintyDecomposition:
    """Predictive mean and the variance split; sds are square roots."""

    mean: np.ndarray
    aleatoric_var: np.ndarray
    epistemic_var: np.ndarray
    total_var: np.ndarray

    @property
    def aleatoric_sd(self) -> np.ndarray:
        return np.sqrt(self.aleatoric_var)

    @property
    def epistemic_sd(self) -> np.ndarray:
        return np.sqrt(self.epistemic_var)

    @property
    def total_sd(self) -> np.ndarray:
        return np.sqrt(self.total_var)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) evaluated without overflow."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def head_transform(raw: np.ndarray) -> NIGParams:
    """Map raw width-4 network outputs to valid NIG parameters.

    gamma passes through; nu and beta go through softplus with a 1e-6 floor;
    alpha additionally shifts by 1 so alpha > 1 always holds.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != 4:
        raise DomainError(f"evidential head expects width-4 outputs, got {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise NumericError("raw head outputs contain non-finite values")
    return NIGParams(
        gamma=raw[..., 0],
        nu=softplus(raw[..., 1]) + PARAM_FLOOR,
        alpha=softplus(raw[..., 2]) + 1.0 + PARAM_FLOOR,
        beta=softplus(raw[..., 3]) + PARAM_FLOOR,
    )


def decompose(params: NIGParams) -> UncertaintyDecomposition:
    """Closed-form mean and aleatoric/epistemic/total variances."""
    params.validate()
    aleatoric = params.beta / (params.alpha - 1.0)
    epistemic = params.beta / (params.nu * (params.alpha - 1.0))
    return UncertaintyDecomposition(
        mean=np.asarray(params.gamma, dtype=float),
        aleatoric_var=aleatoric,
        epistemic_var=epistemic,
        total_var=aleatoric + epistemic,
    )


def nig_nll(params: NIGParams, y: np.ndarray) -> np.ndarray:
    """Negative log of the Student-t marginal likelihood, elementwise.

    With omega = 2*beta*(1 + nu):
        0.5*log(pi/nu) - alpha*log(omega)
        + (alpha + 0.5)*log(nu*(y - gamma)^2 + omega)
        + lgamma(alpha) - lgamma(alpha + 0.5)
    """
    params.validate()
    y = np.asarray(y, dtype=float)
    d = y - params.gamma
    omega = 2.0 * params.beta * (1.0 + params.nu)
    s = params.nu * d**2 + omega
    return (
        0.5 * (np.log(np.pi) - np.log(params.nu))
        - params.alpha * np.log(omega)
        + (params.alpha + 0.5) * np.log(s)
        + gammaln(params.alpha)
        - gammaln(params.alpha + 0.5)
    )


def evidence_regularizer(params: NIGParams, y: np.ndarray) -> np.ndarray:
    """Evidence penalty |y - gamma| * (2*nu + alpha), elementwise."""
    y = np.asarray(y, dtype=float)
    return np.abs(y - params.gamma) * (2.0 * params.nu + params.alpha)


def _param_grads(params: NIGParams, y: np.ndarray, lam: float):
    """Per-sample gradients of nll + lam*reg wrt (gamma, nu, alpha, beta)."""
    d = y - params.gamma
    omega = 2.0 * params.beta * (1.0 + params.nu)
    s = params.nu * d**2 + omega
    a_half = params.alpha + 0.5

    dg = a_half * (-2.0 * params.nu * d) / s
    dn = (
        -0.5 / params.nu
        - params.alpha * (2.0 * params.beta) / omega
        + a_half * (d**2 + 2.0 * params.beta) / s
    )
    da = -np.log(omega) + np.log(s) + digamma(params.alpha) - digamma(a_half)
    db = 2.0 * (1.0 + params.nu) * (-params.alpha / omega + a_half / s)

    if lam > 0:
        abs_d = np.abs(d)
        dg = dg - lam * np.sign(d) * (2.0 * params.nu + params.alpha)
        dn = dn + lam * 2.0 * abs_d
        da = da + lam * abs_d
    return dg, dn, da, db


def evidential_loss(raw: np.ndarray, y: np.ndarray, lam: float):
    """Batch-mean dual-objective loss and its gradient wrt the raw outputs.

    Returns ``(loss, grad)`` where grad has the same [B x 4] shape as ``raw``.
    The mean reduction makes the evidential coefficient batch-size invariant.
    """
    if lam < 0:
        raise ConfigError(f"evidential coefficient must be >= 0, got {lam}")
    raw = np.asarray(raw, dtype=float)
    y = np.asarray(y, dtype=float)
    params = head_transform(raw)
    nll = nig_nll(params, y)
    per_sample = nll + lam * evidence_regularizer(params, y) if lam > 0 else nll
    if not np.all(np.isfinite(per_sample)):
        bad = int(np.flatnonzero(~np.isfinite(per_sample))[0])
        raise NumericError(f"non-finite evidential loss at sample index {bad}")
    n = per_sample.shape[0]
    loss = float(per_sample.mean())

    dg, dn, da, db = _param_grads(params, y, lam)
    grad = np.empty_like(raw)
    grad[:, 0] = dg
    grad[:, 1] = dn * expit(raw[:, 1])  # d softplus = sigmoid
    grad[:, 2] = da * expit(raw[:, 2])
    grad[:, 3] = db * expit(raw[:, 3])
    grad /= n
    return loss, grad


def total_loss(model: MLP, raw: np.ndarray, y: np.ndarray, lam: float):
    """Full training objective: mean evidential loss plus L1/L2 penalties."""
    data_loss, grad = evidential_loss(raw, y, lam)
    return data_loss + nncore.penalty_loss(model), grad


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_mae: float


@dataclass
class EvidentialModel:
    """A trained network plus everything needed to predict from raw features."""

    mlp: MLP
    train_config: TrainConfig
    feature_names: list[str] | None = None
    standardizer: Standardizer | None = None

    def _model_inputs(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        if self.standardizer is not None:
            features = self.standardizer.apply(features)
        return features

    def predict_params(self, features: np.ndarray) -> NIGParams:
        out, _ = nncore.forward(self.mlp, self._model_inputs(features), train_mode=False)
        return head_transform(out)

    def predict(self, features: np.ndarray) -> UncertaintyDecomposition:
        return decompose(self.predict_params(features))


# Validation mean total sd above this multiple of the target sd triggers a
# calibration warning (inflated-uncertainty guard); training continues.
INFLATION_GUARD_FACTOR = 100.0


def train_evidential(
    train_features: np.ndarray,
    train_targets: np.ndarray,
    val_features: np.ndarray,
    val_targets: np.ndarray,
    hidden_sizes: list[int],
    config: TrainConfig,
    dropout: float = 0.0,
    l1: float = 0.0,
    l2: float = 0.0,
    feature_names: list[str] | None = None,
    standardizer: Standardizer | None = None,
) -> tuple[EvidentialModel, list[EpochStats]]:
    """Train the evidential network with Adam and early stopping.

    Feature matrices are used as given (standardize beforehand; a fitted
    ``standardizer`` passed here is only stored on the returned model for
    raw-feature prediction). Returns the weights snapshot with the best
    validation MAE and the per-epoch metric log.
    """
    config.validate()
    x_train = np.asarray(train_features, dtype=float)
    y_train = np.asarray(train_targets, dtype=float)
    x_val = np.asarray(val_features, dtype=float)
    y_val = np.asarray(val_targets, dtype=float)
    if x_train.ndim == 1:
        x_train = x_train[:, None]
    if x_val.ndim == 1:
        x_val = x_val[:, None]
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ConfigError("training and validation splits must be nonempty")
    if x_train.shape[0] != y_train.shape[0] or x_val.shape[0] != y_val.shape[0]:
        raise ConfigError("feature/target lengths differ")

    rng = np.random.default_rng(config.seed)
    model = MLP.create(
        x_train.shape[1], hidden_sizes, rng, dropout=dropout, l1=l1, l2=l2
    )
    optimizer = Adam(config.learning_rate)
    lam = config.evidential_coef

    n = x_train.shape[0]
    batch = min(config.batch_size, n)
    val_target_sd = float(np.std(y_val))
    best_mae = np.inf
    best_weights = model.copy()
    best_epoch = 0
    stall = 0
    warned_inflated = False
    log: list[EpochStats] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            out, cache = nncore.forward(model, x_train[idx], train_mode=True, rng=rng)
            loss, grad_raw = total_loss(model, out, y_train[idx], lam)
            grads = nncore.backward(model, cache, grad_raw)
            optimizer.step(model, grads)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))

        val_out, _ = nncore.forward(model, x_val, train_mode=False)
        val_loss, _ = total_loss(model, val_out, y_val, lam)
        val_params = head_transform(val_out)
        val_mae = float(np.mean(np.abs(val_params.gamma - y_val)))
        log.append(EpochStats(epoch, train_loss, val_loss, val_mae))

        if not warned_inflated and val_target_sd > 0:
            mean_total_sd = float(np.mean(decompose(val_params).total_sd))
            if mean_total_sd > INFLATION_GUARD_FACTOR * val_target_sd:
                warnings.warn(
                    f"validation mean total sd {mean_total_sd:.3g} exceeds "
                    f"{INFLATION_GUARD_FACTOR:g}x the target sd {val_target_sd:.3g}",
                    CalibrationWarning,
                )
                warned_inflated = True

        if val_mae < best_mae:
            best_mae = val_mae
            best_weights = model.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= config.patience:
                break

    trained = EvidentialModel(
        mlp=best_weights,
        train_config=config,
        feature_names=feature_names,
        standardizer=standardizer,
    )
    return trained, log
