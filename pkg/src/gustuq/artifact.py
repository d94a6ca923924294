"""Model artifact container: a versioned JSON file with bit-exact weights.

Arrays are stored as base64-encoded little-endian float64 bytes, so a
save/load round trip reproduces every parameter and standardization
statistic exactly. The file embeds the training configuration (including the
evidential coefficient) alongside the layer shapes and the feature pipeline.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .data import Standardizer
from .errors import UsageError
from .evidential import EvidentialModel
from .fileio import atomic_open
from .nncore import MLP, Layer, TrainConfig

FORMAT_NAME = "gustuq-evidential-model"
FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(data.shape),
        "dtype": "<f8",
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype=obj["dtype"]).reshape(obj["shape"])
    return arr.astype(float)  # writable copy in native order


def save_model(model: EvidentialModel, path) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "train_config": {
            "learning_rate": model.train_config.learning_rate,
            "batch_size": model.train_config.batch_size,
            "max_epochs": model.train_config.max_epochs,
            "patience": model.train_config.patience,
            "evidential_coef": model.train_config.evidential_coef,
            "seed": model.train_config.seed,
        },
        "network": {
            "dropout": model.mlp.dropout,
            "l1": model.mlp.l1,
            "l2": model.mlp.l2,
            "leaky_slope": model.mlp.leaky_slope,
            "layers": [
                {"weights": _encode_array(l.weights), "bias": _encode_array(l.bias)}
                for l in model.mlp.layers
            ],
        },
        "feature_names": model.feature_names,
        "standardizer": None
        if model.standardizer is None
        else {
            "offset": _encode_array(model.standardizer.offset),
            "scale": _encode_array(model.standardizer.scale),
            "passthrough": model.standardizer.passthrough.astype(bool).tolist(),
        },
    }
    with atomic_open(path) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path) -> EvidentialModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != FORMAT_NAME:
        raise UsageError(f"{path}: not a {FORMAT_NAME} artifact")
    if payload.get("version") != FORMAT_VERSION:
        raise UsageError(
            f"{path}: unsupported artifact version {payload.get('version')}"
        )
    net = payload["network"]
    layers = [
        Layer(weights=_decode_array(l["weights"]), bias=_decode_array(l["bias"]))
        for l in net["layers"]
    ]
    mlp = MLP(
        layers=layers,
        dropout=net["dropout"],
        l1=net["l1"],
        l2=net["l2"],
        leaky_slope=net["leaky_slope"],
    )
    tc = payload["train_config"]
    config = TrainConfig(
        learning_rate=tc["learning_rate"],
        batch_size=tc["batch_size"],
        max_epochs=tc["max_epochs"],
        patience=tc["patience"],
        evidential_coef=tc["evidential_coef"],
        seed=tc["seed"],
    )
    std = payload.get("standardizer")
    standardizer = None
    if std is not None:
        standardizer = Standardizer(
            offset=_decode_array(std["offset"]),
            scale=_decode_array(std["scale"]),
            passthrough=np.asarray(std["passthrough"], dtype=bool),
        )
    return EvidentialModel(
        mlp=mlp,
        train_config=config,
        feature_names=payload.get("feature_names"),
        standardizer=standardizer,
    )
