"""Run configuration: a strict JSON schema for experiments.

A run config is one JSON object holding the training hyperparameters, the
layer list, and the dataset source.  Unknown keys are rejected everywhere so
typos fail loudly before any compute starts.  Individual CLI flags override
the file's top-level scalars.
"""

from __future__ import annotations

import json

import numpy as np

from .booster import BoosterParams
from .data import GENERATORS, Dataset, load_csv
from .errors import ConfigError
from .stack import DenseLayer, GbdtLayer, LayerStack, LOSSES, TrainConfig
from .tree import TreeParams

_TOP_KEYS = {"seed", "loss", "alpha", "mu", "epochs", "init_std", "metric", "layers", "dataset", "cv"}
_GBDT_KEYS = {"kind", "out_dim", "n_boosters", "shrinkage", "tree"}
_TREE_KEYS = {"max_depth", "min_samples_leaf", "min_samples_split", "ridge_lambda", "leaf_mode"}
_DENSE_KEYS = {"kind", "out_dim", "activation", "sgd_lr", "sgd_steps"}
_GENERATOR_KEYS = {"generator", "n", "seed", "in_dim", "hidden"}
_CSV_KEYS = {"csv", "target_columns", "categorical_columns", "task"}
_CV_KEYS = {"k", "seed"}

_DEFAULTS = {"seed": 0, "loss": "mse", "alpha": 0.5, "mu": 0.5, "epochs": 60, "init_std": 1.0, "metric": None}


def _reject_unknown(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def load_run_config(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        try:
            cfg = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def validate_run_config(cfg: dict, overrides: dict | None = None) -> dict:
    """Fill defaults, apply CLI overrides (flags win), and check every key."""
    _reject_unknown(cfg, _TOP_KEYS, "config")
    merged = {**_DEFAULTS, **cfg}
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    if merged["loss"] not in LOSSES:
        raise ConfigError(f"config: unknown loss {merged['loss']!r}")
    if "layers" not in merged or not merged["layers"]:
        raise ConfigError("config: needs a nonempty 'layers' list")
    for i, spec in enumerate(merged["layers"]):
        _validate_layer_spec(spec, f"layers[{i}]")
    if "dataset" in merged:
        _validate_dataset_spec(merged["dataset"])
    if "cv" in merged:
        _reject_unknown(merged["cv"], _CV_KEYS, "cv")
        if int(merged["cv"].get("k", 0)) < 2:
            raise ConfigError("cv: k must be >= 2")
    return merged


def _validate_layer_spec(spec: dict, where: str):
    kind = spec.get("kind")
    if kind == "gbdt":
        _reject_unknown(spec, _GBDT_KEYS, where)
        if "tree" in spec:
            _reject_unknown(spec["tree"], _TREE_KEYS, f"{where}.tree")
    elif kind == "dense":
        _reject_unknown(spec, _DENSE_KEYS, where)
    else:
        raise ConfigError(f"{where}: kind must be 'gbdt' or 'dense', got {kind!r}")
    if "out_dim" not in spec or int(spec["out_dim"]) < 1:
        raise ConfigError(f"{where}: needs out_dim >= 1")


def _validate_dataset_spec(spec: dict):
    if "generator" in spec:
        _reject_unknown(spec, _GENERATOR_KEYS, "dataset")
        if spec["generator"] not in GENERATORS:
            raise ConfigError(
                f"dataset: unknown generator {spec['generator']!r}; "
                f"choose from {sorted(GENERATORS)}"
            )
    elif "csv" in spec:
        _reject_unknown(spec, _CSV_KEYS, "dataset")
        if not spec.get("target_columns"):
            raise ConfigError("dataset: csv source needs 'target_columns'")
    else:
        raise ConfigError("dataset: needs either 'generator' or 'csv'")


def make_dataset(spec: dict) -> Dataset:
    """Materialize the dataset section of a validated config."""
    if "generator" in spec:
        name = spec["generator"]
        kwargs = {k: v for k, v in spec.items() if k not in ("generator",)}
        kwargs.setdefault("seed", 0)
        return GENERATORS[name](**kwargs)
    return load_csv(
        spec["csv"],
        target_columns=spec["target_columns"],
        categorical_columns=spec.get("categorical_columns"),
        task=spec.get("task", "regression"),
    )


def build_stack(cfg: dict, in_dim: int, rng: np.random.Generator) -> LayerStack:
    """Construct the (unfitted) layer stack described by a validated config."""
    layers = []
    width = in_dim
    for spec in cfg["layers"]:
        out_dim = int(spec["out_dim"])
        if spec["kind"] == "gbdt":
            tree_spec = dict(spec.get("tree", {}))
            tree_spec.setdefault("max_depth", 4)
            params = BoosterParams(
                n_boosters=int(spec.get("n_boosters", 8)),
                shrinkage=float(spec.get("shrinkage", 0.25)),
                tree=TreeParams(**tree_spec),
            )
            layers.append(GbdtLayer(in_dim=width, out_dim=out_dim, params=params))
        else:
            layers.append(
                DenseLayer.initialize(
                    in_dim=width,
                    out_dim=out_dim,
                    rng=rng,
                    activation=spec.get("activation", "relu"),
                    sgd_lr=float(spec.get("sgd_lr", 0.01)),
                    sgd_steps=int(spec.get("sgd_steps", 15)),
                )
            )
        width = out_dim
    return LayerStack(layers=layers, loss=cfg["loss"])


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=int(cfg["epochs"]),
        alpha=float(cfg["alpha"]),
        mu=float(cfg["mu"]),
        init_std=float(cfg["init_std"]),
        seed=int(cfg["seed"]),
        metric=cfg.get("metric"),
    )
