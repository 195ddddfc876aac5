"""Model file reading and writing.

Models are stored as JSON: nested node records for every tree plus the dense
layer parameters.  Floats are emitted with ``repr`` semantics, so finite
doubles survive a save/load round trip bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from .booster import Booster, BoosterParams
from .errors import VersionMismatchError
from .stack import DenseLayer, GbdtLayer, LayerStack
from .tree import DecisionTree, LeafModel, SplitNode, TreeParams

FORMAT_VERSION = 1


def _node_to_obj(node):
    if isinstance(node, SplitNode):
        return {
            "feature": node.feature,
            "threshold": node.threshold,
            "left": _node_to_obj(node.left),
            "right": _node_to_obj(node.right),
        }
    leaf: LeafModel = node
    if leaf.mode == "constant":
        return {"mode": "constant", "value": leaf.constant_value}
    return {
        "mode": "linear",
        "selected": list(leaf.selected_features),
        "weights": leaf.weights.tolist(),
    }


def _node_from_obj(obj):
    if "feature" in obj:
        return SplitNode(
            feature=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            left=_node_from_obj(obj["left"]),
            right=_node_from_obj(obj["right"]),
        )
    if obj["mode"] == "constant":
        return LeafModel(mode="constant", constant_value=float(obj["value"]))
    return LeafModel(
        mode="linear",
        selected_features=[int(i) for i in obj["selected"]],
        weights=np.asarray(obj["weights"], dtype=np.float64),
    )


def _tree_to_obj(tree: DecisionTree):
    return {"input_dim": tree.input_dim, "depth": tree.depth, "root": _node_to_obj(tree.root)}


def _tree_from_obj(obj) -> DecisionTree:
    return DecisionTree(
        root=_node_from_obj(obj["root"]),
        input_dim=int(obj["input_dim"]),
        depth=int(obj["depth"]),
    )


def _tree_params_to_obj(params: TreeParams):
    return {
        "max_depth": params.max_depth,
        "min_samples_leaf": params.min_samples_leaf,
        "min_samples_split": params.min_samples_split,
        "ridge_lambda": params.ridge_lambda,
        "leaf_mode": params.leaf_mode,
    }


def _layer_to_obj(layer):
    if isinstance(layer, GbdtLayer):
        return {
            "kind": "gbdt",
            "in_dim": layer.in_dim,
            "out_dim": layer.out_dim,
            "params": {
                "n_boosters": layer.params.n_boosters,
                "shrinkage": layer.params.shrinkage,
                "tree": _tree_params_to_obj(layer.params.tree),
            },
            "boosters": [
                {
                    "shrinkage": b.shrinkage,
                    "input_dim": b.input_dim,
                    "trees": [_tree_to_obj(t) for t in b.trees],
                }
                for b in layer.boosters
            ],
        }
    dense: DenseLayer = layer
    return {
        "kind": "dense",
        "weights": dense.weights.tolist(),
        "bias": dense.bias.tolist(),
        "activation": dense.activation,
        "sgd_lr": dense.sgd_lr,
        "sgd_steps": dense.sgd_steps,
    }


def _layer_from_obj(obj):
    if obj["kind"] == "gbdt":
        params_obj = obj["params"]
        params = BoosterParams(
            n_boosters=int(params_obj["n_boosters"]),
            shrinkage=float(params_obj["shrinkage"]),
            tree=TreeParams(**params_obj["tree"]),
        )
        boosters = [
            Booster(
                trees=[_tree_from_obj(t) for t in b["trees"]],
                shrinkage=float(b["shrinkage"]),
                input_dim=int(b["input_dim"]),
            )
            for b in obj["boosters"]
        ]
        return GbdtLayer(
            in_dim=int(obj["in_dim"]),
            out_dim=int(obj["out_dim"]),
            params=params,
            boosters=boosters,
        )
    return DenseLayer(
        weights=np.asarray(obj["weights"], dtype=np.float64),
        bias=np.asarray(obj["bias"], dtype=np.float64),
        activation=obj["activation"],
        sgd_lr=float(obj["sgd_lr"]),
        sgd_steps=int(obj["sgd_steps"]),
    )


def save_model(path: str, stack: LayerStack, meta: dict | None = None):
    """Write the stack (and an optional config echo) as versioned JSON."""
    payload = {
        "format_version": FORMAT_VERSION,
        "loss": stack.loss,
        "layers": [_layer_to_obj(layer) for layer in stack.layers],
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_model(path: str) -> tuple[LayerStack, dict]:
    """Read a model file; refuses files written by a newer format."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("format_version")
    if not isinstance(version, int) or version > FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version!r} is newer than supported ({FORMAT_VERSION})"
        )
    stack = LayerStack(
        layers=[_layer_from_obj(obj) for obj in payload["layers"]],
        loss=payload["loss"],
    )
    return stack, payload.get("meta", {})
