"""Command-line entry point: gen, train, eval, gradcheck, cv.

Every command reads a JSON run config (see :mod:`stackboost.config`) and
emits line-delimited JSON records on stdout.  Failures print one structured
error line on stderr and exit nonzero.  Runs are reproducible from the
config file and seed alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .data import GENERATORS, Dataset, accuracy, rmse, kfold, write_csv
from .errors import DimensionMismatchError, StackboostError
from .linalg import finite_diff_gradient
from .model_io import load_model, save_model
from .stack import GbdtLayer, LayerStack, train


def _emit(record: dict):
    print(json.dumps(record))


def _metric_for(dataset: Dataset) -> str:
    return "accuracy" if dataset.task == "classification" else "rmse"


def _evaluate(stack: LayerStack, dataset: Dataset) -> dict:
    if dataset.x.shape[1] != stack.in_dim:
        raise DimensionMismatchError(
            f"model expects {stack.in_dim} features, dataset has {dataset.x.shape[1]}"
        )
    pred = stack.predict(dataset.x)
    name = _metric_for(dataset)
    value = accuracy(pred, dataset.y) if name == "accuracy" else rmse(pred, dataset.y)
    return {"metric_name": name, "metric": value, "n": dataset.n}


def cmd_gen(args) -> int:
    if args.dataset not in GENERATORS:
        raise StackboostError(f"unknown generator {args.dataset!r}; choose from {sorted(GENERATORS)}")
    dataset = GENERATORS[args.dataset](n=args.n, seed=args.seed)
    write_csv(args.out, dataset)
    _emit({"written": args.out, "rows": dataset.n, "features": dataset.x.shape[1],
           "targets": dataset.y.shape[1], "task": dataset.task})
    return 0


def _load_and_validate(args) -> dict:
    cfg = cfgmod.load_run_config(args.config)
    overrides = {
        key: getattr(args, key, None) for key in ("seed", "loss", "alpha", "mu", "epochs")
    }
    return cfgmod.validate_run_config(cfg, overrides)


def cmd_train(args) -> int:
    cfg = _load_and_validate(args)
    if "dataset" not in cfg:
        raise StackboostError("train: config needs a 'dataset' section")
    dataset = cfgmod.make_dataset(cfg["dataset"])
    rng = np.random.default_rng(cfg["seed"])
    stack = cfgmod.build_stack(cfg, dataset.x.shape[1], rng)
    tc = cfgmod.train_config(cfg)
    if tc.metric is None and dataset.task == "classification":
        tc.metric = "accuracy"

    os.makedirs(args.out_dir, exist_ok=True)
    history_path = os.path.join(args.out_dir, "history.jsonl")
    hooks = None
    if args.dump_hidden:

        def hooks(epoch: int, hiddens, record):
            for i, h in enumerate(hiddens, start=1):
                path = os.path.join(args.out_dir, f"hidden_L{i}_epoch{epoch}.csv")
                np.savetxt(path, h, delimiter=",", fmt="%r")

    history = train(stack, dataset.x, dataset.y, tc, rng, on_epoch=hooks)
    with open(history_path, "w", encoding="utf-8") as handle:
        for record in history:
            handle.write(json.dumps(record) + "\n")
    model_path = os.path.join(args.out_dir, "model.json")
    save_model(model_path, stack, meta={"config": cfg})
    final = history[-1] if history else {"epoch": 0}
    _emit({"model": model_path, "history": history_path, **final})
    return 0


def cmd_eval(args) -> int:
    stack, _ = load_model(args.model)
    cfg = _load_and_validate(args)
    if "dataset" not in cfg:
        raise StackboostError("eval: config needs a 'dataset' section")
    dataset = cfgmod.make_dataset(cfg["dataset"])
    _emit(_evaluate(stack, dataset))
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load_and_validate(args)
    if "dataset" not in cfg:
        raise StackboostError("gradcheck: config needs a 'dataset' section")
    dataset = cfgmod.make_dataset(cfg["dataset"])
    rng = np.random.default_rng(cfg["seed"])
    stack = cfgmod.build_stack(cfg, dataset.x.shape[1], rng)
    tc = cfgmod.train_config(cfg)
    train(stack, dataset.x, dataset.y, tc, rng)

    margins = stack.split_margins(dataset.x)
    interior = np.flatnonzero(margins > args.reject_margin)
    rng_probe = np.random.default_rng(cfg["seed"] + 1)
    rng_probe.shuffle(interior)
    probes = interior[: args.n_points]

    seed_grad = np.ones((1, stack.out_dim))

    def composed(row: np.ndarray) -> float:
        return float(stack.predict(row[None, :]).sum())

    max_err = 0.0
    failures = 0
    for row_index in probes:
        x_row = dataset.x[row_index]
        hiddens = stack.forward_all(x_row[None, :])
        analytic = stack.backward(x_row[None, :], hiddens, seed_grad)[0][0]
        numeric = finite_diff_gradient(composed, x_row, args.eps)
        err = float(np.max(np.abs(analytic - numeric)))
        max_err = max(max_err, err)
        failures += err > args.tol

    zero_layers = []
    sample = dataset.x[probes] if probes.size else dataset.x[:1]
    h = sample
    for li, layer in enumerate(stack.layers):
        peak = max(
            (float(np.max(np.abs(layer.jacobian(row)))) for row in h), default=0.0
        )
        if peak == 0.0:
            zero_layers.append(li)
        h = layer.forward(h)

    _emit({
        "n_points": int(probes.size),
        "eps": args.eps,
        "reject_margin": args.reject_margin,
        "tolerance": args.tol,
        "max_abs_err": max_err,
        "failures": int(failures),
        "zero_jacobian_layers": zero_layers,
    })
    return 0


def cmd_cv(args) -> int:
    cfg = _load_and_validate(args)
    if "dataset" not in cfg or "cv" not in cfg:
        raise StackboostError("cv: config needs 'dataset' and 'cv' sections")
    dataset = cfgmod.make_dataset(cfg["dataset"])
    k = int(cfg["cv"]["k"])
    plan = kfold(dataset.n, k, int(cfg["cv"].get("seed", cfg["seed"])))
    scores = []
    name = None
    for fold in range(k):
        fold_cfg = dict(cfg)
        fold_cfg["seed"] = int(cfg["seed"]) + fold
        rng = np.random.default_rng(fold_cfg["seed"])
        train_set = dataset.subset(plan.train_rows(fold))
        test_set = dataset.subset(plan.test_rows(fold))
        stack = cfgmod.build_stack(fold_cfg, train_set.x.shape[1], rng)
        tc = cfgmod.train_config(fold_cfg)
        if tc.metric is None and dataset.task == "classification":
            tc.metric = "accuracy"
        train(stack, train_set.x, train_set.y, tc, rng)
        result = _evaluate(stack, test_set)
        name = result["metric_name"]
        scores.append(result["metric"])
        _emit({"fold": fold, **result})
    mean = float(np.mean(scores))
    std = float(np.std(scores))
    _emit({
        "aggregate": {
            "metric_name": name,
            "mean": mean,
            "std": std,
            "formatted": f"{mean:.4f} ± {std:.4f}",
            "k": k,
        }
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackboost",
        description="Layered gradient-boosted trees trained by back-propagation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p_gen.add_argument("--dataset", required=True, help=f"one of {sorted(GENERATORS)}")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    def add_config_overrides(p):
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--loss", default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)

    p_train = sub.add_parser("train", help="train a stack and save model + history")
    add_config_overrides(p_train)
    p_train.add_argument("--out-dir", default=".")
    p_train.add_argument("--dump-hidden", action="store_true",
                         help="write hidden_L{i}_epoch{e}.csv files for external plotting")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    add_config_overrides(p_eval)
    p_eval.add_argument("--model", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="compare back-propagated input gradients "
                                              "against finite differences")
    add_config_overrides(p_grad)
    p_grad.add_argument("--n-points", type=int, default=100)
    p_grad.add_argument("--eps", type=float, default=1e-6)
    p_grad.add_argument("--reject-margin", type=float, default=1e-3,
                        help="skip probe rows closer than this to any split threshold")
    p_grad.add_argument("--tol", type=float, default=1e-5)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_cv = sub.add_parser("cv", help="k-fold cross-validation")
    add_config_overrides(p_cv)
    p_cv.set_defaults(func=cmd_cv)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StackboostError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
