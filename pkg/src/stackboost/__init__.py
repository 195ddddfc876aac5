"""Multi-layered gradient-boosted decision trees trained by back-propagation.

Regression trees carry ridge-fitted linear models (over a [1, x, x^2] basis
restricted to each leaf's decision-path features) instead of constants, which
gives every boosted ensemble a closed-form, almost-everywhere input gradient.
Stacking such ensembles and treating the full-batch hidden matrices as
trainable targets lets loss gradients flow layer to layer: each epoch updates
the hidden matrices by momentum gradient descent and refits every layer from
scratch to the moved targets.
"""

from .booster import Booster, BoosterParams, fit_booster
from .data import (
    Dataset,
    FoldPlan,
    accuracy,
    gen_circle,
    gen_curve,
    gen_random_nn,
    kfold,
    load_csv,
    rmse,
)
from .errors import StackboostError
from .linalg import finite_diff_gradient, gaussian_matrix, ridge_solve
from .model_io import load_model, save_model
from .stack import (
    DenseLayer,
    GbdtLayer,
    LayerStack,
    TrainConfig,
    loss_and_gradient,
    momentum_update,
    train,
    update_hidden,
)
from .tree import (
    DecisionTree,
    LeafModel,
    SplitNode,
    TreeParams,
    extend_features,
    extend_features_jacobian,
    fit_leaf,
    fit_tree,
    path_features,
)

__all__ = [
    "Booster",
    "BoosterParams",
    "Dataset",
    "DecisionTree",
    "DenseLayer",
    "FoldPlan",
    "GbdtLayer",
    "LayerStack",
    "LeafModel",
    "SplitNode",
    "StackboostError",
    "TrainConfig",
    "TreeParams",
    "accuracy",
    "extend_features",
    "extend_features_jacobian",
    "finite_diff_gradient",
    "fit_booster",
    "fit_leaf",
    "fit_tree",
    "gaussian_matrix",
    "gen_circle",
    "gen_curve",
    "gen_random_nn",
    "kfold",
    "load_csv",
    "load_model",
    "loss_and_gradient",
    "momentum_update",
    "path_features",
    "ridge_solve",
    "rmse",
    "save_model",
    "train",
    "update_hidden",
]

__version__ = "0.1.0"
