"""Boosting driver that stops by itself once a new tree stops paying off."""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cir import CirConfig
from .data import Dataset, build_sorted_index
from .errors import DomainError, ShapeError
from .loss import LossKind, LossSpec, sigmoid
from .tree import Tree, TreeBuilder

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoostConfig:
    loss: LossSpec = LossSpec()
    learning_rate: float = 0.01
    max_iterations: int = 50000
    cir: CirConfig = CirConfig()
    seed: Optional[int] = None  # overrides cir.seed when set
    threads: int = 1
    # what to do when the scaled stopping rule accepts a tree whose root
    # did not pass the split test: "stump" forces the root's best split,
    # "stop" terminates
    root_leaf_policy: str = "stump"

    def __post_init__(self):
        if not isinstance(self.loss, LossSpec):
            object.__setattr__(self, "loss", LossSpec(self.loss))
        if not 0 < self.learning_rate <= 1:
            raise DomainError("learning rate must lie in (0, 1]")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        if self.root_leaf_policy not in ("stump", "stop"):
            raise DomainError(f"unknown root_leaf_policy {self.root_leaf_policy!r}")


def scaled_reduction(report, learning_rate):
    """Generalisation-loss reduction of the root stump shrunk by the learning rate."""
    d = learning_rate
    return d * (2.0 - d) * report.R + d * (report.c_root - report.c_stump)


@dataclass
class Ensemble:
    loss: LossKind
    learning_rate: float
    initial_prediction: float
    trees: list = field(default_factory=list)
    n_features: int = 0
    feature_names: tuple = ()
    # training diagnostics, not persisted
    hit_iteration_cap: bool = False
    train_loss_path: list = field(default_factory=list)
    root_reports: list = field(default_factory=list)
    final_rejected: Optional[object] = None

    @property
    def n_trained(self):
        return len(self.trees)

    def leaf_counts(self):
        return [t.n_leaves for t in self.trees]

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        out = np.full(X.shape[0], self.initial_prediction)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def predict_probability(self, X):
        if LossKind(self.loss) is not LossKind.LOG_LOSS:
            raise DomainError("probabilities are only defined for log-loss models")
        return sigmoid(self.predict(X))


def predict(e: Ensemble, features):
    return e.predict(features)


def train(d: Dataset, cfg: BoostConfig = BoostConfig(), callback=None) -> Ensemble:
    """Fit an ensemble; the number of trees and their shapes are chosen automatically.

    ``callback(k, tree, report, preds)`` is invoked after each accepted tree.
    """
    loss = cfg.loss
    loss.check_response(d.response)
    y = d.response
    eta = loss.initial_prediction(y)
    index = build_sorted_index(d)
    ens = Ensemble(loss.kind, cfg.learning_rate, eta, n_features=d.m,
                   feature_names=d.feature_names)
    preds = np.full(d.n, eta)
    ens.train_loss_path.append(float(np.mean(loss.value(y, preds))))
    delta = cfg.learning_rate
    cir_cfg = cfg.cir if cfg.seed is None else replace(cfg.cir, seed=cfg.seed)
    for k in range(cfg.max_iterations):
        derivs = loss.derivatives(y, preds)
        builder = TreeBuilder(d, index, derivs, cir_cfg, cfg.threads)
        root, leaves = builder.grow()
        report = root.report
        if not (report.best_feature >= 0 and scaled_reduction(report, delta) > 0):
            ens.final_rejected = report
            break
        if root.is_leaf:
            if cfg.root_leaf_policy == "stop":
                ens.final_rejected = report
                break
            root, leaves = builder.grow(force_root_split=True)
        tree = Tree.from_node(root)
        for node, rows in leaves:
            preds[rows] += delta * node.weight
        ens.trees.append(tree)
        ens.root_reports.append(report)
        ens.train_loss_path.append(float(np.mean(loss.value(y, preds))))
        if callback is not None:
            callback(k, tree, report, preds)
    else:
        ens.hit_iteration_cap = True
        log.warning("stopped at the iteration cap (%d) before the stopping rule fired",
                    cfg.max_iterations)
    ens.training_predictions = preds
    return ens


def delta_scaling_check(tree: Tree, d: Dataset, derivatives, learning_rate, n_total=None):
    """Recompute the quadratic training-loss reduction of a shrunk tree.

    Returns ``(direct, learning_rate * (2 - learning_rate) * R)`` where
    ``R`` is the unshrunk reduction of the same tree.
    """
    n_total = d.n if n_total is None else n_total
    g = np.asarray(derivatives.g)
    h = np.asarray(derivatives.h)
    f = tree.predict(d.features)
    # quadratic form: -(1/n) sum(g f + h f^2 / 2), evaluated at delta * f
    scaled = learning_rate * f
    direct = -float(np.sum(g * scaled + 0.5 * h * scaled * scaled)) / n_total
    unscaled = -float(np.sum(g * f + 0.5 * h * f * f)) / n_total
    return direct, learning_rate * (2.0 - learning_rate) * unscaled


__all__ = ["BoostConfig", "Ensemble", "train", "predict", "delta_scaling_check",
           "scaled_reduction"]
