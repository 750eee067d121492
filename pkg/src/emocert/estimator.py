"""Scikit-learn style classifier wrapping the training engine.

The pipeline commands work from manifests on disk; this estimator is the
in-memory array API, so the same models compose with the wider ecosystem
(get_params/set_params, clone, cross-validation and friends).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from emocert.nn.architectures import count_parameters
from emocert.nn.network import Network
from emocert.nn.training import (
    ArrayDataset,
    class_weights_from_labels,
    default_train_config,
    train,
)
from emocert.rng import Rng, derive_seed
from emocert.validation import as_image_batch, as_label_indices


class EmotionNetClassifier(BaseEstimator, ClassifierMixin):
    """Four-class emotion CNN with a fit/predict interface.

    Parameters
    ----------
    arch : "baseline" or "enhanced"
        Which canonical architecture to train.
    max_epochs, batch_size, patience : training-loop controls; patience
        follows the architecture default (3 baseline, 10 enhanced) when None.
    learning_rate : optimizer step size; architecture default when None.
    val_fraction : held-out fraction used for early stopping and scheduling.
    balance_classes : weighted sampling plus class-weighted loss (enhanced
        default) when None; force on/off with a bool.
    seed : drives initialisation, sampling and dropout; same seed, same model.
    """

    def __init__(
        self,
        arch: str = "enhanced",
        max_epochs: int = 30,
        batch_size: int = 64,
        learning_rate: float | None = None,
        patience: int | None = None,
        val_fraction: float = 0.1,
        balance_classes: bool | None = None,
        seed: int = 0,
    ):
        self.arch = arch
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.patience = patience
        self.val_fraction = val_fraction
        self.balance_classes = balance_classes
        self.seed = seed

    def _stratified_split(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rng = Rng(derive_seed(self.seed, "val_split"))
        val_idx = []
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            n_val = max(1, int(round(self.val_fraction * members.size)))
            if n_val >= members.size:
                raise ValueError(
                    f"class {cls} has only {members.size} samples; "
                    f"val_fraction={self.val_fraction} leaves nothing to train on"
                )
            order = rng.permutation(members.size)
            val_idx.append(members[order[:n_val]])
        val = np.sort(np.concatenate(val_idx))
        mask = np.ones(y.size, dtype=bool)
        mask[val] = False
        return np.flatnonzero(mask), val

    def fit(self, X, y):
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        X = as_image_batch(X)
        y_idx, classes = as_label_indices(y)
        if y_idx.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} samples but y has {y_idx.shape[0]}")
        train_idx, val_idx = self._stratified_split(y_idx)

        balance = self.balance_classes
        if balance is None:
            balance = self.arch == "enhanced"
        overrides: dict = {
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "sampler": "weighted" if balance else "uniform",
        }
        if self.patience is not None:
            overrides["patience"] = self.patience
        weights = class_weights_from_labels(y_idx[train_idx]) if balance else None
        config = default_train_config(self.arch, class_weights=weights, **overrides)
        if self.learning_rate is not None:
            config = replace(config, optimizer=replace(config.optimizer, lr=self.learning_rate))

        result = train(
            config,
            ArrayDataset(X[train_idx], y_idx[train_idx]),
            ArrayDataset(X[val_idx], y_idx[val_idx]),
        )
        self.classes_ = classes
        self.spec_ = result.spec
        self.params_ = result.params
        self.history_ = result.history
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        self.n_parameters_ = count_parameters(result.spec)
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_image_batch(X)
        net = Network(self.spec_)
        out = []
        for start in range(0, X.shape[0], 256):
            probs, _ = net.forward(self.params_, X[start : start + 256], mode="eval")
            out.append(probs)
        return np.concatenate(out, axis=0)

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)  # also checks fittedness
        return self.classes_[probs.argmax(axis=1)]

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise RuntimeError("this EmotionNetClassifier instance is not fitted yet")
