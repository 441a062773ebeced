"""scikit-learn compatible wrappers.

``PhaseChannelTransformer`` turns RGB batches into RGBP batches and
``ShallowNetClassifier`` trains the numpy conv net, so the full method composes as

    make_pipeline(PhaseChannelTransformer(), ShallowNetClassifier(profile="shallow"))
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.model_selection import train_test_split
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_is_fitted

from spsl import net as _net
from spsl.exceptions import InvalidInputError
from spsl.spectral import PHASE_MODES, make_rgbp_batch


def check_images(X, channels=(3, 4)) -> np.ndarray:
    """Validate an ``(n, H, W, C)`` float batch with values in [0, 1]."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 4:
        raise InvalidInputError(f"expected an (n, H, W, C) array, got shape {X.shape}")
    if X.shape[-1] not in channels:
        raise InvalidInputError(f"expected {channels} channels, got {X.shape[-1]}")
    if len(X) == 0:
        raise InvalidInputError("empty batch")
    if not np.all(np.isfinite(X)) or X.min() < 0 or X.max() > 1:
        raise InvalidInputError("pixel values must be finite and lie in [0, 1]")
    return X


class PhaseChannelTransformer(TransformerMixin, BaseEstimator):
    """Append the phase-only luminance map as a fourth channel. Stateless."""

    def __init__(self, mode: str = "abs-phase"):
        self.mode = mode

    def fit(self, X, y=None):
        if self.mode not in PHASE_MODES:
            raise InvalidInputError(f"unknown phase mode {self.mode!r}")
        X = check_images(X, channels=(3,))
        self.n_features_in_ = X.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return make_rgbp_batch(check_images(X, channels=(3,)), self.mode)


class ShallowNetClassifier(ClassifierMixin, BaseEstimator):
    """Conv-net classifier over RGB (3-channel) or RGBP (4-channel) image batches.

    Input channels are taken from the training data. ``profile`` picks the
    backbone blocks ("shallow" keeps 1-3 and the final block, "deep" keeps all);
    ``blocks`` overrides it with an explicit block list. ``standardize`` rescales
    each input image to zero mean and unit variance per channel.
    """

    def __init__(
        self,
        profile: str = "shallow",
        blocks=None,
        width: float = 1.0,
        learning_rate: float = 2e-3,
        batch_size: int = 32,
        max_epochs: int = 30,
        patience: int = 5,
        validation_fraction: float = 0.15,
        random_state: int = 0,
        standardize: bool = True,
    ):
        self.profile = profile
        self.blocks = blocks
        self.width = width
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.standardize = standardize

    def _net_config(self, channels, n_classes):
        if self.blocks is not None:
            return _net.build_net(channels, self.blocks, self.width, n_classes, standardize=self.standardize)
        return _net.build_net(channels, width=self.width, n_classes=n_classes, profile=self.profile,
                              standardize=self.standardize)

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_images(X)
        self.classes_, y_idx = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes_) < 2:
            raise InvalidInputError("need at least two classes to fit")
        if X_val is None:
            X, X_val, y_idx, yv_idx = train_test_split(
                X, y_idx, test_size=self.validation_fraction,
                random_state=self.random_state, stratify=y_idx,
            )
        else:
            X_val = check_images(X_val)
            yv_idx = np.searchsorted(self.classes_, np.asarray(y_val))
        self.n_features_in_ = X.shape[-1]
        self.net_config_ = self._net_config(X.shape[-1], len(self.classes_))
        tc = _net.TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.random_state,
        )
        result = _net.train(self.net_config_, tc, X, y_idx, X_val, yv_idx)
        self.params_ = result.params
        self.train_log_ = result.log
        self.best_epoch_ = result.best_epoch
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_images(X, channels=(self.n_features_in_,))
        return _net.predict_proba(self.net_config_, self.params_, X)

    def decision_function(self, X):
        proba = self.predict_proba(X)
        return proba[:, 1] if proba.shape[1] == 2 else proba

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    @property
    def receptive_field_(self) -> int:
        check_is_fitted(self, "net_config_")
        return _net.receptive_field(self.net_config_).head.size


def make_spsl(phase_mode: str = "abs-phase", **classifier_params) -> Pipeline:
    """RGBP input followed by the shallow classifier."""
    classifier_params.setdefault("profile", "shallow")
    return Pipeline(
        [
            ("phase", PhaseChannelTransformer(mode=phase_mode)),
            ("net", ShallowNetClassifier(**classifier_params)),
        ]
    )
