"""Multinomial logistic regression on flat parameter vectors.

Layout of a parameter vector: ``W`` (classes x dim, row-major) then ``b`` (classes).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class LogisticModel:
    num_classes: int
    dim: int

    @property
    def size(self) -> int:
        return self.num_classes * (self.dim + 1)

    def init_params(self) -> np.ndarray:
        return np.zeros(self.size)

    def flatten(self, W: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(W, dtype=np.float64).reshape(-1), np.asarray(b, dtype=np.float64)])

    def unflatten(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {params.shape}")
        cut = self.num_classes * self.dim
        return params[:cut].reshape(self.num_classes, self.dim), params[cut:]

    def logits(self, params: np.ndarray, features: np.ndarray) -> np.ndarray:
        W, b = self.unflatten(params)
        return features @ W.T + b

    def predict(self, params: np.ndarray, features: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lowest class id on ties
        return np.argmax(self.logits(params, features), axis=1)

    def loss_and_grad(self, params: np.ndarray, features: np.ndarray, labels: np.ndarray,
                      weight_decay: float = 0.0) -> tuple[float, np.ndarray]:
        """Mean cross-entropy plus ``weight_decay/2 * ||W||^2`` (bias not decayed), with its gradient."""
        n = features.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        W, _ = self.unflatten(params)
        z = self.logits(params, features)
        z = z - z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        norm = ez.sum(axis=1, keepdims=True)
        rows = np.arange(n)
        loss = float(np.mean(np.log(norm[:, 0]) - z[rows, labels])) + 0.5 * weight_decay * float(np.sum(W * W))
        P = ez / norm
        P[rows, labels] -= 1.0
        P /= n
        gW = P.T @ features + weight_decay * W
        gb = P.sum(axis=0)
        return loss, self.flatten(gW, gb)


def model_for(dataset: Dataset) -> LogisticModel:
    return LogisticModel(dataset.num_classes, dataset.dim)


def model_loss_and_grad(model: LogisticModel, params: np.ndarray, batch: Dataset, weight_decay: float = 0.0):
    return model.loss_and_grad(params, batch.features, batch.labels, weight_decay)


def evaluate_acc(model: LogisticModel, params: np.ndarray, testset: Dataset) -> float:
    if len(testset) == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict(params, testset.features) == testset.labels))


def evaluate_asr(model: LogisticModel, params: np.ndarray, triggered: Dataset, target_class: int) -> float:
    """Fraction of triggered samples classified as ``target_class``."""
    if len(triggered) == 0:
        raise ValueError("empty triggered test set")
    return float(np.mean(model.predict(params, triggered.features) == target_class))
