"""Loss functions with first and second derivatives.

Log loss works on the log-odds (raw score) scale so that leaf weights of
successive trees add up.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateResponseError, DomainError

PROB_CLAMP = 1e-15


class LossKind(str, Enum):
    SQUARED_ERROR = "squared_error"
    LOG_LOSS = "log_loss"

    @classmethod
    def parse(cls, name):
        aliases = {"mse": cls.SQUARED_ERROR, "logloss": cls.LOG_LOSS}
        if isinstance(name, cls):
            return name
        if name in aliases:
            return aliases[name]
        try:
            return cls(name)
        except ValueError:
            raise DomainError(f"unknown loss {name!r}") from None


@dataclass(frozen=True)
class DerivativeBuffers:
    g: np.ndarray
    h: np.ndarray

    def __len__(self):
        return len(self.g)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _clamped_sigmoid(yhat):
    return np.clip(sigmoid(yhat), PROB_CLAMP, 1.0 - PROB_CLAMP)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


def _check_binary(y):
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("log loss requires responses in {0, 1}")


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.SQUARED_ERROR

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind.parse(self.kind))

    def value(self, y, yhat):
        """Pointwise loss; squared error keeps the factor 1 (no 1/2)."""
        y = np.asarray(y, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        _check_finite(y, yhat)
        if self.kind is LossKind.SQUARED_ERROR:
            return (y - yhat) ** 2
        _check_binary(y)
        # log(1 + exp(yhat)) computed without overflow
        return np.logaddexp(0.0, yhat) - y * yhat

    def derivatives(self, y, yhat) -> DerivativeBuffers:
        y = np.asarray(y, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        if y.size == 0:
            raise DomainError("empty input")
        if y.shape != yhat.shape:
            raise DomainError("y and yhat differ in length")
        _check_finite(y, yhat)
        if self.kind is LossKind.SQUARED_ERROR:
            g = 2.0 * (yhat - y)
            h = np.full_like(g, 2.0)
        else:
            _check_binary(y)
            p = _clamped_sigmoid(yhat)
            g = p - y
            h = p * (1.0 - p)
        return DerivativeBuffers(g, h)

    def initial_prediction(self, y) -> float:
        y = np.asarray(y, dtype=float)
        if y.size == 0:
            raise DomainError("empty response")
        _check_finite(y)
        if self.kind is LossKind.SQUARED_ERROR:
            return float(np.mean(y))
        _check_binary(y)
        p = float(np.mean(y))
        if p <= 0.0 or p >= 1.0:
            raise DegenerateResponseError("log loss needs both classes present in the response")
        return float(np.log(p / (1.0 - p)))

    def check_response(self, y):
        """Raise if ``y`` is not valid training data for this loss."""
        y = np.asarray(y, dtype=float)
        _check_finite(y)
        if self.kind is LossKind.LOG_LOSS:
            _check_binary(y)


def loss_value(loss: LossSpec, y, yhat):
    out = loss.value(y, yhat)
    return float(out) if np.ndim(out) == 0 else out


def compute_derivatives(loss: LossSpec, y, yhat) -> DerivativeBuffers:
    return loss.derivatives(y, yhat)


def initial_prediction(loss: LossSpec, y) -> float:
    return loss.initial_prediction(y)
