"""Pointwise losses L(y, mu) and their first two derivatives in mu.

All functions broadcast over numpy arrays.
"""

import enum

import numpy as np
from scipy.special import expit


class LossKind(enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown loss {value!r}; expected one of {[k.value for k in cls]}"
            ) from None


def loss_value(kind, y, mu):
    """``0.5 (y - mu)^2`` or ``log(1 + e^mu) - y mu``."""
    kind = LossKind.parse(kind)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if kind is LossKind.SQUARED:
        return 0.5 * (y - mu) ** 2
    # log(1 + e^mu) without overflow; grouped so y = 1, mu >> 0 keeps the tiny tail
    return np.log1p(np.exp(-np.abs(mu))) + (np.maximum(mu, 0.0) - y * mu)


def loss_grad(kind, y, mu):
    kind = LossKind.parse(kind)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if kind is LossKind.SQUARED:
        return mu - y
    return expit(mu) - y


def loss_hess(kind, y, mu):
    kind = LossKind.parse(kind)
    mu = np.asarray(mu, dtype=float)
    if kind is LossKind.SQUARED:
        return np.ones(np.broadcast(np.asarray(y), mu).shape)
    s = expit(mu)
    return s * (1.0 - s)


def mean_loss(kind, y, mu):
    return float(np.mean(loss_value(kind, y, mu)))
