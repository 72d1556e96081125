"""Covariate ranking and the nested + non-nested candidate model set."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .loss import LossKind
from .solver import CoefVector, FitConfig, PenaltyKind, fit_candidate, select_lambda_cv


@dataclass
class Ranking:
    """Covariate order (most important first) with the fit that produced it."""

    order: np.ndarray
    initial_fit: CoefVector
    marginal_scores: np.ndarray
    lambda_n: float = 0.0

    @property
    def support_size(self):
        return self.initial_fit.nnz


@dataclass
class CandidateSet:
    """Candidate index sets ``groups[k]`` (original column ids) and their penalties.

    The first ``n_nested`` groups are nested; the rest are pairwise disjoint
    and disjoint from the largest nested group.
    """

    groups: list
    K_ne: int
    d1: int
    p0: int
    d2: int
    lambdas: np.ndarray

    @property
    def K(self):
        return len(self.groups)

    @property
    def n_nested(self):
        return min(self.K_ne, self.K)

    def sizes(self):
        return [len(g) for g in self.groups]

    def to_dict(self):
        return {
            "K": self.K,
            "K_ne": self.K_ne,
            "d1": self.d1,
            "p0": self.p0,
            "d2": self.d2,
            "groups": [np.asarray(g).tolist() for g in self.groups],
            "lambdas": np.asarray(self.lambdas).tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(
            [np.asarray(g, dtype=np.intp) for g in d["groups"]],
            int(d["K_ne"]),
            int(d["d1"]),
            int(d["p0"]),
            int(d["d2"]),
            np.asarray(d["lambdas"], dtype=float),
        )


def marginal_scores(d: Dataset, kind=LossKind.SQUARED):
    """Absolute marginal association of each column with the response.

    Squared loss: ``|corr(x_j, y)|``. Logistic loss: the score statistic
    ``|sum_i (y_i - ybar) x_ij| / (sqrt(n) sd_j)``. Constant columns score 0.
    """
    kind = LossKind.parse(kind)
    X = d.X - d.X.mean(axis=0)
    yc = d.y - d.y.mean()
    sd = np.sqrt((X**2).sum(axis=0) / (d.n - 1))
    num = np.abs(yc @ X)
    scores = np.zeros(d.p)
    ok = sd > 0
    if kind is LossKind.SQUARED:
        ynorm = np.sqrt(yc @ yc)
        if ynorm > 0:
            scores[ok] = num[ok] / (np.sqrt((X[:, ok] ** 2).sum(axis=0)) * ynorm)
    else:
        scores[ok] = num[ok] / (np.sqrt(d.n) * sd[ok])
    return scores


def order_covariates(beta, scores):
    """Support of ``beta`` by |coefficient| descending, then the rest by score.

    Ties in either block go to the lower column index.
    """
    beta = np.asarray(beta, dtype=float)
    scores = np.asarray(scores, dtype=float)
    idx = np.arange(beta.size)
    inside = idx[beta != 0]
    outside = idx[beta == 0]
    # np.lexsort sorts by the last key first; idx breaks ties ascending
    first = inside[np.lexsort((inside, -np.abs(beta[inside])))]
    second = outside[np.lexsort((outside, -scores[outside]))]
    return np.concatenate([first, second]).astype(np.intp)


def rank_covariates(d: Dataset, pkind, lkind=LossKind.SQUARED, seed=0,
                    nfolds=10, grid_size=100, cfg: FitConfig = FitConfig(),
                    n_jobs=1):
    """Fit the CV-tuned initial estimator and rank covariates from it."""
    lam, _ = select_lambda_cv(d, pkind, lkind, nfolds, grid_size, seed, cfg, n_jobs=n_jobs)
    fit = fit_candidate(d, None, pkind, lam, lkind, cfg)
    scores = marginal_scores(d, lkind)
    return Ranking(order_covariates(fit.beta, scores), fit, scores, lam)


def scale_lambda(lambda_n, size_k, p0):
    """``sqrt(log max(|A_k|, 2) / log p0) * lambda_n``."""
    if p0 < 2:
        raise ValueError(f"p0 must be at least 2, got {p0}")
    if size_k < 1:
        raise ValueError("candidate size must be positive")
    return math.sqrt(math.log(max(size_k, 2)) / math.log(p0)) * lambda_n


def build_candidate_set(r: Ranking, K_ne=4, d2=10, p=None, lambda_n=None):
    """Split ranked covariates into nested and non-nested candidate groups.

    ``d1 = 2 ceil(s / K_ne)`` (at least 1) with ``s`` the initial support
    size, ``p0 = K_ne d1`` and ``K = K_ne + floor((p - p0) / d2)``. Covariates
    left over past the last full non-nested group join that group; if no full
    group fits they form one group of their own. When ``p0 >= p`` the set is
    nested-only over all ``p`` covariates with ``d1 = ceil(p / K_ne)``;
    repeats of the full set are dropped, so ``K`` may fall below ``K_ne``.
    """
    if K_ne < 1 or d2 < 1:
        raise ValueError("K_ne and d2 must be positive")
    order = np.asarray(r.order, dtype=np.intp)
    p = order.size if p is None else int(p)
    if p <= 0 or order.size != p:
        raise ValueError(f"ranking has {order.size} entries for p={p}")
    lambda_n = r.lambda_n if lambda_n is None else lambda_n
    s = r.support_size

    d1 = max(2 * math.ceil(s / K_ne), 1)
    p0 = K_ne * d1
    groups = []
    if p0 >= p:
        d1 = math.ceil(p / K_ne)
        p0 = p
        for k in range(1, K_ne + 1):
            g = order[: min(k * d1, p)]
            if not groups or g.size > groups[-1].size:  # no repeated full set
                groups.append(g)
    else:
        for k in range(1, K_ne + 1):
            groups.append(order[: k * d1])
        n_non = (p - p0) // d2
        for k in range(n_non):
            groups.append(order[p0 + k * d2: p0 + (k + 1) * d2])
        tail = order[p0 + n_non * d2:]
        if tail.size:
            if n_non:
                groups[-1] = np.concatenate([groups[-1], tail])
            else:
                groups.append(tail)

    if p0 >= 2:
        lambdas = np.array([scale_lambda(lambda_n, len(g), p0) for g in groups])
    else:
        lambdas = np.full(len(groups), float(lambda_n))
    return CandidateSet([np.asarray(g, dtype=np.intp) for g in groups],
                        int(K_ne), int(d1), int(p0), int(d2), lambdas)
