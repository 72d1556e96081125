"""End-to-end model averaging: rank, build candidates, fit folds, choose weights."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .candidates import CandidateSet, Ranking, build_candidate_set, rank_covariates
from .data import Dataset, ScalingInfo, make_folds, standardize
from .errors import ConfigError
from .loss import LossKind
from .solver import FitConfig, PenaltyKind
from .weights import (FgmaConfig, WeightSolution, build_fit_bundle, fgma_solve,
                      gma_solve, model_average)


@dataclass
class HDMAConfig:
    """Pipeline knobs.

    ``seed`` drives the weight-CV folds; the lambda-CV folds of the ranking
    fit use ``seed + 1``. With ``intercept`` (squared loss only) X and y are
    centered and the intercept is recovered afterwards; otherwise
    standardization only rescales columns.
    """

    penalty: str = "lasso"
    loss: str = "squared"
    K_ne: int = 4
    d2: int = 10
    J: int = 5
    seed: int = 0
    nfolds_lambda: int = 10
    grid_size: int = 100
    algorithm: str = "fgma"
    standardize: bool = True
    intercept: bool = False
    n_jobs: int = 1
    fgma: FgmaConfig = field(default_factory=FgmaConfig)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if isinstance(self.fgma, dict):
            self.fgma = FgmaConfig(**self.fgma)
        if isinstance(self.fit, dict):
            self.fit = FitConfig(**self.fit)
        try:
            PenaltyKind.parse(self.penalty)
        except ValueError as exc:
            raise ConfigError(f"penalty: {exc}") from None
        try:
            LossKind.parse(self.loss)
        except ValueError as exc:
            raise ConfigError(f"loss: {exc}") from None
        for name in ("K_ne", "d2", "nfolds_lambda", "n_jobs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if int(self.J) < 2:
            raise ConfigError("J must be at least 2")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be at least 2")
        if self.algorithm not in ("fgma", "gma"):
            raise ConfigError(f"algorithm must be 'fgma' or 'gma', got {self.algorithm!r}")
        if self.intercept and LossKind.parse(self.loss) is not LossKind.SQUARED:
            raise ConfigError("intercept is only supported with squared loss")

    @property
    def pkind(self):
        return PenaltyKind.parse(self.penalty)

    @property
    def lkind(self):
        return LossKind.parse(self.loss)

    def to_dict(self):
        out = asdict(self)
        out["fgma"] = asdict(self.fgma)
        out["fit"] = asdict(self.fit)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class HDMAModel:
    """Fitted model-averaging estimator.

    ``beta`` and ``intercept`` are on the original covariate scale;
    ``B_full`` holds the candidate fits on the working (standardized) scale.
    """

    beta: np.ndarray
    intercept: float
    weights: WeightSolution
    candidates: CandidateSet
    B_full: np.ndarray
    scaling: ScalingInfo | None
    config: HDMAConfig
    lambda_n: float
    y_mean: float = 0.0
    ranking: Ranking | None = None

    @property
    def loss(self):
        return self.config.lkind

    @property
    def p(self):
        return self.beta.size

    def linear_predictor(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            found = X.shape[1] if X.ndim == 2 else X.ndim
            raise ValueError(f"expected {self.p} covariates, found {found}")
        return X @ self.beta + self.intercept

    def predict(self, X):
        """Linear predictor, or the event probability under logistic loss."""
        mu = self.linear_predictor(X)
        return expit(mu) if self.loss is LossKind.LOGISTIC else mu

    def to_dict(self):
        return {
            "format": "hdma-model/1",
            "beta": self.beta.tolist(),
            "intercept": self.intercept,
            "weights": self.weights.to_dict(),
            "candidates": self.candidates.to_dict(),
            "B_full": self.B_full.tolist(),
            "scaling": None if self.scaling is None else self.scaling.to_dict(),
            "config": self.config.to_dict(),
            "lambda_n": self.lambda_n,
            "y_mean": self.y_mean,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "hdma-model/1":
            raise ValueError("not an hdma model file")
        wd = d["weights"]
        ws = WeightSolution(np.asarray(wd["weights"], dtype=float),
                            np.asarray(wd["cv_trajectory"], dtype=float),
                            int(wd["iterations"]), wd["terminated_by"], wd["algorithm"],
                            descent_violations=int(wd.get("descent_violations", 0)))
        scaling = None if d["scaling"] is None else ScalingInfo.from_dict(d["scaling"])
        return cls(np.asarray(d["beta"], dtype=float), float(d["intercept"]), ws,
                   CandidateSet.from_dict(d["candidates"]),
                   np.asarray(d["B_full"], dtype=float).reshape(len(d["beta"]), -1),
                   scaling, HDMAConfig.from_dict(d["config"]), float(d["lambda_n"]),
                   float(d.get("y_mean", 0.0)))


def working_data(d: Dataset, config: HDMAConfig):
    """Data on the scale the candidates are fitted on, plus the scaling record."""
    info = None
    y_mean = 0.0
    work = d
    if config.standardize:
        work, info = standardize(d, center=config.intercept)
    elif config.intercept:
        Xc = d.X - d.X.mean(axis=0)
        work = Dataset(d.y, Xc, d.feature_names)
    if config.intercept:
        y_mean = float(d.y.mean())
        work = Dataset(work.y - y_mean, work.X, work.feature_names)
    return work, info, y_mean


def fit_hdma(d: Dataset, config: HDMAConfig = HDMAConfig(), ranking: Ranking | None = None,
             backend=None) -> HDMAModel:
    """Fit the cross-validated model-averaging estimator.

    Parameters
    ----------
    d : Dataset
        Training data on its original scale.
    config : HDMAConfig
    ranking : Ranking, optional
        Precomputed covariate ranking on the working scale. Skips the
        lambda-CV initial fit, which dominates the run time.
    backend : str, optional
        Coordinate-descent kernel (``"cython"`` or ``"python"``).

    Returns
    -------
    HDMAModel
    """
    lkind, pkind = config.lkind, config.pkind
    if lkind is LossKind.LOGISTIC:
        d.check_binary()
    work, info, y_mean = working_data(d, config)
    if ranking is None:
        ranking = rank_covariates(work, pkind, lkind, seed=config.seed + 1,
                                  nfolds=config.nfolds_lambda, grid_size=config.grid_size,
                                  cfg=config.fit, n_jobs=config.n_jobs)
    cs = build_candidate_set(ranking, config.K_ne, config.d2, work.p)
    folds = make_folds(work.n, config.J, config.seed)
    fb = build_fit_bundle(work, cs, folds, pkind, lkind, config.fit,
                          n_jobs=config.n_jobs, backend=backend)
    if config.algorithm == "fgma":
        sol = fgma_solve(fb, config.fgma)
    else:
        sol = gma_solve(fb)
    avg = model_average(fb.B_full, sol.w, fb.supports)
    if info is not None:
        beta, intercept = info.coef_to_original(avg.beta)
    else:
        beta, intercept = avg.beta.copy(), 0.0
        if config.intercept:
            intercept = -float(d.X.mean(axis=0) @ beta)
    intercept += y_mean
    return HDMAModel(beta, intercept, sol, cs, fb.B_full, info, config,
                     float(ranking.lambda_n), y_mean, ranking)
