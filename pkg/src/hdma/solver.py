"""Penalized empirical-risk minimization restricted to a support set.

Weighted-Lasso fits use cyclic coordinate descent with active-set cycling
(see :mod:`hdma._kernels`). Logistic loss is handled by IRLS: each outer
step solves the weighted-Lasso problem on the quadratic approximation and
is damped by step halving on the penalized objective. SCAD and MCP are fitted
by local linear approximation (LLA), a short sequence of reweighted Lasso
fits started from zero.
"""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset, make_folds
from .errors import ConvergenceWarning
from .loss import LossKind, loss_grad, loss_value

IRLS_WEIGHT_FLOOR = 1e-6


class Penalty(enum.Enum):
    LASSO = "lasso"
    SCAD = "scad"
    MCP = "mcp"


@dataclass(frozen=True)
class PenaltyKind:
    """Penalty family plus its concavity parameter.

    ``param`` is ``a`` for SCAD (default 3.7, must exceed 2) and ``gamma``
    for MCP (default 3.0, must exceed 1); it is ignored for the Lasso.
    """

    tag: Penalty = Penalty.LASSO
    param: float | None = None

    def __post_init__(self):
        tag = Penalty(self.tag) if not isinstance(self.tag, Penalty) else self.tag
        param = self.param
        if tag is Penalty.SCAD:
            param = 3.7 if param is None else float(param)
            if not param > 2:
                raise ValueError(f"SCAD needs a > 2, got {param}")
        elif tag is Penalty.MCP:
            param = 3.0 if param is None else float(param)
            if not param > 1:
                raise ValueError(f"MCP needs gamma > 1, got {param}")
        else:
            param = None
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "param", param)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, Penalty):
            return cls(value)
        return cls(Penalty(str(value).lower()))

    @property
    def name(self):
        return self.tag.value

    @property
    def is_concave(self):
        return self.tag is not Penalty.LASSO


LASSO = PenaltyKind(Penalty.LASSO)
SCAD = PenaltyKind(Penalty.SCAD)
MCP = PenaltyKind(Penalty.MCP)


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 10000
    tol: float = 1e-7
    lla_steps: int = 3
    irls_max: int = 50

    def __post_init__(self):
        for name in ("max_iter", "tol", "lla_steps", "irls_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"FitConfig.{name} must be positive")


@dataclass
class CoefVector:
    """Coefficients fitted on ``support``; zero elsewhere."""

    beta: np.ndarray
    support: np.ndarray
    lam: float
    n_iter: int = 0
    converged: bool = True
    status: str = "converged"
    lasso_beta: np.ndarray | None = None  # LLA step-1 solution, for warm starts

    @property
    def nnz(self):
        return int(np.count_nonzero(self.beta))


@dataclass
class CVPath:
    """Diagnostics from :func:`select_lambda_cv`."""

    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    index: int
    nfolds: int
    seed: int
    warnings: list = field(default_factory=list)


def soft_threshold(z, tau):
    """``sign(z) * max(|z| - tau, 0)``."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def penalty_deriv(kind, lam, t):
    """Derivative ``r'_lam(t)`` for ``t >= 0``; the LLA reweighting function."""
    kind = PenaltyKind.parse(kind)
    t = np.abs(np.asarray(t, dtype=float))
    if kind.tag is Penalty.LASSO:
        out = np.full(t.shape, float(lam))
    elif kind.tag is Penalty.SCAD:
        a = kind.param
        out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
    else:
        out = np.maximum(lam - t / kind.param, 0.0)
    return out if out.ndim else float(out)


def penalty_value(kind, lam, t):
    """Penalty ``r_lam(|t|)`` summed over entries (used for objective checks)."""
    kind = PenaltyKind.parse(kind)
    t = np.abs(np.asarray(t, dtype=float))
    if kind.tag is Penalty.LASSO:
        v = lam * t
    elif kind.tag is Penalty.SCAD:
        a = kind.param
        v = np.where(
            t <= lam,
            lam * t,
            np.where(
                t <= a * lam,
                (2 * a * lam * t - t**2 - lam**2) / (2 * (a - 1)),
                lam**2 * (a + 1) / 2,
            ),
        )
    else:
        g = kind.param
        v = np.where(t <= g * lam, lam * t - t**2 / (2 * g), g * lam**2 / 2)
    return float(np.sum(v))


def _as_support(support, p):
    if support is None:
        return np.arange(p, dtype=np.intp)
    s = np.unique(np.asarray(support, dtype=np.intp))
    if s.size and (s[0] < 0 or s[-1] >= p):
        raise ValueError(f"support indices must lie in [0, {p})")
    return s


def _expand_lambda(per_coef_lambda, support, p):
    lam = np.asarray(per_coef_lambda, dtype=float)
    full = np.zeros(p)
    if lam.ndim == 0:
        full[support] = float(lam)
    elif lam.shape == (p,):
        full[support] = lam[support]
    elif lam.shape == (support.size,):
        full[support] = lam
    else:
        raise ValueError(
            f"per_coef_lambda must be scalar, length p={p} or length |support|={support.size}"
        )
    if np.any(full < 0):
        raise ValueError("penalty weights must be nonnegative")
    return full


def penalized_objective(d, beta, per_coef_lambda, kind=LossKind.SQUARED):
    """``(1/n) sum_i L(y_i, <beta, X_i>) + sum_j lam_j |beta_j|``."""
    mu = d.X @ beta
    return float(np.mean(loss_value(kind, d.y, mu)) + np.sum(per_coef_lambda * np.abs(beta)))


def kkt_residual(d, coef, per_coef_lambda, kind=LossKind.SQUARED):
    """Largest violation of the weighted-Lasso optimality conditions on the support."""
    p = d.p
    s = coef.support
    lam = _expand_lambda(per_coef_lambda, s, p)
    g = d.X[:, s].T @ loss_grad(kind, d.y, d.X @ coef.beta) / d.n
    b = coef.beta[s]
    active = b != 0
    res = np.zeros(s.size)
    res[active] = np.abs(g[active] + lam[s][active] * np.sign(b[active]))
    res[~active] = np.maximum(np.abs(g[~active]) - lam[s][~active], 0.0)
    return float(res.max()) if res.size else 0.0


def fit_weighted_lasso(d: Dataset, support, per_coef_lambda, kind=LossKind.SQUARED,
                       cfg: FitConfig = FitConfig(), beta0=None, backend=None,
                       _X=None):
    """Minimize ``(1/n) sum L(y_i, <beta, X_i>) + sum_j lam_j |beta_j|``.

    ``beta`` is constrained to vanish outside ``support``. ``per_coef_lambda``
    may be a scalar, a length-p vector or a vector aligned with ``support``.
    On non-convergence the last iterate is returned with ``converged=False``
    and a :class:`ConvergenceWarning` is issued.
    """
    kind = LossKind.parse(kind)
    n, p = d.n, d.p
    X = np.asfortranarray(d.X) if _X is None else _X
    s = _as_support(support, p)
    lam = _expand_lambda(per_coef_lambda, s, p)
    beta = np.zeros(p)
    if beta0 is not None:
        beta[s] = np.asarray(beta0, dtype=float)[s]
    kernel = _kernels.get_kernel(backend)
    lam_scalar = float(lam[s].max()) if s.size else 0.0

    if s.size == 0:
        return CoefVector(beta, s, lam_scalar)

    if kind is LossKind.SQUARED:
        w = np.ones(n)
        r = d.y - X @ beta
        colsq = np.zeros(p)
        colsq[s] = np.einsum("ij,ij->j", X[:, s], X[:, s]) / n
        n_iter, converged = kernel(X, w, r, beta, lam, s, colsq, cfg.max_iter, cfg.tol)
        status = "converged" if converged else "max_iter"
    else:
        beta, n_iter, converged, status = _irls(d, X, s, lam, beta, cfg, kernel)

    if not converged:
        warnings.warn(
            f"weighted Lasso ({kind.value}) stopped with status {status!r}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return CoefVector(beta, s, lam_scalar, int(n_iter), bool(converged), status)


def _irls(d, X, s, lam, beta, cfg, kernel):
    n, p = X.shape
    y = d.y

    def objective(b, mu):
        return float(np.mean(loss_value(LossKind.LOGISTIC, y, mu)) + lam @ np.abs(b))

    mu = X @ beta
    obj = objective(beta, mu)
    total = 0
    colsq = np.zeros(p)
    for outer in range(cfg.irls_max):
        prob = 1.0 / (1.0 + np.exp(-mu))
        w = np.maximum(prob * (1.0 - prob), IRLS_WEIGHT_FLOOR)
        r = (y - prob) / w
        colsq[s] = np.einsum("i,ij,ij->j", w, X[:, s], X[:, s]) / n
        cand = beta.copy()
        it, inner_ok = kernel(X, w, r, cand, lam, s, colsq, cfg.max_iter, cfg.tol)
        total += it
        direction = cand - beta
        step = 1.0
        accepted = False
        for _ in range(30):
            trial = beta + step * direction
            trial_mu = X @ trial
            trial_obj = objective(trial, trial_mu)
            if trial_obj <= obj + 1e-12 * max(1.0, abs(obj)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return beta, total, False, "irls_diverged"
        change = float(np.max(np.abs(trial - beta)))
        beta, mu, obj = trial, trial_mu, trial_obj
        if change < cfg.tol:
            return beta, total, bool(inner_ok), "converged" if inner_ok else "max_iter"
    return beta, total, False, "irls_max"


def fit_candidate(d: Dataset, support, pkind, lam, lkind=LossKind.SQUARED,
                  cfg: FitConfig = FitConfig(), beta0=None, backend=None, _X=None):
    """Penalized fit on ``support``; folded-concave penalties use LLA.

    Step 1 is a plain Lasso at ``lam`` (the LLA weights at zero); every later
    step refits with weights ``penalty_deriv(pkind, lam, |beta_prev|)``.
    ``beta0`` only warm-starts the first step.
    """
    pkind = PenaltyKind.parse(pkind)
    X = np.asfortranarray(d.X) if _X is None else _X
    fit = fit_weighted_lasso(d, support, lam, lkind, cfg, beta0, backend, _X=X)
    if not pkind.is_concave:
        return fit
    first = fit
    total = fit.n_iter
    for _ in range(cfg.lla_steps - 1):
        weights = penalty_deriv(pkind, lam, np.abs(fit.beta))
        fit = fit_weighted_lasso(d, fit.support, weights, lkind, cfg, fit.beta, backend, _X=X)
        total += fit.n_iter
    fit.lam = float(lam)
    fit.n_iter = total
    fit.lasso_beta = first.beta
    return fit


def lambda_max(d: Dataset, kind=LossKind.SQUARED, support=None):
    """Smallest ``lam`` for which the all-zero vector is optimal."""
    s = _as_support(support, d.p)
    if s.size == 0:
        return 0.0
    g0 = loss_grad(kind, d.y, np.zeros(d.n))
    return float(np.max(np.abs(d.X[:, s].T @ g0)) / d.n)


def lambda_grid(lmax, grid_size=100, min_ratio=1e-3):
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return lmax * np.logspace(0.0, np.log10(min_ratio), grid_size)


def fit_path(d: Dataset, support, pkind, lambdas, lkind=LossKind.SQUARED,
             cfg: FitConfig = FitConfig(), backend=None):
    """Warm-started fits along a decreasing ``lambdas`` grid; returns a (len, p) array."""
    pkind = PenaltyKind.parse(pkind)
    X = np.asfortranarray(d.X)
    out = np.zeros((len(lambdas), d.p))
    warm = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for t, lam in enumerate(lambdas):
            fit = fit_candidate(d, support, pkind, lam, lkind, cfg, warm, backend, _X=X)
            warm = fit.beta if fit.lasso_beta is None else fit.lasso_beta
            out[t] = fit.beta
    return out


def select_lambda_cv(d: Dataset, pkind, lkind=LossKind.SQUARED, nfolds=10,
                     grid_size=100, seed=0, cfg: FitConfig = FitConfig(),
                     support=None, min_ratio=1e-3, n_jobs=1, backend=None):
    """Pick ``lam`` by K-fold CV over a log grid from ``lambda_max`` down.

    The grid spans ``[lambda_max * min_ratio, lambda_max]``. The criterion is
    the mean held-out loss over all observations; exact ties go to the larger
    ``lam``. Returns ``(lam, CVPath)``.
    """
    lkind = LossKind.parse(lkind)
    lmax = lambda_max(d, lkind, support)
    if lmax <= 0:
        msg = "lambda_max is 0 (degenerate data); returning lambda = 0"
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
        path = CVPath(np.zeros(1), np.zeros(1), np.zeros(1), 0, nfolds, seed, [msg])
        return 0.0, path
    lambdas = lambda_grid(lmax, grid_size, min_ratio)
    folds = make_folds(d.n, nfolds, seed)

    def run(m):
        train = d.subset(folds.train_index(m))
        test_idx = folds.test_index(m)
        betas = fit_path(train, support, pkind, lambdas, lkind, cfg, backend)
        mu = d.X[test_idx] @ betas.T
        return loss_value(lkind, d.y[test_idx][:, None], mu).sum(axis=0)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            per_fold = list(pool.map(run, range(nfolds)))
    else:
        per_fold = [run(m) for m in range(nfolds)]
    sums = np.vstack(per_fold)
    sizes = folds.sizes()[:, None]
    cv_mean = sums.sum(axis=0) / d.n
    fold_means = sums / sizes
    cv_se = fold_means.std(axis=0, ddof=1) / np.sqrt(nfolds)
    idx = int(np.argmin(cv_mean))
    return float(lambdas[idx]), CVPath(lambdas, cv_mean, cv_se, idx, nfolds, seed)
