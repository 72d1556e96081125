"""Post-averaging simultaneous inference.

The chain is: Hessian estimate at the averaged coefficients, a CLIME-type
inverse-Hessian estimate, optional symmetrization, a one-step debiasing
correction, and a Gaussian multiplier bootstrap for the max-norm quantile
over an index set ``G``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .data import Dataset, write_csv
from .errors import ConvergenceWarning
from .loss import LossKind, loss_grad, loss_hess

S_FLOOR = 1e-8
GAMMA_CONST = 0.5


@dataclass
class InverseHessianEstimate:
    W: np.ndarray
    gamma_n: float
    per_row_status: list
    J_hat: np.ndarray | None = None
    method: str = "lp"

    @property
    def all_feasible(self):
        return all(s == "optimal" for s in self.per_row_status)

    def infeasible_rows(self):
        return [j for j, s in enumerate(self.per_row_status) if s == "infeasible"]


@dataclass
class InferenceResult:
    beta_debiased: np.ndarray
    s_hat: np.ndarray
    q_hat: float
    G: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    B: int | None = None
    seed: int | None = None
    n: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def half_width(self):
        return 0.5 * (self.upper - self.lower)

    @property
    def intervals(self):
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    def covers(self, beta_true):
        b = np.asarray(beta_true, dtype=float)[self.G]
        return bool(np.all((self.lower <= b) & (b <= self.upper)))

    def significant(self):
        return (self.lower > 0) | (self.upper < 0)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "B": self.B,
            "seed": self.seed,
            "n": self.n,
            "q_hat": self.q_hat,
            "G": self.G.tolist(),
            "estimate": self.beta_debiased[self.G].tolist(),
            "s_hat": self.s_hat[self.G].tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "meta": self.meta,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def write_csv(self, path, feature_names=None):
        rows = []
        sig = self.significant()
        for t, j in enumerate(self.G):
            name = feature_names[j] if feature_names is not None else ""
            rows.append([int(j), name, repr(float(self.beta_debiased[j])),
                         repr(float(self.lower[t])), repr(float(self.upper[t])),
                         int(sig[t])])
        write_csv(path, ["index", "feature", "estimate", "lower", "upper", "significant"], rows)


def hessian_matrix(d: Dataset, beta, kind=LossKind.SQUARED):
    """``(1/n) sum_i L''(y_i, <beta, X_i>) X_i X_i^T``."""
    h = loss_hess(kind, d.y, d.X @ np.asarray(beta, dtype=float))
    return (d.X * h[:, None]).T @ d.X / d.n


def default_gamma_n(n, p, const=GAMMA_CONST):
    """``const * sqrt(log p / n)``."""
    return const * math.sqrt(math.log(max(p, 2)) / n)


def _clime_row_lp(J_hat, j, gamma):
    p = J_hat.shape[0]
    e = np.zeros(p)
    e[j] = 1.0
    # w = u - v with u, v >= 0;  -gamma <= J w - e <= gamma
    A = np.hstack([J_hat, -J_hat])
    A_ub = np.vstack([A, -A])
    b_ub = np.concatenate([e + gamma, gamma - e])
    res = linprog(np.ones(2 * p), A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if res.status == 2:
        return np.zeros(p), "infeasible"
    if res.status != 0:
        return np.zeros(p), "failed"
    x = res.x
    return x[:p] - x[p:], "optimal"


def _clime_admm(J_hat, gamma, rho=1.0, max_iter=20000, tol=1e-9):
    """Linearized ADMM for all rows at once.

    Solves ``min ||W||_1  s.t. ||W J - I||_max <= gamma`` with the split
    ``Z = W J - I`` projected onto the max-norm ball and a soft-threshold
    step on ``W``.
    """
    p = J_hat.shape[0]
    I = np.eye(p)
    eta = 1.01 * rho * np.linalg.norm(J_hat, 2) ** 2
    W = np.zeros((p, p))
    Z = -I.copy()
    U = np.zeros((p, p))
    converged = False
    for _ in range(max_iter):
        R = W @ J_hat - I - Z + U
        V = W - (rho / eta) * (R @ J_hat)
        W = np.sign(V) * np.maximum(np.abs(V) - 1.0 / eta, 0.0)
        A = W @ J_hat - I
        Z_old = Z
        Z = np.clip(A + U, -gamma, gamma)
        U = U + A - Z
        primal = np.max(np.abs(A - Z))
        dual = rho * np.max(np.abs((Z - Z_old) @ J_hat))
        if primal < tol and dual < tol:
            converged = True
            break
    return W, converged


def clime(J_hat, gamma_n, method="lp"):
    """Row-wise CLIME: ``min ||w_j||_1  s.t. ||J_hat w_j - e_j||_inf <= gamma_n``.

    ``method="lp"`` solves each row exactly as a linear program (HiGHS);
    ``method="admm"`` runs a linearized ADMM over all rows jointly. Rows that
    cannot meet the constraint are zero-filled and flagged ``"infeasible"``.
    """
    J_hat = np.asarray(J_hat, dtype=float)
    p = J_hat.shape[0]
    if gamma_n <= 0:
        raise ValueError("gamma_n must be positive")
    if method == "lp":
        W = np.zeros((p, p))
        status = []
        for j in range(p):
            W[j], st = _clime_row_lp(J_hat, j, gamma_n)
            status.append(st)
    elif method == "admm":
        W, ok = _clime_admm(J_hat, gamma_n)
        viol = np.max(np.abs(W @ J_hat - np.eye(p)), axis=1)
        status = ["optimal" if v <= gamma_n + 1e-6 else "max_iter" for v in viol]
        if not ok:
            warnings.warn("CLIME ADMM hit its iteration cap", ConvergenceWarning, stacklevel=2)
    else:
        raise ValueError(f"unknown CLIME method {method!r}")
    return InverseHessianEstimate(W, float(gamma_n), status, J_hat, method)


def estimate_inverse_hessian(d: Dataset, beta_ma, gamma_n=None, kind=LossKind.SQUARED,
                             method="lp"):
    beta = getattr(beta_ma, "beta", beta_ma)
    gamma_n = default_gamma_n(d.n, d.p) if gamma_n is None else gamma_n
    return clime(hessian_matrix(d, beta, kind), gamma_n, method)


def symmetrize(W):
    """Keep the smaller-magnitude entry of each ``(i, j)``/``(j, i)`` pair."""
    W = np.asarray(W, dtype=float)
    Wt = W.T
    return np.where(np.abs(W) <= np.abs(Wt), W, Wt)


def score_matrix(d: Dataset, beta, kind=LossKind.SQUARED):
    """Rows ``dL/dmu(y_i, <beta, X_i>) X_i``."""
    g = loss_grad(kind, d.y, d.X @ beta)
    return d.X * g[:, None]


def debias(d: Dataset, beta_ma, W, kind=LossKind.SQUARED):
    """One-step correction ``beta - W (1/n) sum_i dL/dmu X_i``."""
    beta = np.asarray(getattr(beta_ma, "beta", beta_ma), dtype=float)
    grad = score_matrix(d, beta, kind).mean(axis=0)
    return beta - np.asarray(W) @ grad


def s_hat(d: Dataset, beta_ma, kind=LossKind.SQUARED):
    """Diagonal of the sample Hessian, floored at 1e-8 (with a warning)."""
    beta = np.asarray(getattr(beta_ma, "beta", beta_ma), dtype=float)
    h = loss_hess(kind, d.y, d.X @ beta)
    s = (h[:, None] * d.X**2).mean(axis=0)
    low = s < S_FLOOR
    if low.any():
        warnings.warn(
            f"Hessian diagonal floored at {S_FLOOR} for columns {np.flatnonzero(low).tolist()}",
            RuntimeWarning,
            stacklevel=2,
        )
        s = np.where(low, S_FLOOR, s)
    return s


def multipliers(seed, b, n):
    """Standard normal multipliers for replicate ``b``; keyed on ``(seed, b)``."""
    gen = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(b)]))
    return gen.standard_normal(n)


def bootstrap_norms(d: Dataset, beta_ma, W, s, G, B, seed, kind=LossKind.SQUARED):
    """Max-norms over ``G`` of the ``B`` multiplier-bootstrap draws."""
    beta = np.asarray(getattr(beta_ma, "beta", beta_ma), dtype=float)
    G = np.asarray(G, dtype=np.intp)
    scores = score_matrix(d, beta, kind)                     # n x p
    M = (np.asarray(s)[G, None] * np.asarray(W)[G]) @ scores.T / math.sqrt(d.n)  # |G| x n
    E = np.column_stack([multipliers(seed, b, d.n) for b in range(B)])  # n x B
    return np.max(np.abs(M @ E), axis=0)


def upper_quantile(norms, alpha):
    """Order statistic ``ceil((1 - alpha) B)`` of the ascending norms."""
    norms = np.sort(np.asarray(norms, dtype=float))
    B = norms.size
    k = math.ceil(round((1.0 - alpha) * B, 9))
    return float(norms[min(max(k, 1), B) - 1])


def bootstrap_quantile(d: Dataset, beta_ma, W, s, G, B=500, alpha=0.05, seed=0,
                       kind=LossKind.SQUARED):
    if B < 1 or not 0 < alpha < 1 or len(G) == 0:
        raise ValueError("need B >= 1, 0 < alpha < 1 and nonempty G")
    return upper_quantile(bootstrap_norms(d, beta_ma, W, s, G, B, seed, kind), alpha)


def simultaneous_ci(beta_debiased, s, q_hat, G, n, alpha=0.05, B=None, seed=None):
    """Intervals ``beta_j -/+ q_hat / (s_j sqrt(n))`` for ``j`` in ``G``."""
    if q_hat < 0:
        raise ValueError("q_hat must be nonnegative")
    beta_debiased = np.asarray(beta_debiased, dtype=float)
    s = np.asarray(s, dtype=float)
    G = np.asarray(G, dtype=np.intp)
    half = q_hat / (s[G] * math.sqrt(n))
    centre = beta_debiased[G]
    return InferenceResult(beta_debiased, s, float(q_hat), G, centre - half, centre + half,
                           float(alpha), B, seed, int(n))


def post_average_inference(d: Dataset, beta_ma, G=None, B=500, alpha=0.05, seed=0,
                           kind=LossKind.SQUARED, gamma_n=None, use_symmetrized=True,
                           clime_method="lp"):
    """Full chain: CLIME, (symmetrize), debias, bootstrap quantile, intervals."""
    kind = LossKind.parse(kind)
    beta = np.asarray(getattr(beta_ma, "beta", beta_ma), dtype=float)
    G = np.arange(d.p) if G is None else np.asarray(G, dtype=np.intp)
    est = estimate_inverse_hessian(d, beta, gamma_n, kind, clime_method)
    W = symmetrize(est.W) if use_symmetrized else est.W
    beta_tilde = debias(d, beta, W, kind)
    s = s_hat(d, beta, kind)
    q = bootstrap_quantile(d, beta, W, s, G, B, alpha, seed, kind)
    res = simultaneous_ci(beta_tilde, s, q, G, d.n, alpha, B, seed)
    res.meta = {
        "gamma_n": est.gamma_n,
        "clime_method": clime_method,
        "symmetrized": bool(use_symmetrized),
        "infeasible_rows": est.infeasible_rows(),
        "loss": kind.value,
    }
    return res
