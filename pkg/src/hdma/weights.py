"""Cross-validation weight criterion over the simplex and its solvers."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FoldAssignment, write_csv
from .errors import ConvergenceWarning
from .loss import LossKind, loss_grad, loss_value
from .solver import CoefVector, FitConfig, PenaltyKind, fit_weighted_lasso, penalty_deriv


@dataclass
class FitBundle:
    """Candidate fits and their held-out predictions.

    ``Z[i, k]`` is the prediction for observation ``i`` from candidate ``k``
    fitted without the fold containing ``i``. ``B_full`` holds the full-data
    fits column-wise (may be None for synthetic instances).
    """

    Z: np.ndarray
    y: np.ndarray
    loss: LossKind = LossKind.SQUARED
    B_full: np.ndarray | None = None
    supports: list | None = None

    def __post_init__(self):
        self.Z = np.ascontiguousarray(self.Z, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.loss = LossKind.parse(self.loss)
        if self.Z.ndim != 2 or self.Z.shape[0] != self.y.shape[0]:
            raise ValueError(f"Z shape {self.Z.shape} does not match y of length {self.y.shape[0]}")

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def K(self):
        return self.Z.shape[1]


@dataclass(frozen=True)
class FgmaConfig:
    L0: float = 1.0
    gamma: float = 2.0
    eps: float = 1e-6
    max_iter: int = 500
    monotone: bool = True

    def __post_init__(self):
        if not (self.L0 > 0 and self.gamma > 1 and self.eps >= 0 and self.max_iter > 0):
            raise ValueError("FgmaConfig needs L0 > 0, gamma > 1, eps >= 0, max_iter > 0")


@dataclass
class WeightSolution:
    w: np.ndarray
    cv_trajectory: np.ndarray
    iterations: int
    terminated_by: str
    algorithm: str
    lipschitz: list = field(default_factory=list)
    descent_violations: int = 0

    @property
    def cv(self):
        return float(self.cv_trajectory[-1])

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "weights": self.w.tolist(),
            "cv_trajectory": self.cv_trajectory.tolist(),
            "iterations": self.iterations,
            "terminated_by": self.terminated_by,
            "descent_violations": self.descent_violations,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def write_trajectory_csv(self, path):
        write_csv(path, ["iteration", "cv_over_n"],
                  [[i, repr(float(v))] for i, v in enumerate(self.cv_trajectory)])


def build_fit_bundle(d: Dataset, cs, folds: FoldAssignment, pkind,
                     lkind=LossKind.SQUARED, cfg: FitConfig = FitConfig(),
                     always_include=None, n_jobs=1, backend=None):
    """Fit every candidate on all data and on each out-of-fold split.

    ``always_include`` lists columns (e.g. an intercept) added to every
    candidate support; give them zero penalty via the caller's data layout.
    """
    pkind = PenaltyKind.parse(pkind)
    lkind = LossKind.parse(lkind)
    K = cs.K
    extra = np.asarray([] if always_include is None else always_include, dtype=np.intp)
    supports = [np.union1d(g, extra).astype(np.intp) for g in cs.groups]

    def lam_vector(k):
        lam = np.full(d.p, cs.lambdas[k])
        lam[extra] = 0.0
        return lam

    def fit_all(data, tag):
        X = np.asfortranarray(data.X)
        out = np.zeros((data.p, K))
        for k in range(K):
            try:
                fit = _fit_weighted(data, supports[k], pkind, lam_vector(k), cs.lambdas[k],
                                    lkind, cfg, backend, X)
            except Exception as exc:
                raise type(exc)(f"candidate k={k}, {tag}: {exc}") from exc
            out[:, k] = fit.beta
        return out

    jobs = [(None, d)] + [(m, d.subset(folds.train_index(m))) for m in range(folds.J)]

    def run(job):
        m, data = job
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return fit_all(data, "full data" if m is None else f"fold m={m}")

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    B_full = results[0]
    Z = np.empty((d.n, K))
    for m in range(folds.J):
        idx = folds.test_index(m)
        Z[idx] = d.X[idx] @ results[m + 1]
    return FitBundle(Z, d.y.copy(), lkind, B_full, supports)


def _fit_weighted(data, support, pkind, lam_vec, lam, lkind, cfg, backend, X):
    # same LLA scheme as solver.fit_candidate, but zero-weight columns stay unpenalized
    fit = fit_weighted_lasso(data, support, lam_vec, lkind, cfg, None, backend, _X=X)
    if not pkind.is_concave:
        return fit
    zero = lam_vec == 0
    for _ in range(cfg.lla_steps - 1):
        weights = penalty_deriv(pkind, lam, np.abs(fit.beta))
        weights[zero] = 0.0
        fit = fit_weighted_lasso(data, support, weights, lkind, cfg, fit.beta, backend, _X=X)
    return fit


def cv_value(w, fb: FitBundle):
    """``CV(w) = sum_i L(y_i, <Z_i, w>)``."""
    return float(np.sum(loss_value(fb.loss, fb.y, fb.Z @ np.asarray(w, dtype=float))))


def cv_grad(w, fb: FitBundle):
    """``Z^T [dL/dmu (y_i, <Z_i, w>)]_i``."""
    return fb.Z.T @ loss_grad(fb.loss, fb.y, fb.Z @ np.asarray(w, dtype=float))


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - (css - 1.0) / k > 0)[-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def vertex_cv(fb: FitBundle):
    """``CV(e_k)`` for every vertex ``k``."""
    return np.sum(loss_value(fb.loss, fb.y[:, None], fb.Z), axis=0)


def fgma_solve(fb: FitBundle, cfg: FgmaConfig = FgmaConfig()):
    """Fast greedy model averaging: accelerated projected gradient on the simplex.

    Starts from the best single model. Each iteration backtracks
    ``L <- gamma * L`` until the isotropic quadratic model at the extrapolated
    point majorizes CV at the projected step, then applies Nesterov momentum.
    ``L`` never decreases. Stops when
    ``min_k grad_k >= <grad, w> - eps`` at the current iterate.

    With ``cfg.monotone`` (default) a projected step that would raise CV is
    not accepted: the iterate stays put and the momentum point is built from
    the rejected step, as in monotone FISTA. Whenever the step does descend
    this is exactly the plain accelerated update, which ``monotone=False``
    applies unconditionally.
    """
    n, K = fb.n, fb.K
    f0 = vertex_cv(fb)
    w = np.zeros(K)
    w[int(np.argmin(f0))] = 1.0
    cv_w = float(f0.min())
    traj = [cv_w / n]
    L = float(cfg.L0)
    lips = []

    def optimal(w_):
        g = cv_grad(w_, fb)
        return g.min() >= g @ w_ - cfg.eps

    if optimal(w):
        return WeightSolution(w, np.array(traj), 0, "gradient-criterion", "FGMA", lips)

    z = w.copy()
    A = 1.0
    best_w, best_cv = w.copy(), cv_w
    violations = 0
    terminated = "max-iter"
    N = 0
    for N in range(1, cfg.max_iter + 1):
        mu_z = fb.Z @ z
        f_z = float(np.sum(loss_value(fb.loss, fb.y, mu_z)))
        g_z = fb.Z.T @ loss_grad(fb.loss, fb.y, mu_z)
        while True:
            cand = project_simplex(z - g_z / L)
            diff = cand - z
            f_c = cv_value(cand, fb)
            bound = f_z + g_z @ diff + 0.5 * L * (diff @ diff)
            if f_c <= bound + 1e-12 * max(1.0, abs(bound)):
                break
            L *= cfg.gamma
        lips.append(L)
        w_prev = w
        if cfg.monotone and f_c > cv_w:
            w = w_prev.copy()
        else:
            if f_c > cv_w + 1e-10 * n:
                violations += 1
            w, cv_w = cand, f_c
        traj.append(cv_w / n)
        if cv_w < best_cv:
            best_w, best_cv = w.copy(), cv_w
        if optimal(w):
            terminated = "gradient-criterion"
            break
        A_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * A * A))
        z = w + ((A - 1.0) / A_next) * (w - w_prev) + (A / A_next) * (cand - w)
        A = A_next

    if terminated == "max-iter":
        warnings.warn("FGMA reached max_iter before the gradient criterion",
                      ConvergenceWarning, stacklevel=2)
        w = best_w
    return WeightSolution(w, np.array(traj), N, terminated, "FGMA", lips, violations)


def gma_solve(fb: FitBundle, eps1=1e-2, eps2=1e-3, max_iter=2000):
    """Greedy model averaging with step ``2/(N+2)`` and a vertex line search.

    Stops once ``alpha_N < eps1`` and ``max|w_N - w_{N-1}| < eps2``.
    """
    n, K = fb.n, fb.K
    f0 = vertex_cv(fb)
    k0 = int(np.argmin(f0))
    w = np.zeros(K)
    w[k0] = 1.0
    u = fb.Z[:, k0].copy()
    traj = [float(f0[k0]) / n]
    if K == 1:
        return WeightSolution(w, np.array(traj), 0, "singleton", "GMA")
    terminated = "max-iter"
    N = 0
    for N in range(1, max_iter + 1):
        alpha = 2.0 / (N + 2.0)
        mu = (1.0 - alpha) * u[:, None] + alpha * fb.Z
        vals = np.sum(loss_value(fb.loss, fb.y[:, None], mu), axis=0)
        k = int(np.argmin(vals))
        w_new = (1.0 - alpha) * w
        w_new[k] += alpha
        change = float(np.max(np.abs(w_new - w)))
        w = w_new
        u = mu[:, k].copy()
        traj.append(float(vals[k]) / n)
        if alpha < eps1 and change < eps2:
            terminated = "step-criterion"
            break
    if terminated == "max-iter":
        warnings.warn("GMA reached max_iter before its stopping rule",
                      ConvergenceWarning, stacklevel=2)
    return WeightSolution(w, np.array(traj), N, terminated, "GMA")


def model_average(B_full, w, supports=None):
    """``B_full @ w`` with support the union of candidate supports given weight."""
    B_full = np.asarray(B_full, dtype=float)
    w = np.asarray(w, dtype=float)
    beta = B_full @ w
    used = np.flatnonzero(w > 0)
    if supports is not None:
        sup = np.unique(np.concatenate([np.asarray(supports[k], dtype=np.intp) for k in used])) \
            if used.size else np.zeros(0, dtype=np.intp)
    else:
        sup = np.flatnonzero(np.any(B_full[:, used] != 0, axis=1)) if used.size else np.zeros(0, np.intp)
    return CoefVector(beta, sup.astype(np.intp), float("nan"))
