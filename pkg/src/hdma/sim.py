"""Synthetic designs, prediction metrics and the replication harness."""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .candidates import Ranking, marginal_scores, order_covariates
from .data import Dataset, standardize, write_csv
from .errors import ConfigError, ConvergenceWarning
from .inference import post_average_inference
from .loss import LossKind, loss_value
from .pipeline import HDMAConfig, fit_hdma
from .solver import fit_candidate, select_lambda_cv

MODELS = ("linear", "logistic")
COVS = ("ar1", "band")
DESIGNS = ("sparse", "polydecay", "expdecay", "inference_default", "custom")
PENALTIES = ("lasso", "scad", "mcp")
FAILURE_LIMIT = 0.10


@dataclass
class SimConfig:
    """One simulation setting. Index sets (``G``) are 0-based."""

    model: str = "linear"
    sigma: float = 0.5
    cov: str = "ar1"
    rho: float = 0.5
    coef_design: str = "sparse"
    coef: list | None = None
    n: int = 200
    p: int = 1000
    n_test: int = 1000
    R: int = 100
    seed: int = 0
    mode: str = "prediction"
    methods: list = field(default_factory=lambda: ["hdma_lasso", "lasso"])
    K_ne: int = 4
    d2: int = 10
    J: int = 5
    B: int = 500
    alpha: float = 0.05
    G: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    gamma_n: float | None = None
    standardize: bool = True
    algorithm: str = "fgma"

    def __post_init__(self):
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.model not in MODELS:
            bad("model", f"expected one of {MODELS}, got {self.model!r}")
        if self.cov not in COVS:
            bad("cov", f"expected one of {COVS}, got {self.cov!r}")
        if self.coef_design not in DESIGNS:
            bad("coef_design", f"expected one of {DESIGNS}, got {self.coef_design!r}")
        for name in ("n", "p", "n_test", "R", "K_ne", "d2", "B"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                bad(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.J, int) or not 2 <= self.J <= self.n:
            bad("J", f"must be an integer in [2, n], got {self.J!r}")
        if not 0 < self.rho < 1:
            bad("rho", f"must lie in (0, 1), got {self.rho!r}")
        if not self.sigma > 0:
            bad("sigma", f"must be positive, got {self.sigma!r}")
        if not 0 < self.alpha < 1:
            bad("alpha", f"must lie in (0, 1), got {self.alpha!r}")
        if self.mode not in ("prediction", "coverage"):
            bad("mode", f"expected 'prediction' or 'coverage', got {self.mode!r}")
        if self.gamma_n is not None and not self.gamma_n > 0:
            bad("gamma_n", "must be positive")
        if self.algorithm not in ("fgma", "gma"):
            bad("algorithm", f"expected 'fgma' or 'gma', got {self.algorithm!r}")
        if self.coef_design == "custom":
            if self.coef is None or len(self.coef) != self.p:
                bad("coef", f"custom design needs a length-{self.p} vector")
        if not self.G or any(not 0 <= g < self.p for g in self.G):
            bad("G", f"indices must be nonempty and lie in [0, {self.p})")
        if not self.methods:
            bad("methods", "at least one method is required")
        for m in self.methods:
            if isinstance(m, str) and m not in method_names():
                bad("methods", f"unknown method {m!r}; expected one of {method_names()}")
        if self.mode == "coverage":
            for m in self.methods:
                if isinstance(m, str) and not m.startswith("hdma_"):
                    bad("methods", f"coverage mode supports hdma_* methods only, got {m!r}")
        if self.coef_design in ("sparse",) and self.p < 20:
            bad("p", "the sparse design needs p >= 20")

    @property
    def loss(self):
        return LossKind.SQUARED if self.model == "linear" else LossKind.LOGISTIC

    def to_dict(self):
        out = asdict(self)
        out["methods"] = [m if isinstance(m, str) else getattr(m, "__name__", repr(m))
                          for m in self.methods]
        return out

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"{extra[0]}: unknown field")
        return cls(**d)


def method_names():
    return [f"hdma_{pen}" for pen in PENALTIES] + list(PENALTIES)


def gen_coefficients(design, p, model="linear", coef=None):
    """True coefficient vector for a named design (1-based formulas, 0-based array)."""
    j = np.arange(1, p + 1, dtype=float)
    if design == "custom":
        if coef is None or len(coef) != p:
            raise ConfigError(f"coef: custom design needs a length-{p} vector")
        return np.asarray(coef, dtype=float)
    if design == "inference_default":
        if p < 3:
            raise ConfigError("p: inference_default needs p >= 3")
        beta = np.zeros(p)
        beta[:3] = [2.0, 0.5, 1.0]
        return beta
    if design == "sparse":
        if p < 20:
            raise ConfigError("p: the sparse design needs p >= 20")
        beta = np.zeros(p)
        if model == "linear":
            beta[:5], beta[5:15], beta[15:20] = 1.0, 0.2, 1.0
        else:
            beta[:5], beta[5:15], beta[15:20] = 3.0, 1.0, -0.2
        return beta
    if design == "polydecay":
        if model == "linear":
            return 5.0 * j**-2.0
        tail = np.where(j > 5, np.maximum(j - 5, 1.0) ** -4.0, 0.0)
        return 5.0 * ((j <= 5) + tail)
    if design == "expdecay":
        if model == "linear":
            return 5.0 * np.exp(-0.3 * j)
        tail = np.where(j > 5, np.exp(-0.5 * (j - 5)), 0.0)
        return 5.0 * ((j <= 5) + tail)
    raise ConfigError(f"coef_design: unknown design {design!r}")


def gen_covariates(rng, n, p, cov="ar1", rho=0.5):
    """Rows from N(0, Sigma) for the AR(1) or tridiagonal band design."""
    E = rng.standard_normal((n, p))
    X = np.empty((n, p))
    if cov == "ar1":
        c = math.sqrt(1.0 - rho * rho)
        X[:, 0] = E[:, 0]
        for j in range(1, p):
            X[:, j] = rho * X[:, j - 1] + c * E[:, j]
        return X
    if cov == "band":
        # bidiagonal Cholesky factor of the tridiagonal Toeplitz matrix
        X[:, 0] = E[:, 0]
        diag = 1.0
        for j in range(1, p):
            off = rho / diag
            sq = 1.0 - off * off
            if sq <= 0:
                raise ConfigError(f"rho: band covariance is not positive definite at rho={rho}")
            diag = math.sqrt(sq)
            X[:, j] = off * E[:, j - 1] + diag * E[:, j]
        return X
    raise ConfigError(f"cov: unknown covariance {cov!r}")


def _response(rng, X, beta, model, sigma):
    eta = X @ beta
    if model == "linear":
        return eta + sigma * rng.standard_normal(X.shape[0])
    return (rng.random(X.shape[0]) < expit(eta)).astype(float)


def gen_dataset(cfg: SimConfig, replication: int):
    """``(train, test)`` for replication ``r`` (0-based).

    The training stream is keyed on ``(seed, r + 1)``; the test set always
    comes from ``(seed, 0)`` so it is the same in every replication.
    """
    beta = gen_coefficients(cfg.coef_design, cfg.p, cfg.model, cfg.coef)
    rng = np.random.default_rng([cfg.seed, replication + 1])
    X = gen_covariates(rng, cfg.n, cfg.p, cfg.cov, cfg.rho)
    train = Dataset(_response(rng, X, beta, cfg.model, cfg.sigma), X)
    return train, gen_test_set(cfg, beta)


def gen_test_set(cfg: SimConfig, beta=None):
    if beta is None:
        beta = gen_coefficients(cfg.coef_design, cfg.p, cfg.model, cfg.coef)
    rng = np.random.default_rng([cfg.seed, 0])
    X = gen_covariates(rng, cfg.n_test, cfg.p, cfg.cov, cfg.rho)
    return Dataset(_response(rng, X, beta, cfg.model, cfg.sigma), X)


def dataset_hash(d: Dataset):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(d.y).tobytes())
    h.update(np.ascontiguousarray(d.X).tobytes())
    return h.hexdigest()


def prediction_error(kind, beta_hat, test: Dataset):
    """Mean squared error (``"PE1"``) or mean logistic deviance term (``"PE2"``)."""
    mu = test.X @ np.asarray(beta_hat, dtype=float)
    if kind == "PE1":
        return float(np.mean((test.y - mu) ** 2))
    if kind == "PE2":
        return float(np.mean(loss_value(LossKind.LOGISTIC, test.y, mu)))
    raise ValueError(f"unknown prediction error {kind!r}")


@dataclass
class MethodResult:
    values: list
    failures: list = field(default_factory=list)
    lengths: list | None = None

    def ok(self):
        return [v for v in self.values if v is not None]

    def summary(self, mode):
        vals = self.ok()
        if mode == "coverage":
            lens = [v for v in (self.lengths or []) if v is not None]
            return {"CR": float(np.mean(vals)) if vals else float("nan"),
                    "AL": float(np.mean(lens)) if lens else float("nan")}
        mean = float(np.mean(vals)) if vals else float("nan")
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
        return {"Mean": mean, "SD": sd}


@dataclass
class SimReport:
    config: dict
    mode: str
    metric: str
    results: dict
    test_hash: str
    timing: dict = field(default_factory=dict)

    @property
    def R(self):
        return self.config["R"]

    def n_failed(self, method):
        return len(self.results[method].failures)

    @property
    def valid(self):
        return all(self.n_failed(m) <= FAILURE_LIMIT * self.R for m in self.results)

    def summary(self):
        return {m: r.summary(self.mode) for m, r in self.results.items()}

    def to_dict(self):
        return {
            "config": self.config,
            "mode": self.mode,
            "metric": self.metric,
            "valid": self.valid,
            "test_hash": self.test_hash,
            "summary": self.summary(),
            "replications": {
                m: {"values": r.values, "lengths": r.lengths,
                    "failures": [list(f) for f in r.failures]}
                for m, r in self.results.items()
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_rows(self):
        """Header and one row per setting: method columns with Mean/SD (or CR/AL) pairs."""
        keys = ("CR", "AL") if self.mode == "coverage" else ("Mean", "SD")
        summ = self.summary()
        header = ["setting"] + [f"{m} {k}" for m in self.results for k in keys]
        c = self.config
        label = f"{c['model']}/{c['cov']}/{c['coef_design']}/n={c['n']}/p={c['p']}"
        row = [label] + [repr(summ[m][k]) for m in self.results for k in keys]
        return header, [row]

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(indent=2, sort_keys=True) + "\n")
        header, rows = self.csv_rows()
        write_csv(out / "report.csv", header, rows)
        (out / "timing.json").write_text(json.dumps(self.timing, indent=2, sort_keys=True) + "\n")


def _working(train: Dataset, standardize_x: bool):
    if not standardize_x:
        return train, None
    return standardize(train, center=False)


def _to_original(beta_w, info):
    return beta_w if info is None else info.coef_to_original(beta_w)[0]


class _Replication:
    """Shared state for one replication: the CV-tuned initial fit per penalty."""

    def __init__(self, cfg: SimConfig, train: Dataset):
        self.cfg = cfg
        self.train = train
        self.work, self.info = _working(train, cfg.standardize)
        self._rankings = {}

    def hdma_config(self, penalty):
        return HDMAConfig(penalty=penalty, loss=self.cfg.loss.value, K_ne=self.cfg.K_ne,
                          d2=self.cfg.d2, J=self.cfg.J, seed=self.cfg.seed,
                          algorithm=self.cfg.algorithm, standardize=self.cfg.standardize)

    def ranking(self, penalty):
        if penalty not in self._rankings:
            hc = self.hdma_config(penalty)
            lam, _ = select_lambda_cv(self.work, hc.pkind, hc.lkind, hc.nfolds_lambda,
                                      hc.grid_size, hc.seed + 1, hc.fit)
            fit = fit_candidate(self.work, None, hc.pkind, lam, hc.lkind, hc.fit)
            scores = marginal_scores(self.work, hc.lkind)
            self._rankings[penalty] = Ranking(order_covariates(fit.beta, scores), fit,
                                              scores, lam)
        return self._rankings[penalty]

    def hdma(self, penalty):
        return fit_hdma(self.train, self.hdma_config(penalty), self.ranking(penalty))

    def baseline(self, penalty):
        return _to_original(self.ranking(penalty).initial_fit.beta, self.info)


def run_replications(cfg: SimConfig, methods=None, trajectory_dir=None, progress=None):
    """Run ``cfg.R`` replications of every method and aggregate.

    Parameters
    ----------
    cfg : SimConfig
    methods : list, optional
        Names from :func:`method_names` or callables. Defaults to
        ``cfg.methods``. In prediction mode a callable maps
        ``(train, cfg, r)`` to a coefficient vector; in coverage mode it
        returns ``(lower, upper)`` arrays over ``cfg.G``.
    trajectory_dir : path, optional
        If given, each HDMA fit writes its CV/n trajectory there as CSV.
    progress : callable, optional
        Called as ``progress(r, method, value)`` after every evaluation.

    Returns
    -------
    SimReport
        Failed evaluations are recorded and excluded; the report is marked
        invalid when more than 10% of replications fail for any method.
    """
    methods = list(cfg.methods if methods is None else methods)
    if not methods:
        raise ConfigError("methods: at least one method is required")
    names = [m if isinstance(m, str) else getattr(m, "__name__", f"method{i}")
             for i, m in enumerate(methods)]
    coverage = cfg.mode == "coverage"
    metric = "CR/AL" if coverage else ("PE1" if cfg.model == "linear" else "PE2")
    beta_true = gen_coefficients(cfg.coef_design, cfg.p, cfg.model, cfg.coef)
    test = gen_test_set(cfg, beta_true)
    results = {nm: MethodResult([None] * cfg.R, [], [None] * cfg.R if coverage else None)
               for nm in names}
    timing = {nm: 0.0 for nm in names}
    G = np.asarray(cfg.G, dtype=np.intp)
    tdir = None if trajectory_dir is None else Path(trajectory_dir)
    if tdir is not None:
        tdir.mkdir(parents=True, exist_ok=True)

    for r in range(cfg.R):
        train, _ = gen_dataset(cfg, r)
        rep = _Replication(cfg, train)
        for nm, m in zip(names, methods):
            t0 = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    if coverage:
                        lo, hi = _coverage_eval(m, rep, cfg, r, G, tdir, nm)
                        b = beta_true[G]
                        results[nm].values[r] = float(np.all((lo <= b) & (b <= hi)))
                        results[nm].lengths[r] = float(np.mean(hi - lo))
                    else:
                        beta_hat = _prediction_eval(m, rep, cfg, r, tdir, nm)
                        kind = "PE1" if cfg.model == "linear" else "PE2"
                        results[nm].values[r] = prediction_error(kind, beta_hat, test)
            except Exception as exc:  # recorded, excluded from aggregates
                results[nm].failures.append((r, f"{type(exc).__name__}: {exc}"))
            timing[nm] += time.perf_counter() - t0
            if progress is not None:
                progress(r, nm, results[nm].values[r])

    return SimReport(cfg.to_dict(), cfg.mode, metric, results, dataset_hash(test),
                     {"seconds_by_method": timing})


def _save_traj(model, tdir, name, r):
    if tdir is not None:
        model.weights.write_trajectory_csv(tdir / f"{name}_rep{r:04d}.csv")


def _prediction_eval(m, rep, cfg, r, tdir, name):
    if callable(m):
        return np.asarray(m(rep.train, cfg, r), dtype=float)
    if m.startswith("hdma_"):
        model = rep.hdma(m[5:])
        _save_traj(model, tdir, name, r)
        return model.beta
    return rep.baseline(m)


def _coverage_eval(m, rep, cfg, r, G, tdir, name):
    if callable(m):
        lo, hi = m(rep.train, cfg, r)
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    model = rep.hdma(m[5:])
    _save_traj(model, tdir, name, r)
    res = post_average_inference(rep.train, model.beta, G, cfg.B, cfg.alpha,
                                 seed=cfg.seed * 100003 + r, kind=cfg.loss,
                                 gamma_n=cfg.gamma_n)
    return res.lower, res.upper
