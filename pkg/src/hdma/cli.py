"""``hdma`` command line: fit, predict, infer, simulate, bench-solvers.

Exit codes: 0 success, 1 usage or data error, 2 numerical failure.
Set ``HDMA_LOG`` (e.g. ``DEBUG``) to control log verbosity. Column indices
are 0-based everywhere.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .data import Dataset, load_csv, write_csv
from .errors import ConfigError, DataError, NumericalError
from .inference import post_average_inference
from .pipeline import HDMAConfig, HDMAModel, fit_hdma
from .sim import SimConfig, run_replications
from .weights import FgmaConfig, FitBundle, fgma_solve, gma_solve

log = logging.getLogger("hdma")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _input_args(p, response=True):
    p.add_argument("--input", help="CSV file")
    if response:
        p.add_argument("--response", help="response column name or 0-based index (default 0)")
    p.add_argument("--no-header", dest="has_header", action="store_const", const=False,
                   help="the CSV has no header row")


def build_parser():
    parser = _Parser(prog="hdma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the model-averaging estimator")
    _input_args(f)
    f.add_argument("--config", help="JSON file with any of the options below")
    f.add_argument("--penalty", choices=["lasso", "scad", "mcp"])
    f.add_argument("--loss", choices=["squared", "logistic"])
    f.add_argument("--K-ne", dest="K_ne", type=int)
    f.add_argument("--d2", type=int)
    f.add_argument("--J", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--algorithm", choices=["fgma", "gma"])
    f.add_argument("--intercept", action="store_const", const=True)
    f.add_argument("--no-standardize", dest="standardize", action="store_const", const=False)
    f.add_argument("--threads", type=int)
    f.add_argument("--output-dir")

    pr = sub.add_parser("predict", help="apply a fitted model to new rows")
    pr.add_argument("--model")
    pr.add_argument("--input", help="CSV of covariates")
    pr.add_argument("--response", help="drop this column before predicting")
    pr.add_argument("--no-header", dest="has_header", action="store_const", const=False)
    pr.add_argument("--config")
    pr.add_argument("--output-dir")

    inf = sub.add_parser("infer", help="simultaneous confidence intervals")
    inf.add_argument("--model")
    _input_args(inf)
    inf.add_argument("--config")
    inf.add_argument("--B", type=int)
    inf.add_argument("--alpha", type=float)
    inf.add_argument("--G", help="comma-separated 0-based indices or 'all'")
    inf.add_argument("--gamma-n", dest="gamma_n", type=float)
    inf.add_argument("--seed", type=int)
    inf.add_argument("--raw-w", dest="symmetrize", action="store_const", const=False,
                     help="use the unsymmetrized inverse-Hessian estimate")
    inf.add_argument("--clime", dest="clime_method", choices=["lp", "admm"])
    inf.add_argument("--output-dir")

    s = sub.add_parser("simulate", help="run a simulation setting")
    s.add_argument("--config", help="SimConfig JSON")
    s.add_argument("--R", type=int, help="override the replication count")
    s.add_argument("--seed", type=int)
    s.add_argument("--trajectories", action="store_const", const=True,
                   help="write per-replication CV trajectories")
    s.add_argument("--output-dir")

    b = sub.add_parser("bench-solvers", help="FGMA vs GMA on random quadratic instances")
    b.add_argument("--config")
    b.add_argument("--instances", type=int)
    b.add_argument("--n", type=int)
    b.add_argument("--K", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--output-dir")
    return parser


DEFAULTS = {
    "fit": {"input": None, "response": "0", "has_header": True, "threads": 1,
            "output_dir": "hdma_out", **{k: v for k, v in HDMAConfig().to_dict().items()
                                        if k not in ("n_jobs",)}},
    "predict": {"model": None, "input": None, "response": None, "has_header": True,
                "output_dir": "hdma_out"},
    "infer": {"model": None, "input": None, "response": "0", "has_header": True, "B": 500,
              "alpha": 0.05, "G": "all", "gamma_n": None, "seed": 0, "symmetrize": True,
              "clime_method": "lp", "output_dir": "hdma_out"},
    "simulate": {"sim": None, "R": None, "seed": None, "trajectories": False,
                 "output_dir": "hdma_sim"},
    "bench-solvers": {"instances": 20, "n": 200, "K": 8, "seed": 0, "output_dir": "hdma_bench"},
}


def resolve(args):
    """Defaults, then the ``--config`` file, then explicit flags."""
    cmd = args.command
    cfg = json.loads(json.dumps(DEFAULTS[cmd]))
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path}: expected a JSON object")
        loaded.pop("command", None)
        if cmd == "simulate" and "sim" not in loaded:
            # a bare simulation setting
            loaded = {"sim": loaded}
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown field for {cmd}")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    return cfg


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _outdir(cfg):
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(cfg, *keys):
    for k in keys:
        if not cfg.get(k):
            raise UsageError(f"--{k.replace('_', '-')} is required")


def _response(value):
    if value is None:
        return None
    return int(value) if str(value).lstrip("-").isdigit() else value


def cmd_fit(cfg):
    _require(cfg, "input")
    d = load_csv(cfg["input"], _response(cfg["response"]), cfg["has_header"])
    hcfg_fields = {k: cfg[k] for k in HDMAConfig().to_dict() if k in cfg}
    hcfg_fields["n_jobs"] = int(cfg["threads"])
    hc = HDMAConfig.from_dict(hcfg_fields)
    out = _outdir(cfg)
    t0 = time.perf_counter()
    model = fit_hdma(d, hc)
    log.info("fit finished in %.2fs", time.perf_counter() - t0)
    doc = model.to_dict()
    doc["feature_names"] = d.feature_names
    _write_json(out / "model.json", doc)
    model.weights.write_trajectory_csv(out / "trajectory.csv")
    _write_json(out / "config.json", {"command": "fit", **cfg})
    w = model.weights
    lines = [
        f"n = {d.n}, p = {d.p}, K = {model.candidates.K} candidates",
        f"penalty = {hc.penalty}, loss = {hc.loss}, lambda_n = {model.lambda_n:.6g}",
        f"{w.algorithm}: {w.iterations} iterations, terminated by {w.terminated_by}",
        f"final CV/n = {w.cv:.10g}",
        "weights > 0: " + ", ".join(f"k={k}: {w.w[k]:.4f}" for k in np.flatnonzero(w.w > 0)),
        f"nonzero coefficients: {int(np.count_nonzero(model.beta))}",
    ]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _load_model(path):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"model file not found: {p}")
    try:
        doc = json.loads(p.read_text())
        return HDMAModel.from_dict(doc), doc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"{p}: not a valid model file ({exc})") from None


def cmd_predict(cfg):
    _require(cfg, "model", "input")
    model, _ = _load_model(cfg["model"])
    d = load_csv(cfg["input"], _response(cfg["response"]), cfg["has_header"])
    if d.p != model.p:
        raise DataError(f"covariate count mismatch: model expects p={model.p}, found p={d.p}")
    pred = model.predict(d.X)
    out = _outdir(cfg)
    write_csv(out / "predictions.csv", ["row", "prediction"],
              [[i, repr(float(v))] for i, v in enumerate(pred)])
    _write_json(out / "config.json", {"command": "predict", **cfg})
    return 0


def _parse_G(text, p):
    if text is None or str(text).strip().lower() == "all":
        return np.arange(p)
    if isinstance(text, list):
        idx = [int(v) for v in text]
    else:
        try:
            idx = [int(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--G must be 'all' or comma-separated integers, got {text!r}")
    if not idx or any(not 0 <= j < p for j in idx):
        raise UsageError(f"--G indices must lie in [0, {p})")
    return np.asarray(idx, dtype=np.intp)


def cmd_infer(cfg):
    _require(cfg, "model", "input")
    model, _ = _load_model(cfg["model"])
    d = load_csv(cfg["input"], _response(cfg["response"]), cfg["has_header"])
    if d.p != model.p:
        raise DataError(f"covariate count mismatch: model expects p={model.p}, found p={d.p}")
    if model.config.intercept:
        d = Dataset(d.y - d.y.mean(), d.X - d.X.mean(axis=0), d.feature_names)
    G = _parse_G(cfg["G"], d.p)
    res = post_average_inference(d, model.beta, G, int(cfg["B"]), float(cfg["alpha"]),
                                 int(cfg["seed"]), model.loss, cfg["gamma_n"],
                                 bool(cfg["symmetrize"]), cfg["clime_method"])
    bad = res.meta["infeasible_rows"]
    if bad:
        raise NumericalError(
            f"inverse-Hessian constraint infeasible for rows {bad} at gamma_n="
            f"{res.meta['gamma_n']:.6g}; rerun with a larger --gamma-n")
    out = _outdir(cfg)
    (out / "inference.json").write_text(res.to_json(indent=2, sort_keys=True) + "\n")
    res.write_csv(out / "inference.csv", d.feature_names)
    _write_json(out / "config.json", {"command": "infer", **cfg})
    print(f"Q = {res.q_hat:.6g}; {int(res.significant().sum())} of {len(G)} intervals exclude 0")
    return 0


def cmd_simulate(cfg):
    if cfg.get("sim") is None:
        raise UsageError("--config with a simulation setting is required")
    sim = dict(cfg["sim"])
    if cfg["R"] is not None:
        sim["R"] = cfg["R"]
    if cfg["seed"] is not None:
        sim["seed"] = cfg["seed"]
    sc = SimConfig.from_dict(sim)
    out = _outdir(cfg)
    tdir = out / "trajectories" if cfg["trajectories"] else None
    report = run_replications(
        sc, trajectory_dir=tdir,
        progress=lambda r, m, v: log.info("replication %d %s -> %s", r, m, v))
    report.write(out)
    resolved = {"command": "simulate", **cfg, "sim": sc.to_dict()}
    _write_json(out / "config.json", resolved)
    for m, s in report.summary().items():
        print(m, " ".join(f"{k}={v:.4f}" for k, v in s.items()),
              f"failed={report.n_failed(m)}")
    if not report.valid:
        raise NumericalError("more than 10% of replications failed; report marked invalid")
    return 0


def random_quadratic(rng, n, K):
    """Squared-loss CV instance with an interior-or-face simplex minimizer."""
    Z = rng.standard_normal((n, K)) + rng.standard_normal(K)
    w = rng.dirichlet(np.ones(K)) * (rng.random(K) < 0.7)
    w = w / w.sum() if w.sum() > 0 else np.eye(K)[0]
    y = Z @ w + 0.5 * rng.standard_normal(n)
    return FitBundle(Z, y)


def cmd_bench(cfg):
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    for i in range(int(cfg["instances"])):
        fb = random_quadratic(rng, int(cfg["n"]), int(cfg["K"]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t0 = time.perf_counter()
            f = fgma_solve(fb, FgmaConfig())
            t1 = time.perf_counter()
            g = gma_solve(fb)
            t2 = time.perf_counter()
        rows.append([i, f.iterations, repr(f.cv), repr(t1 - t0), g.iterations, repr(g.cv),
                     repr(t2 - t1)])
    out = _outdir(cfg)
    write_csv(out / "bench.csv", ["instance", "fgma_iter", "fgma_cv_over_n", "fgma_seconds",
                                  "gma_iter", "gma_cv_over_n", "gma_seconds"], rows)
    _write_json(out / "config.json", {"command": "bench-solvers", **cfg})
    wins = sum(float(r[2]) <= float(r[5]) + 1e-8 for r in rows)
    print(f"FGMA final CV/n <= GMA's in {wins}/{len(rows)} instances")
    return 0


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "infer": cmd_infer,
            "simulate": cmd_simulate, "bench-solvers": cmd_bench}


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return code


def main(argv=None):
    logging.basicConfig(level=os.environ.get("HDMA_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        return _fail(1, "usage", exc)
    except (DataError, ConfigError) as exc:
        return _fail(1, type(exc).__name__, exc)
    except NumericalError as exc:
        return _fail(2, "NumericalError", exc)
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(2, type(exc).__name__, exc)
    except (ValueError, TypeError, OSError) as exc:
        return _fail(1, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
