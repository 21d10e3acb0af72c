"""Pipeline stages and the replicated coverage experiment.

Stages read and write files in the output directory; file names carry a
hash of the settings that determine their content, so a stage whose output
already exists is not recomputed. All randomness derives from the master
seed (see :mod:`trustcal.config` for the key layout).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._seeding import derive_rng, derive_seed
from .baselines import asymptotic_cutoff, fit_mc, oracle_cutoffs
from .calibration import CalibratedCutoffs, TrustCalibrator, _as_points, confidence_set, intervals_1d
from .config import config_hash
from .evaluation import (
    ExperimentResult,
    coverage_from_tau,
    evaluation_points,
    mae,
    oracle_deviation,
    replicate_summary,
    simulate_tau,
)
from .forest import Forest, ForestParams, fit_forest, tune_m
from .io import (
    BUNDLE_VERSION,
    bundle_to_partitioner,
    calibrator_to_bundle,
    read_bundle,
    read_observed,
    read_simulated_set,
    write_bundle,
    write_report_csv,
    write_simulated_set,
)
from .models import make_model
from .nuisance import build_nuisance_grid, expand_points, nuisance_cutoff, nuisance_cutoff_bounds
from .statistics import make_statistic
from .tree import TreeParams, fit_tree
from .uncertainty import cutoff_bounds, three_way_labels

__all__ = [
    "FittedMethod",
    "build_model",
    "build_statistic",
    "simulate_calibration",
    "fit_method",
    "confset_grid",
    "method_cutoffs",
    "run_replicate",
    "run_experiment",
    "run_simulate",
    "run_fit",
    "run_confset",
    "run_pvalue",
    "run_tune",
    "read_results",
    "write_results",
    "format_summary",
    "NOT_IMPLEMENTED",
]

log = logging.getLogger(__name__)

NOT_IMPLEMENTED = "not implemented"
# forests union the thresholds of all their trees, so their nuisance grid is
# capped: at most 100 thresholds per coordinate and about 1000 grid points
_FOREST_MAX_PER_DIM = 100
_FOREST_MAX_GRID = 1000


def build_model(cfg):
    return make_model(cfg["model"]["name"], **dict(cfg["model"].get("overrides") or {}))


def build_statistic(cfg):
    post = cfg["statistic"]["posterior"]
    return make_statistic(cfg["statistic"]["name"], mode=post["mode"], n_points_1d=post["n_points_1d"],
                          n_points_2d=post["n_points_2d"])


def simulate_calibration(model, statistic, B: int, n: int, seed):
    """``B`` records ``(theta, x, tau)`` with ``theta`` from the reference
    distribution."""
    theta = model.sample_reference(B, derive_rng(seed, "theta"))
    x = model.simulate(theta, n, derive_rng(seed, "x"))
    tau = statistic.evaluate(model, x, theta[:, list(model.interest)])
    return theta, x, tau


# ---------------------------------------------------------------------------
# fitted calibrators


@dataclass
class FittedMethod:
    """A fitted TRUST or TRUST++ calibrator plus what is needed to answer
    cutoff queries at interest values (nuisance handling included)."""

    method: str
    partitioner: object
    calibrator: object
    model: object
    nuisance_max_per_dim: int | None = None
    depth_limit: int | None = None
    tune_table: dict = field(default_factory=dict)

    @property
    def M(self):
        return getattr(self.calibrator, "M", None)

    def nuisance_grid(self):
        cap = self.nuisance_max_per_dim
        if isinstance(self.partitioner, Forest) and cap is None:
            k = len(self.model.nuisance)
            cap = min(_FOREST_MAX_PER_DIM, max(1, int(_FOREST_MAX_GRID ** (1.0 / k) / 2 + 1e-9)))
        return build_nuisance_grid(self.partitioner, self.model.nuisance, self.model.box, self.depth_limit, cap)

    def cutoffs(self, mu, alpha: float, beta: float | None = None) -> CalibratedCutoffs:
        """Cutoffs at interest values ``mu`` (full parameters when the
        model has no nuisance), with bounds when ``beta`` is given."""
        model = self.model
        mu = _as_points(mu)
        if not model.has_nuisance:
            out = self.calibrator.cutoffs(mu, alpha)
            if beta is not None:
                out.lower, out.upper = cutoff_bounds(self.calibrator.neighborhood_values(mu), alpha, beta)
                out.meta["beta"] = beta
            return out
        grid = self.nuisance_grid()
        out = nuisance_cutoff(self.calibrator, mu, grid, alpha, model.interest, model.dim)
        if beta is not None:
            nuisance_cutoff_bounds(self.calibrator, out, model.interest, model.nuisance, model.dim, alpha, beta)
        return out

    def p_values(self, mu, tau_obs) -> np.ndarray:
        """Adjusted-ECDF p-values; with nuisance parameters the largest
        value over the nuisance grid."""
        model = self.model
        mu = _as_points(mu)
        tau_obs = np.broadcast_to(np.asarray(tau_obs, dtype=float), (len(mu),))
        if not model.has_nuisance:
            return self.calibrator.p_values(mu, tau_obs)
        nu = self.nuisance_grid().points
        full = expand_points(mu, nu, model.interest, model.nuisance, model.dim)
        p = self.calibrator.p_values(full, np.repeat(tau_obs, len(nu)))
        return p.reshape(len(mu), len(nu)).max(axis=1)


def _split_rows(B: int, fraction: float, seed):
    perm = derive_rng(seed, "split").permutation(B)
    k = int(round(fraction * B))
    if k < 1 or k >= B:
        raise ValueError("split leaves an empty training or calibration set")
    return np.sort(perm[:k]), np.sort(perm[k:])


def fit_method(cfg, method: str, model, statistic, theta, tau, seed) -> FittedMethod:
    """Fit ``trust``, ``trustpp`` or ``trustpp-tuned`` on the records.

    With ``split`` enabled, the partition is fitted on one part of the
    records and calibrated on the rest; otherwise all records serve both.
    """
    theta = np.atleast_2d(theta)
    tau = np.asarray(tau, dtype=float)
    if cfg["split"]:
        tr, ca = _split_rows(len(tau), cfg["split_fraction"], seed)
    else:
        tr = ca = np.arange(len(tau))
    nuis = cfg["nuisance"]
    if method == "trust":
        t = cfg["tree"]
        tree = fit_tree(theta[tr], tau[tr], TreeParams(t["min_samples_split"], t["ccp_alpha"], t["max_depth"]),
                        bounds=model.box)
        log.info("TRUST tree: %d leaves", tree.n_leaves)
        cal = TrustCalibrator(tree, theta[ca], tau[ca])
        return FittedMethod("trust", tree, cal, model, nuis["max_per_dim"], nuis["depth_limit"])
    if method not in ("trustpp", "trustpp-tuned"):
        raise ValueError(f"{method!r} is not a calibrator method")
    f = cfg["forest"]
    M = f["M"] if isinstance(f["M"], int) else None
    params = ForestParams(n_trees=f["n_trees"], M=M, min_samples_split=f["min_samples_split"], max_depth=f["max_depth"])
    forest = fit_forest(theta[tr], tau[tr], params, seed=derive_seed(seed, "forest"), bounds=model.box,
                        n_jobs=max(1, int(cfg["jobs"])))
    if cfg["split"]:
        forest = Forest(forest.trees, theta[ca], tau[ca], params)
    log.info("TRUST++ forest: %d trees, mean %.1f leaves", forest.n_trees,
             float(np.mean([t.n_leaves for t in forest.trees])))
    fitted = FittedMethod("trustpp", forest, forest.calibrator(params.default_M, f["empty"]), model,
                          nuis["max_per_dim"], nuis["depth_limit"])
    if method == "trustpp-tuned" or f["M"] == "tune":
        fitted = tune_fitted(cfg, fitted, statistic, seed)
    return fitted


def tune_fitted(cfg, fitted: FittedMethod, statistic, seed) -> FittedMethod:
    """Tune ``M`` and return a copy of ``fitted`` using the chosen value."""
    forest, model = fitted.partitioner, fitted.model
    tc, empty = cfg["tune"], cfg["forest"]["empty"]
    cutoff_fn = None
    if model.has_nuisance:
        grid = fitted.nuisance_grid()

        def cutoff_fn(M, points):
            return nuisance_cutoff(forest.calibrator(M, empty), points[:, list(model.interest)], grid,
                                   cfg["alpha"], model.interest, model.dim).cutoff
    elif empty == "relax":
        def cutoff_fn(M, points):
            return forest.calibrator(M, empty).cutoffs(points, cfg["alpha"]).cutoff
    res = tune_m(forest, model, statistic, cfg["alpha"], tc["B_tune"], tc["n_sim"], tc["M_grid"],
                 seed=derive_seed(seed, "tune"), n=cfg["n"], cutoff_fn=cutoff_fn)
    log.info("tuned M=%d", res.M)
    return FittedMethod("trustpp-tuned", forest, forest.calibrator(res.M, empty), model,
                        fitted.nuisance_max_per_dim, fitted.depth_limit, dict(res.mae))


# ---------------------------------------------------------------------------
# cutoffs for any method at interest values


def method_cutoffs(cfg, method: str, model, statistic, mu, seed, records=None, oracle=None,
                   points=None) -> CalibratedCutoffs:
    """Cutoffs of ``method`` at interest values ``mu``.

    ``records`` is the ``(theta, tau)`` calibration set for the calibrator
    methods; ``oracle`` may hold precomputed oracle cutoffs. When the full
    evaluation rows ``points`` are given, the Monte Carlo baseline uses the
    node nearest to each full row (nuisance coordinates included), as in
    the usual benchmark protocol; otherwise it minimises over nuisance
    nodes.
    """
    alpha, n = cfg["alpha"], cfg["n"]
    mu = _as_points(mu)
    if method == "boosting":
        raise NotImplementedError(NOT_IMPLEMENTED)
    if method in ("trust", "trustpp", "trustpp-tuned"):
        theta, tau = records
        fitted = fit_method(cfg, method, model, statistic, theta, tau, seed)
        out = fitted.cutoffs(mu, alpha)
        if fitted.M is not None:
            out.meta["M"] = fitted.M
        return out
    if method == "mc":
        grid = fit_mc(model, statistic, alpha, cfg["B"], n, cfg["mc"]["n_mc"], seed)
        if points is not None:
            out = grid.cutoffs_at(points, alpha, full=True)
            out.grid = mu
            return out
        return grid.cutoffs_at(mu, alpha)
    if method == "asymptotic":
        c = asymptotic_cutoff(statistic.kind, alpha, n, df=len(model.interest))
        return CalibratedCutoffs(mu, np.full(len(mu), c), np.zeros(len(mu), dtype=np.int64), "asymptotic", alpha)
    if method == "oracle":
        if oracle is not None:
            return oracle
        o = cfg["oracle"]
        return oracle_cutoffs(model, statistic, mu, alpha, n, o["n_oracle"], derive_seed(cfg["seed"], "oracle"),
                              o["nu_per_dim"], o["invariant_dims"])
    raise ValueError(f"unknown method {method!r}")


def _oracle_path(cfg, out_dir):
    keys = ("model", "statistic", "alpha", "n", "oracle", "grid", "seed")
    return Path(out_dir) / f"oracle-{config_hash(cfg, keys)}.csv"


def cached_oracle(cfg, model, statistic, mu, out_dir=None) -> CalibratedCutoffs:
    """Oracle cutoffs at ``mu``, stored in (and reused from) ``out_dir``."""
    path = _oracle_path(cfg, out_dir) if out_dir is not None else None
    alpha = cfg["alpha"]
    if path is not None and path.exists():
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        k = mu.shape[1]
        if data.shape[0] == len(mu) and np.array_equal(data[:, :k], mu):
            nu = data[:, k + 1:] if data.shape[1] > k + 1 else None
            return CalibratedCutoffs(mu, data[:, k], np.full(len(mu), cfg["oracle"]["n_oracle"]), "oracle", alpha,
                                     nuisance_argmin=nu)
    res = method_cutoffs(cfg, "oracle", model, statistic, mu, None)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = {f"mu{j}": mu[:, j] for j in range(mu.shape[1])}
        cols["cutoff"] = res.cutoff
        if res.nuisance_argmin is not None:
            cols.update({f"nu{j}": res.nuisance_argmin[:, j] for j in range(res.nuisance_argmin.shape[1])})
        write_report_csv(path, cols)
    return res


# ---------------------------------------------------------------------------
# experiments


def run_replicate(cfg, r: int, out_dir=None, oracle=None) -> list:
    """All configured methods on replicate ``r``; one result per method.

    Each method's cutoffs are scored on the same simulated statistics at
    the evaluation points. A method that fails is recorded with an error
    tag instead of aborting the replicate.
    """
    model, statistic = build_model(cfg), build_statistic(cfg)
    alpha, n, B = cfg["alpha"], cfg["n"], cfg["B"]
    seed_r = derive_seed(cfg["seed"], "replicate", r)
    pts = evaluation_points(model, cfg["grid"]["eval_per_dim"], cfg["grid"]["nu_per_mu"],
                            seed=derive_seed(cfg["seed"], "eval-grid"))
    mu = pts[:, list(model.interest)]
    taus = simulate_tau(model, statistic, pts, n, cfg["evaluation"]["n_sim"], derive_seed(seed_r, "eval"))
    records = None
    if any(m in ("trust", "trustpp", "trustpp-tuned") for m in cfg["methods"]):
        theta, _, tau = simulate_calibration(model, statistic, B, n, derive_seed(seed_r, "calibration"))
        records = (theta, tau)
    oracle_cover = None
    if "oracle" in cfg["methods"]:
        if oracle is None:
            oracle = cached_oracle(cfg, model, statistic, mu, out_dir)
        oracle_cover = coverage_from_tau(taus, oracle.cutoff, pts, "oracle")
    results = []
    for method in cfg["methods"]:
        res = ExperimentResult(method, model.name, statistic.kind, n, B, r)
        t0 = time.perf_counter()
        try:
            cut = method_cutoffs(cfg, method, model, statistic, mu, derive_seed(seed_r, method), records, oracle, pts)
            table = coverage_from_tau(taus, cut.cutoff, pts, method)
            res.mae = mae(table, alpha)
            if oracle_cover is not None:
                res.d_alpha = oracle_deviation(table, oracle_cover)
            res.extra = {
                "m_min": int(np.min(cut.m)) if len(cut.m) else 0,
                "n_neg_inf": int(np.sum(np.isneginf(cut.cutoff))),
                "M": cut.meta.get("M", ""),
            }
        except NotImplementedError as exc:
            res.error = str(exc) or NOT_IMPLEMENTED
        except Exception as exc:  # a failing method must not sink the replicate
            res.error = f"{type(exc).__name__}: {exc}"
            log.warning("replicate %d, method %s failed: %s", r, method, res.error)
        res.wall_time = time.perf_counter() - t0
        results.append(res)
    return results


def run_experiment(cfg, out_dir=None, replicates=None) -> list:
    """Run all replicates; write per-replicate results and the summary.

    Returns the list of :class:`ExperimentResult`. Replicates run in
    parallel when ``cfg["jobs"] > 1``; the results do not depend on it.
    """
    reps = int(replicates if replicates is not None else cfg["replicates"])
    model, statistic = build_model(cfg), build_statistic(cfg)
    oracle = None
    if "oracle" in cfg["methods"]:
        pts = evaluation_points(model, cfg["grid"]["eval_per_dim"], cfg["grid"]["nu_per_mu"],
                                seed=derive_seed(cfg["seed"], "eval-grid"))
        oracle = cached_oracle(cfg, model, statistic, pts[:, list(model.interest)], out_dir)
    jobs = int(cfg["jobs"])
    if jobs == 1 or reps == 1:
        nested = [run_replicate(cfg, r, out_dir, oracle) for r in range(reps)]
    else:
        from joblib import Parallel, delayed

        inner = dict(cfg, jobs=1)
        nested = Parallel(n_jobs=jobs)(delayed(run_replicate)(inner, r, out_dir, oracle) for r in range(reps))
    results = [row for rows in nested for row in rows]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        h = config_hash(dict(cfg, replicates=reps))
        write_results(out / f"results-{h}.csv", results)
        (out / f"summary-{h}.txt").write_text(format_summary(results))
    return results


_RESULT_FIELDS = ("method", "model", "statistic", "n", "B", "replicate", "mae", "d_alpha", "wall_time", "error")


def write_results(path, results) -> None:
    extra_keys = sorted({k for r in results for k in r.extra})
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(_RESULT_FIELDS) + [f"extra_{k}" for k in extra_keys])
        for r in results:
            row = [getattr(r, f) for f in _RESULT_FIELDS]
            row = [repr(v) if isinstance(v, float) else v for v in row]
            w.writerow(row + [r.extra.get(k, "") for k in extra_keys])


def read_results(path) -> list:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            extra = {k[6:]: v for k, v in row.items() if k.startswith("extra_")}
            out.append(ExperimentResult(
                row["method"], row["model"], row["statistic"], int(row["n"]), int(row["B"]), int(row["replicate"]),
                float(row["mae"]), float(row["d_alpha"]), float(row["wall_time"]), row["error"], extra,
            ))
    return out


def format_summary(results) -> str:
    """Plain-text table of mean and SE per method; ``*`` marks the methods
    tied for best (overlapping mean +/- 2 SE with the lowest mean)."""
    lines = []
    for metric in ("mae", "d_alpha"):
        rows = replicate_summary(results, metric)
        if not rows:
            continue
        lines.append(f"{metric}")
        lines.append(f"{'model':<10} {'statistic':<9} {'n':>4} {'B':>7} {'method':<14} {'mean':>9} {'se':>9} {'reps':>5} best")
        for row in rows:
            se = "nan" if math.isnan(row["se"]) else f"{row['se']:.5f}"
            lines.append(f"{row['model']:<10} {row['statistic']:<9} {row['n']:>4} {row['B']:>7} {row['method']:<14} "
                         f"{row['mean']:>9.5f} {se:>9} {row['reps']:>5} {'*' if row['best'] else ''}")
        lines.append("")
    failed = {}
    for r in results:
        if r.error:
            failed.setdefault((r.method, r.error), 0)
            failed[(r.method, r.error)] += 1
    for (method, err), count in sorted(failed.items()):
        lines.append(f"{method}: {count} replicate(s) without result ({err})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# pipeline stages


def _out(cfg, out_dir):
    out = Path(out_dir if out_dir is not None else cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulate(cfg, out_dir=None) -> Path:
    """Write the calibration records to ``simulated-<hash>.csv``."""
    keys = ("model", "statistic", "n", "B", "seed")
    path = _out(cfg, out_dir) / f"simulated-{config_hash(cfg, keys)}.csv"
    if path.exists():
        return path
    model, statistic = build_model(cfg), build_statistic(cfg)
    theta, x, tau = simulate_calibration(model, statistic, cfg["B"], cfg["n"], derive_seed(cfg["seed"], "simulate"))
    write_simulated_set(path, theta, x, tau, model.param_names)
    return path


def run_fit(cfg, simulated_path, method: str = "trustpp", out_dir=None) -> Path:
    """Fit a calibrator on a simulated set and write ``bundle-<method>-<hash>.bin``."""
    model, statistic = build_model(cfg), build_statistic(cfg)
    theta, x, tau = read_simulated_set(simulated_path, model.param_names)
    if x.shape[1] != cfg["n"]:
        raise ValueError(f"{simulated_path}: records have n={x.shape[1]}, config has n={cfg['n']}")
    keys = ("model", "statistic", "n", "B", "seed", "split", "split_fraction", "tree", "forest", "tune", "nuisance", "alpha")
    h = config_hash(dict(cfg, source=Path(simulated_path).name), keys + ("source",))
    path = _out(cfg, out_dir) / f"bundle-{method}-{h}.bin"
    fitted = fit_method(cfg, method, model, statistic, theta, tau, derive_seed(cfg["seed"], "fit"))
    _write_fitted(path, cfg, fitted, statistic, len(tau))
    return path


def _write_fitted(path, cfg, fitted: FittedMethod, statistic, B):
    part = fitted.partitioner
    trees = part.trees if isinstance(part, Forest) else [part]
    meta = {
        "version": BUNDLE_VERSION,
        "method": fitted.method,
        "model": fitted.model.name,
        "model_overrides": cfg["model"].get("overrides") or {},
        "statistic": statistic.kind,
        "n": cfg["n"],
        "B": int(B),
        "seed": cfg["seed"],
        "n_trees": len(trees),
        "M": fitted.M,
        "min_samples_split": cfg["forest"]["min_samples_split"] if isinstance(part, Forest) else cfg["tree"]["min_samples_split"],
        "empty": cfg["forest"]["empty"],
        "tune_mae": {str(k): v for k, v in fitted.tune_table.items()},
        "leaf_counts": [int(t.n_leaves) for t in trees],
    }
    arrays = calibrator_to_bundle(part, fitted.calibrator.theta, fitted.calibrator.tau)
    write_bundle(path, meta, arrays)


def load_fitted(cfg, bundle_path) -> FittedMethod:
    meta, arrays = read_bundle(bundle_path)
    model = build_model(cfg)
    if meta["model"] != model.name or meta["statistic"] != cfg["statistic"]["name"]:
        raise ValueError(f"{bundle_path}: bundle was fitted for {meta['model']}/{meta['statistic']}, "
                         f"config selects {model.name}/{cfg['statistic']['name']}")
    part, theta, tau = bundle_to_partitioner(meta, arrays)
    nuis = cfg["nuisance"]
    if meta["method"] == "trust":
        cal = TrustCalibrator(part, theta, tau)
    else:
        cal = part.calibrator(int(meta["M"]), meta.get("empty", "error"))
    tune = {int(k): v for k, v in meta.get("tune_mae", {}).items()}
    return FittedMethod(meta["method"], part, cal, model, nuis["max_per_dim"], nuis["depth_limit"], tune)


def confset_grid(model, points: int) -> np.ndarray:
    """Product grid over the interest coordinates with about ``points``
    points in total."""
    k = len(model.interest)
    per = max(2, int(round(points ** (1.0 / k))))
    box = model.box
    axes = [np.linspace(box[j, 0], box[j, 1], per) for j in model.interest]
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(k, -1).T


def run_confset(cfg, bundle_path, x_obs_path, out_dir=None) -> dict:
    """Confidence set with three-way labels for an observed dataset.

    Writes ``confset-<hash>.csv`` (one row per grid point) and, for a
    single parameter of interest, ``intervals-<hash>.json``. Returns the
    written paths.
    """
    fitted = load_fitted(cfg, bundle_path)
    model, statistic = fitted.model, build_statistic(cfg)
    x = read_observed(x_obs_path)
    if x.shape[1] != model.obs_dim:
        raise ValueError(f"{x_obs_path}: observations have {x.shape[1]} columns, model expects {model.obs_dim}")
    grid = confset_grid(model, cfg["grid"]["confset_per_dim"])
    cut = fitted.cutoffs(grid, cfg["alpha"], cfg["beta"])
    rep = confidence_set(cut, model, statistic, x)
    labels = three_way_labels(rep.tau, cut.lower, cut.upper)
    names = [model.param_names[j] for j in model.interest]
    cols = {name: grid[:, i] for i, name in enumerate(names)}
    cols.update(tau=rep.tau, cutoff=rep.cutoff, m=rep.m, member=rep.member, lower=cut.lower, upper=cut.upper,
                label=labels)
    if cut.nuisance_argmin is not None:
        for i, j in enumerate(model.nuisance):
            cols[f"argmin_{model.param_names[j]}"] = cut.nuisance_argmin[:, i]
    src = {"bundle": Path(bundle_path).name, "x": hashlib.sha256(Path(x_obs_path).read_bytes()).hexdigest()}
    h = config_hash(dict(cfg, source=src), ("alpha", "beta", "grid", "statistic", "nuisance", "source"))
    out = _out(cfg, out_dir)
    paths = {"confset": out / f"confset-{h}.csv"}
    write_report_csv(paths["confset"], cols)
    if len(names) == 1:
        paths["intervals"] = out / f"intervals-{h}.json"
        intervals = intervals_1d(grid, rep.member)
        paths["intervals"].write_text(json.dumps({"alpha": cfg["alpha"], "intervals": intervals}, indent=2) + "\n")
    return paths


def run_pvalue(cfg, bundle_path, x_obs_path, theta0) -> float:
    """Calibrated p-value of the interest value ``theta0``."""
    fitted = load_fitted(cfg, bundle_path)
    model, statistic = fitted.model, build_statistic(cfg)
    x = read_observed(x_obs_path)
    mu = np.asarray(theta0, dtype=float).reshape(1, -1)
    if mu.shape[1] != len(model.interest):
        raise ValueError(f"theta0 needs {len(model.interest)} value(s)")
    tau = statistic.evaluate(model, x[None], mu)
    return float(fitted.p_values(mu, tau)[0])


def run_tune(cfg, bundle_path, out_dir=None):
    """Tune ``M`` for a TRUST++ bundle; writes a new bundle and returns
    ``(path, fitted)``."""
    fitted = load_fitted(cfg, bundle_path)
    if not isinstance(fitted.partitioner, Forest):
        raise ValueError("M tuning needs a TRUST++ bundle")
    statistic = build_statistic(cfg)
    tuned = tune_fitted(cfg, fitted, statistic, derive_seed(cfg["seed"], "fit"))
    path = _out(cfg, out_dir) / (Path(bundle_path).stem + f"-tuned-M{tuned.M}.bin")
    _write_fitted(path, cfg, tuned, statistic, fitted.partitioner.n_records)
    return path, tuned
