"""Monte-Carlo harness: simulated settings, method runs, FNR/FPR tables.

Each replication draws its own generator from
``SeedSequence(seed, spawn_key=(beta_index, rep))``, so results do not
depend on how replications are spread over worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import solver
from .conditions import CovarianceModel, block_ar1_cov, block_exchangeable_cov
from .data import standardize
from .errors import (DegenerateTruth, DimensionError, SimulationAborted, SpacError,
                     UnknownSetting)
from .penalty import lasso, scad
from .precision import PrecisionDiag, estimate_precision_diag

log = logging.getLogger(__name__)

ZERO_TOL = 1e-10
MAX_FAILURE_RATE = 0.10


class Method(str, Enum):
    LASSO = "lasso"
    SPAC_LASSO = "spac-lasso"
    ALASSO = "alasso"
    SPAC_ALASSO = "spac-alasso"
    SCAD = "scad"
    SPAC_SCAD = "spac-scad"


ALL_METHODS = tuple(Method)
# (traditional, SPAC counterpart) pairs reported as ratios
PAIRS = ((Method.LASSO, Method.SPAC_LASSO), (Method.ALASSO, Method.SPAC_ALASSO),
         (Method.SCAD, Method.SPAC_SCAD))


@dataclass(frozen=True, eq=False)
class SimTruth:
    beta: np.ndarray
    q: int
    sigma2: float
    C: CovarianceModel
    binary_columns: frozenset = frozenset()

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.shape != (self.C.p,):
            raise DimensionError(f"beta has length {beta.size}, covariance is {self.C.p}x{self.C.p}")
        if np.any(beta[:self.q] == 0) or np.any(beta[self.q:] != 0):
            raise ValueError("beta must be nonzero exactly on the first q coordinates")
        if not self.sigma2 >= 0:
            raise ValueError("noise variance must be nonnegative")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "binary_columns", frozenset(self.binary_columns))


@dataclass(frozen=True)
class SettingConfig:
    """Everything needed to regenerate one simulation table.

    ``beta_values`` entries are either a scalar (the first ``q`` coefficients
    all equal it) or a tuple whose entries fill equal-sized groups of the
    first ``q`` coefficients. ``binary_columns`` are 0-based.
    """

    setting_id: str
    n: int
    p: int
    q: int
    beta_values: tuple
    alpha: tuple
    replications: int = 100
    seed: int = 0
    methods: tuple = ALL_METHODS
    sigma2: float = 1.0
    binary_columns: frozenset = frozenset()
    cov_kind: str = "exchangeable"
    scad_a: float = 3.7
    mu: float = 1.0
    path_count: int = 100
    path_decades: float = 3.0
    tol: float = solver.DEFAULT_TOL
    max_iter: int = solver.DEFAULT_MAX_ITER

    def __post_init__(self):
        if min(self.n, self.p, self.q, self.replications) < 1 or self.q >= self.p:
            raise ValueError("need positive n, p, q, replications and q < p")
        if not self.methods:
            raise ValueError("no methods requested")
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "binary_columns", frozenset(int(c) for c in self.binary_columns))
        object.__setattr__(self, "beta_values", tuple(
            tuple(float(x) for x in b) if isinstance(b, (tuple, list)) else float(b)
            for b in self.beta_values))

    def covariance(self):
        build = {"exchangeable": block_exchangeable_cov, "ar1": block_ar1_cov}
        try:
            return build[self.cov_kind](self.q, self.p, self.alpha)
        except KeyError:
            raise ValueError(f"unknown covariance kind {self.cov_kind!r}") from None

    def truth(self, beta_value, C=None):
        return SimTruth(beta=beta_vector(self.p, self.q, beta_value), q=self.q,
                        sigma2=self.sigma2, C=C if C is not None else self.covariance(),
                        binary_columns=self.binary_columns)


def beta_vector(p, q, value):
    beta = np.zeros(p)
    if isinstance(value, (tuple, list)):
        k = len(value)
        if q % k:
            raise ValueError(f"q={q} cannot be split into {k} equal groups")
        beta[:q] = np.repeat(np.asarray(value, dtype=float), q // k)
    else:
        beta[:q] = value
    return beta


BETA_S = (0.1, 0.3, 0.5, 0.8, 1.0, 2.0)
BETA_TRIPLES = ((0.1, 0.2, 0.3), (0.4, 0.5, 0.6), (0.8, 1.0, 2.0))
PAPER_ALPHAS = ((0.2, 0.4, 0.8), (0.3, 0.5, 0.8), (0.5, 0.7, 0.9))


def builtin_setting(setting_id, alpha=(0.5, 0.7, 0.9), beta_spec=None, **overrides):
    """Configuration of one of the four published simulation settings."""
    sid = str(setting_id).upper().lstrip("S")
    if sid == "1":
        base = dict(setting_id="S1", n=80, p=150, q=10, beta_values=BETA_S)
    elif sid == "2":
        base = dict(setting_id="S2", n=100, p=200, q=10, beta_values=BETA_S)
    elif sid == "3":
        base = dict(setting_id="S3", n=100, p=200, q=9, beta_values=BETA_TRIPLES)
    elif sid == "4":
        binary = set(range(3)) | set(range(10, 60))
        base = dict(setting_id="S4", n=100, p=150, q=10, beta_values=BETA_S,
                    binary_columns=frozenset(binary))
    else:
        raise UnknownSetting(f"unknown setting {setting_id!r}")
    if beta_spec is not None:
        if isinstance(beta_spec, (int, float)) or (
                base["setting_id"] == "S3" and isinstance(beta_spec, tuple)
                and not isinstance(beta_spec[0], (tuple, list))):
            beta_spec = (beta_spec,)
        base["beta_values"] = tuple(beta_spec)
    base.update(overrides)
    return SettingConfig(alpha=tuple(alpha), **base)


def generate_design(C, n, binary_columns=(), rng=None):
    """Gaussian rows with covariance ``C``; binary columns dichotomized at 0.

    The result is standardized to the canonical form.
    """
    rng = np.random.default_rng(rng)
    M = C.realized if isinstance(C, CovarianceModel) else CovarianceModel("explicit", C, {}).realized
    L = np.linalg.cholesky(M)
    Z = rng.standard_normal((n, M.shape[0])) @ L.T
    for j in sorted(binary_columns):
        Z[:, j] = (Z[:, j] > 0).astype(float)
    return standardize(Z, np.zeros(n)).X


def generate_response(X, truth, rng=None):
    rng = np.random.default_rng(rng)
    y = X @ truth.beta
    if truth.sigma2 > 0:
        y = y + rng.normal(0.0, math.sqrt(truth.sigma2), size=X.shape[0])
    return y - y.mean()


def fnr_fpr(beta_hat, beta_true):
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_hat.shape != beta_true.shape:
        raise DimensionError("estimate and truth differ in length")
    relevant = beta_true != 0
    if relevant.all() or not relevant.any():
        raise DegenerateTruth("truth needs both zero and nonzero coefficients")
    selected = np.abs(beta_hat) >= ZERO_TOL
    fnr = np.count_nonzero(~selected & relevant) / np.count_nonzero(relevant)
    fpr = np.count_nonzero(selected & ~relevant) / np.count_nonzero(~relevant)
    return float(fnr), float(fpr)


def replication_rng(seed, beta_index, rep):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(beta_index, rep)))


def fit_methods(data, methods, d=None, scad_a=3.7, mu=1.0, **path_kw):
    """BIC-tuned coefficient estimates (beta scale) for each requested method.

    Returns ``{method: beta_hat or exception}``. Shared intermediate fits
    (plain Lasso for the ALasso weights, SPAC-Lasso for the SPAC-ALasso
    initializer) are computed once.
    """
    methods = [Method(m) for m in methods]
    out = {}
    ones = PrecisionDiag.ones(data.p)
    cache = {}

    def run(key, thunk):
        if key not in cache:
            try:
                cache[key] = thunk()
            except SpacError as exc:
                cache[key] = exc
        return cache[key]

    def spac_d():
        return d if d is not None else estimate_precision_diag(data, "auto")

    def base_lasso():
        return solver.select(data, ones, lasso(), space=solver.Space.BETA, **path_kw)

    def spac_lasso():
        return solver.select(data, dhat(), lasso(), **path_kw)

    def dhat():
        res = run("d", spac_d)
        if isinstance(res, Exception):
            raise res
        return res

    def dep(key, thunk):
        res = run(key, thunk)
        if isinstance(res, Exception):
            raise res
        return res

    def base_alasso():
        pen = solver.baseline_alasso_penalty(data, mu, initial=dep("lasso", base_lasso).beta)
        return solver.select(data, ones, pen, space=solver.Space.BETA, **path_kw)

    def spac_alasso():
        pen = solver.spac_alasso_penalty(data, dhat(), mu,
                                         lasso_fit=dep("spac-lasso", spac_lasso), **path_kw)
        return solver.select(data, dhat(), pen, **path_kw)

    def base_scad():
        return solver.select(data, ones, scad(a=scad_a), space=solver.Space.BETA, **path_kw)

    def spac_scad():
        return solver.select(data, dhat(), scad(a=scad_a), **path_kw)

    thunks = {Method.LASSO: ("lasso", base_lasso),
              Method.SPAC_LASSO: ("spac-lasso", spac_lasso),
              Method.ALASSO: ("alasso", base_alasso),
              Method.SPAC_ALASSO: ("spac-alasso", spac_alasso),
              Method.SCAD: ("scad", base_scad),
              Method.SPAC_SCAD: ("spac-scad", spac_scad)}
    for m in methods:
        res = run(*thunks[m])
        out[m] = res if isinstance(res, Exception) else res.beta
    return out


def run_replication(config, beta_index, rep):
    """One draw of (X, y) and every method on it.

    Returns a list of ``(method, fnr, fpr, error)`` tuples.
    """
    rng = replication_rng(config.seed, beta_index, rep)
    value = config.beta_values[beta_index]
    try:
        truth = config.truth(value)
        X = generate_design(truth.C, config.n, truth.binary_columns, rng)
        y = generate_response(X, truth, rng)
        data = standardize(X, y)
    except SpacError as exc:
        return [(m.value, None, None, f"{type(exc).__name__}: {exc}") for m in config.methods]
    estimates = fit_methods(data, config.methods, scad_a=config.scad_a, mu=config.mu,
                            count=config.path_count, decades=config.path_decades,
                            tol=config.tol, max_iter=config.max_iter)
    rows = []
    for m in config.methods:
        est = estimates[m]
        if isinstance(est, Exception):
            rows.append((m.value, None, None, f"{type(est).__name__}: {est}"))
        else:
            fnr, fpr = fnr_fpr(est, truth.beta)
            rows.append((m.value, fnr, fpr, None))
    return rows


def _task(args):
    config, beta_index, rep = args
    return run_replication(config, beta_index, rep)


@dataclass
class MetricsTable:
    """Aggregated FNR/FPR per (method, beta value) plus SPAC ratios.

    ``per_rep`` keeps every replication score in index order.
    """

    config: SettingConfig
    rows: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    per_rep: list = field(default_factory=list)

    def row(self, method, beta_value=None):
        method = Method(method).value
        for r in self.rows:
            if r["method"] == method and (beta_value is None or r["beta"] == beta_value):
                return r
        raise KeyError((method, beta_value))

    def ratio(self, baseline, beta_value=None):
        baseline = Method(baseline).value
        for r in self.ratios:
            if r["baseline"] == baseline and (beta_value is None or r["beta"] == beta_value):
                return r["ratio"]
        raise KeyError((baseline, beta_value))

    def to_dict(self):
        cfg = asdict(self.config)
        cfg["methods"] = [m.value for m in self.config.methods]
        cfg["binary_columns"] = sorted(self.config.binary_columns)
        return {"config": cfg, "rows": self.rows, "ratios": self.ratios}

    def to_csv(self):
        buf = io.StringIO()
        fields = ["method", "beta", "fnr_mean", "fpr_mean", "fnr_sd", "fpr_sd",
                  "replications", "failures", "ratio"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        ratio_of = {(r["spac"], _beta_key(r["beta"])): r["ratio"] for r in self.ratios}
        for r in self.rows:
            out = {k: r[k] for k in fields if k in r}
            out["beta"] = _beta_label(r["beta"])
            out["ratio"] = ratio_of.get((r["method"], _beta_key(r["beta"])), "")
            w.writerow({k: ("" if v is None else v) for k, v in out.items()})
        return buf.getvalue()

    def per_rep_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["beta", "rep", "method", "fnr", "fpr", "error"])
        for beta, rep, method, fnr, fpr, err in self.per_rep:
            w.writerow([_beta_label(beta), rep, method,
                        "" if fnr is None else fnr, "" if fpr is None else fpr, err or ""])
        return buf.getvalue()


def _beta_key(b):
    return tuple(b) if isinstance(b, (list, tuple)) else b


def _beta_label(b):
    return "|".join(repr(x) for x in b) if isinstance(b, (list, tuple)) else repr(b)


def _aggregate(config, results):
    table = MetricsTable(config=config)
    for bi, value in enumerate(config.beta_values):
        means = {}
        for m in config.methods:
            scores = [(fnr, fpr) for rep in range(config.replications)
                      for (meth, fnr, fpr, err) in results[bi][rep]
                      if meth == m.value and err is None]
            failures = config.replications - len(scores)
            if failures > MAX_FAILURE_RATE * config.replications:
                errs = [err for rep in range(config.replications)
                        for (meth, _, _, err) in results[bi][rep] if meth == m.value and err]
                raise SimulationAborted(
                    f"{m.value} failed in {failures}/{config.replications} replications "
                    f"(first error: {errs[0] if errs else 'n/a'})")
            arr = np.array(scores, dtype=float).reshape(-1, 2)
            fnr_mean, fpr_mean = (arr.mean(axis=0) if len(arr) else (np.nan, np.nan))
            sd = arr.std(axis=0, ddof=1) if len(arr) > 1 else (None, None)
            beta = list(value) if isinstance(value, tuple) else value
            table.rows.append({
                "method": m.value, "beta": beta,
                "fnr_mean": float(fnr_mean), "fpr_mean": float(fpr_mean),
                "fnr_sd": None if sd[0] is None else float(sd[0]),
                "fpr_sd": None if sd[1] is None else float(sd[1]),
                "replications": len(arr), "failures": failures,
            })
            means[m] = fnr_mean + fpr_mean
        for base, spac in PAIRS:
            if base in means and spac in means:
                den = means[spac]
                table.ratios.append({
                    "baseline": base.value, "spac": spac.value,
                    "beta": list(value) if isinstance(value, tuple) else value,
                    "ratio": float(means[base] / den) if den > 0 else None,
                })
        for rep in range(config.replications):
            for meth, fnr, fpr, err in results[bi][rep]:
                table.per_rep.append((value, rep, meth, fnr, fpr, err))
    return table


def run_setting(config, workers=1, progress=False):
    """Run every replication of ``config`` and aggregate the scores."""
    tasks = [(config, bi, rep) for bi in range(len(config.beta_values))
             for rep in range(config.replications)]
    if workers is None or workers <= 1:
        flat = []
        for i, t in enumerate(tasks):
            flat.append(_task(t))
            if progress:
                print(f"\r{i + 1}/{len(tasks)} replications", end="", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            flat = list(pool.map(_task, tasks, chunksize=1))
    if progress and (workers is None or workers <= 1):
        print(file=sys.stderr)
    results = [flat[bi * config.replications:(bi + 1) * config.replications]
               for bi in range(len(config.beta_values))]
    return _aggregate(config, results)


def load_config(path):
    """Read a custom ``SettingConfig`` from a TOML file.

    Recognised keys mirror the dataclass fields; ``binary_columns`` entries
    are 1-based like the published settings. ``setting`` (1-4) may name a
    built-in setting whose fields the remaining keys override.
    """
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    raw = dict(raw)
    if "binary_columns" in raw:
        raw["binary_columns"] = frozenset(int(c) - 1 for c in raw["binary_columns"])
    if "beta_values" in raw:
        raw["beta_values"] = tuple(tuple(b) if isinstance(b, list) else b
                                   for b in raw["beta_values"])
    if "alpha" in raw:
        raw["alpha"] = tuple(raw["alpha"])
    if "methods" in raw:
        raw["methods"] = tuple(raw["methods"])
    base = raw.pop("setting", None)
    if base is not None:
        alpha = raw.pop("alpha", (0.5, 0.7, 0.9))
        return builtin_setting(base, alpha, **raw)
    raw.setdefault("setting_id", "Custom")
    return SettingConfig(**raw)


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
