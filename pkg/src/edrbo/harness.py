"""Sequential EDRBO / ERBO / UCB loop, regret accounting and run diagnostics."""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path

import numpy as np

from .acquisition import (
    ContextBank,
    context_averaged_terms,
    optimize_acquisition,
    stratified_bank,
    ucb_value,
)
from .ensemble import EnsembleConfig, confidence_beta, fit_ensemble, information_gains
from .gp import (
    Dataset,
    KernelFamily,
    NumericalError,
    fit_gp,
    fit_hyperparams_with_noise,
    information_gain,
)
from .problems import Problem, expected_value, get_problem, oracle_contexts, oracle_optimum

log = logging.getLogger(__name__)

METHODS = ("edrbo", "erbo", "ucb")

# stream ids for the per-run SeedSequence; fixed so adding a stream never shifts the others
STREAMS = {"init": 0, "context": 1, "noise": 2, "acquisition": 3, "hyper": 4}

ORACLE_VERSION = 1
W2_REFERENCE_SAMPLES = 100_000
W2_QUANTILES = 512


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, STREAMS[name], *extra]))


def child_seed(seed: int, name: str, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, STREAMS[name], t])


@dataclass(frozen=True)
class RunConfig:
    problem: str
    method: str = "edrbo"
    iters: int = 200
    n_init: int = 5
    seeds: tuple[int, ...] = tuple(range(10))
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    acq_budget: int = 128
    refine_contexts: int = 32
    max_polls: int = 100
    robustness: float = 2.0
    ucb_beta: float = 2.0
    noise_rel: float = 0.01
    noise_std: float | None = None
    oracle_grid: int | None = None
    oracle_mc: int | None = None
    oracle_seed: int = 0
    out_dir: str = "results"
    timing: bool = True

    def __post_init__(self) -> None:
        get_problem(self.problem)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; valid: {', '.join(METHODS)}")
        if not self.iters > self.n_init >= 1:
            raise ValueError("need iters > n_init >= 1")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def problem_obj(self) -> Problem:
        return get_problem(self.problem)


# ---------------------------------------------------------------------------
# Oracle and regret
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Oracle:
    problem: str
    grid_res: int
    mc_samples: int
    seed: int
    x_star: np.ndarray
    value: float

    @property
    def contexts(self) -> np.ndarray:
        return oracle_contexts(self.problem, self.mc_samples, self.seed)

    def regret(self, x) -> float:
        """Oracle value minus the common-random-numbers value of ``x``."""
        p = get_problem(self.problem)
        return float(self.value - expected_value(p, np.atleast_2d(x), self.contexts)[0])


def settings_hash(problem: str, grid_res: int, mc_samples: int, seed: int) -> str:
    key = f"{problem}|{grid_res}|{mc_samples}|{seed}|v{ORACLE_VERSION}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


ORACLE_FIELDS = ["problem", "settings_hash", "grid_res", "mc_samples", "seed", "value", "x_star"]


def get_oracle(
    problem: str,
    grid_res: int | None = None,
    mc_samples: int | None = None,
    seed: int = 0,
    cache: str | Path | None = None,
) -> Oracle:
    """Return the oracle for these settings, computing and caching it if needed.

    The cache is a CSV sidecar with one row per (problem, settings hash).
    """
    p = get_problem(problem)
    grid_res = p.oracle_grid if grid_res is None else grid_res
    mc_samples = p.oracle_mc if mc_samples is None else mc_samples
    h = settings_hash(problem, grid_res, mc_samples, seed)
    rows = []
    if cache is not None and Path(cache).exists():
        with open(cache, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            if row["problem"] == problem and row["settings_hash"] == h:
                x = np.array([float(v) for v in row["x_star"].split(";")])
                return Oracle(problem, grid_res, mc_samples, seed, x, float(row["value"]))
    log.info("computing oracle for %s (grid %d, mc %d)", problem, grid_res, mc_samples)
    x, v = oracle_optimum(p, grid_res, mc_samples, seed)
    oracle = Oracle(problem, grid_res, mc_samples, seed, x, v)
    if cache is not None:
        Path(cache).parent.mkdir(parents=True, exist_ok=True)
        rows.append(
            {
                "problem": problem,
                "settings_hash": h,
                "grid_res": grid_res,
                "mc_samples": mc_samples,
                "seed": seed,
                "value": repr(v),
                "x_star": ";".join(repr(float(xi)) for xi in x),
            }
        )
        with open(cache, "w", newline="") as fh:
            w = csv.DictWriter(fh, ORACLE_FIELDS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return oracle


def instantaneous_regret(p: Problem, oracle_value: float, x_t, mc_samples: int, seed: int) -> float:
    contexts = oracle_contexts(p.name, mc_samples, seed)
    return float(oracle_value - expected_value(p, np.atleast_2d(x_t), contexts)[0])


def empirical_w2_1d(a, b) -> float:
    """2-Wasserstein distance between two 1-D samples via their quantile functions.

    Both empirical quantile functions are evaluated at the midpoints of a
    common grid of ``W2_QUANTILES`` probability cells.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("empirical_w2_1d needs nonempty samples")
    u = (np.arange(W2_QUANTILES) + 0.5) / W2_QUANTILES
    qa = np.quantile(a, u, method="inverted_cdf")
    qb = np.quantile(b, u, method="inverted_cdf")
    return float(np.sqrt(np.mean((qa - qb) ** 2)))


def w2_reference(problem: str, seed: int = 0) -> np.ndarray:
    """A large fixed sample from the true context law for the W2 diagnostic."""
    p = get_problem(problem)
    rng = np.random.default_rng([seed, 99])
    return np.sort(p.context.sample(rng, W2_REFERENCE_SAMPLES)[:, 0])


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    problem: str
    method: str
    seed: int
    x: np.ndarray  # (T, d_x)
    c: np.ndarray  # (T, d_c)
    y: np.ndarray  # observed sense-adjusted outputs
    r: np.ndarray
    acq_value: np.ndarray
    mean_radius: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    wall_ms: np.ndarray
    noise_std: float
    oracle_value: float
    failure: str | None = None

    @property
    def T(self) -> int:
        return self.r.shape[0]

    @property
    def R(self) -> np.ndarray:
        return np.array(list(accumulate(self.r.tolist())))

    @property
    def final_regret(self) -> float:
        return float(self.R[-1])

    def w2_trace(self, reference: np.ndarray | None = None) -> np.ndarray:
        """W2 between the first-t observed contexts and the true law, for each t."""
        if self.c.shape[1] != 1:
            raise ValueError("the W2 diagnostic is only defined for 1-D contexts")
        ref = w2_reference(self.problem) if reference is None else reference
        return np.array([empirical_w2_1d(self.c[: t + 1, 0], ref) for t in range(self.T)])


def observation_noise_std(cfg: RunConfig, f_init: np.ndarray) -> float:
    if cfg.noise_std is not None:
        return float(cfg.noise_std)
    sd = float(np.std(f_init))
    return cfg.noise_rel * (sd if sd > 0 else 1.0)


def _select_ensemble(cfg, problem, data, bank, seed, t):
    e = fit_ensemble(cfg.ensemble, data, seed=child_seed(seed, "hyper", t))
    kappa = cfg.robustness if cfg.method == "edrbo" else 0.0

    def on(b):
        def value(X):
            mu, rad = context_averaged_terms(e, X, b)
            return mu - kappa * rad

        return value

    sub = stratified_bank(bank, cfg.refine_contexts)
    x, v = optimize_acquisition(
        on(bank), problem.box, cfg.acq_budget, child_seed(seed, "acquisition", t),
        max_polls=cfg.max_polls, refine_fn=None if sub is bank else on(sub),
    )
    _, rad = context_averaged_terms(e, x, bank)
    return x, v, float(rad[0]), float(information_gains(e).max()), confidence_beta(e)


def _select_ucb(cfg, problem, X, y, noise_var, seed, t):
    data = Dataset(X, y, noise_var)
    spec, fitted_noise = fit_hyperparams_with_noise(
        KernelFamily.SE, data, cfg.ensemble.search_budget, child_seed(seed, "hyper", t)
    )
    gp = fit_gp(spec, Dataset(X, y, fitted_noise), standardize=True)
    x, v = optimize_acquisition(
        lambda Z: ucb_value(gp, Z, cfg.ucb_beta), problem.box, cfg.acq_budget,
        child_seed(seed, "acquisition", t), max_polls=cfg.max_polls,
    )
    gamma = information_gain(gp)
    beta = cfg.ensemble.rkhs_bounds[0] + np.sqrt(fitted_noise) * np.sqrt(
        2.0 * (gamma + 1.0 + np.log(1.0 / cfg.ensemble.delta))
    )
    return x, v, np.nan, gamma, float(beta)


def run(cfg: RunConfig, seed: int, oracle: Oracle | None = None) -> RunResult:
    """One seeded run: ``n_init`` uniform designs, then ``iters - n_init`` acquisitions.

    Contexts and noise are drawn from streams that do not depend on the method,
    so runs with the same seed see the same context sequence.
    """
    p = cfg.problem_obj
    T, n0 = cfg.iters, cfg.n_init
    if oracle is None:
        oracle = get_oracle(cfg.problem, cfg.oracle_grid, cfg.oracle_mc, cfg.oracle_seed)

    C = p.context.sample(stream(seed, "context"), T)
    eps = stream(seed, "noise").standard_normal(T)
    X = np.empty((T, p.d_x))
    X[:n0] = p.box.sample(stream(seed, "init"), n0)
    f = np.empty(T)
    f[:n0] = p.signed(X[:n0], C[:n0])
    sigma = observation_noise_std(cfg, f[:n0])
    y = f + sigma * eps  # entries past t are filled as the loop proceeds

    nan = np.full(T, np.nan)
    acq, rad, gam, bet = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    wall = np.zeros(T)
    failure = None
    last = T
    for t in range(n0, T):
        tic = time.perf_counter()
        try:
            if cfg.method == "ucb":
                out = _select_ucb(cfg, p, X[:t], y[:t], sigma**2, seed, t)
            else:
                data = Dataset(np.hstack([X[:t], C[:t]]), y[:t], sigma**2)
                out = _select_ensemble(cfg, p, data, ContextBank(C[:t]), seed, t)
        except NumericalError as exc:
            failure = f"t={t + 1}: {exc}"
            log.warning("%s/%s seed %d aborted at %s", cfg.problem, cfg.method, seed, failure)
            last = t
            break
        X[t], acq[t], rad[t], gam[t], bet[t] = out
        f[t] = p.signed(X[t : t + 1], C[t : t + 1])[0]
        y[t] = f[t] + sigma * eps[t]
        if cfg.timing:
            wall[t] = 1e3 * (time.perf_counter() - tic)

    X, C, y = X[:last], C[:last], y[:last]
    r = oracle.value - expected_value(p, X, oracle.contexts)
    return RunResult(
        cfg.problem, cfg.method, seed, X, C, y, r,
        acq[:last], rad[:last], gam[:last], bet[:last], wall[:last],
        sigma, oracle.value, failure,
    )


def run_all(cfg: RunConfig, oracle_cache: str | Path | None = None) -> list[RunResult]:
    oracle = get_oracle(cfg.problem, cfg.oracle_grid, cfg.oracle_mc, cfg.oracle_seed, oracle_cache)
    results = []
    for s in cfg.seeds:
        res = run(cfg, s, oracle)
        log.info("%s/%s seed %d: R_T = %.4f", cfg.problem, cfg.method, s, res.final_regret)
        results.append(res)
    return results
