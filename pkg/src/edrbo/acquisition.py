"""Acquisition functions over the empirical context distribution and their maximiser.

Value functions are batched: they take designs of shape (N, d_x) and return
(N,). A single design of shape (d_x,) returns a float.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensemble import EnsemblePosterior, radius_from_moments
from .gp import GPPosterior, NumericalError, predict

# joint query points per expert per chunk
_CHUNK = 32768


@dataclass(frozen=True)
class DesignBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or not np.all(lo < hi):
            raise ValueError("DesignBox needs lower < upper elementwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "DesignBox":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dim)) * self.width


@dataclass(frozen=True)
class ContextBank:
    """The observed contexts, i.e. the support of the empirical nominal distribution."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]


def _designs(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = x.reshape(1, -1) if single else x
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"designs must have dimension {dim}, got shape {x.shape}")
    return x, single


def context_averaged_terms(
    e: EnsemblePosterior, x, bank: ContextBank
) -> tuple[np.ndarray, np.ndarray]:
    """Bank averages of the consensus mean and of the posterior radius at each design."""
    if len(bank) == 0:
        raise ValueError("context bank is empty")
    C = bank.samples
    B, dc = C.shape
    X, single = _designs(x, e.dim - dc)
    N = X.shape[0]
    mean_mu = np.empty(N)
    mean_rad = np.empty(N)
    per = max(1, _CHUNK // B)
    for start in range(0, N, per):
        Xs = X[start : start + per]
        joint = np.hstack([np.repeat(Xs, B, axis=0), np.tile(C, (Xs.shape[0], 1))])
        mu, sd = e.moments(joint, fast=True)
        rad = radius_from_moments(mu, sd).reshape(-1, B)
        mean_mu[start : start + per] = mu.mean(axis=0).reshape(-1, B).mean(axis=1)
        mean_rad[start : start + per] = rad.mean(axis=1)
    if single:
        return mean_mu[:1], mean_rad[:1]
    return mean_mu, mean_rad


def edrbo_value(e: EnsemblePosterior, x, bank: ContextBank, robustness: float = 2.0):
    """Empirical average over the bank of ``mean - robustness * radius``."""
    mu, rad = context_averaged_terms(e, x, bank)
    v = mu - robustness * rad
    return float(v[0]) if np.ndim(x) == 1 else v


def erbo_value(e: EnsemblePosterior, x, bank: ContextBank):
    """Empirical average over the bank of the consensus mean (zero radius)."""
    mu, _ = context_averaged_terms(e, x, bank)
    return float(mu[0]) if np.ndim(x) == 1 else mu


def stratified_bank(bank: ContextBank, size: int) -> ContextBank:
    """Up to ``size`` bank contexts at evenly spaced ranks of the first coordinate."""
    B = len(bank)
    if size <= 0 or B <= size:
        return bank
    order = np.argsort(bank.samples[:, 0], kind="stable")
    ranks = np.floor((np.arange(size) + 0.5) * B / size).astype(int)
    return ContextBank(bank.samples[order[ranks]])


def ucb_value(gp_x: GPPosterior, x, beta: float = 2.0):
    """Upper confidence bound of a GP fitted on designs only."""
    X, single = _designs(x, gp_x.spec.dim)
    mu, sd = predict(gp_x, X)
    v = mu + beta * sd
    return float(v[0]) if single else v


def optimize_acquisition(
    value_fn: Callable[[np.ndarray], np.ndarray],
    box: DesignBox,
    budget: int = 128,
    seed=None,
    *,
    n_refine: int = 5,
    init_step: float = 0.1,
    min_step: float = 1e-4,
    max_polls: int = 500,
    refine_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, float]:
    """Multi-start compass search maximising a batched ``value_fn`` over ``box``.

    ``budget`` uniform starts are scored, the best ``n_refine`` are refined by
    coordinate-wise pattern search (steps relative to the box width), and the
    best point is returned with its ``value_fn`` value. Ties go to the lowest
    candidate index.

    ``refine_fn`` is an optional cheaper surrogate of ``value_fn`` used only
    while polling; refined endpoints are re-scored with ``value_fn`` and
    compete with the raw starts, so the result never loses to a start.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)

    def score(X: np.ndarray) -> np.ndarray:
        v = np.asarray(value_fn(X), dtype=float).reshape(-1)
        bad = ~np.isfinite(v)
        if bad.any():
            raise NumericalError(f"acquisition is non-finite at x={X[np.argmax(bad)].tolist()}")
        return v

    starts = box.sample(rng, budget)
    start_vals = score(starts)
    if refine_fn is None:
        return pattern_search(
            score, box, starts, start_vals,
            n_refine=n_refine, init_step=init_step, min_step=min_step, max_polls=max_polls,
        )

    def proxy(X: np.ndarray) -> np.ndarray:
        v = np.asarray(refine_fn(X), dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"acquisition is non-finite at x={X[np.argmax(~np.isfinite(v))].tolist()}")
        return v

    k = min(n_refine, budget)
    top = np.argsort(-start_vals, kind="stable")[:k]
    ends = np.empty((k, box.dim))
    for i, j in enumerate(top):
        ends[i], _ = pattern_search(
            proxy, box, starts[j : j + 1], proxy(starts[j : j + 1]),
            n_refine=1, init_step=init_step, min_step=min_step, max_polls=max_polls,
        )
    end_vals = score(ends)
    i = int(np.argmax(end_vals))
    j = int(np.argmax(start_vals))
    if start_vals[j] > end_vals[i]:
        return starts[j].copy(), float(start_vals[j])
    return ends[i], float(end_vals[i])


def pattern_search(
    score: Callable[[np.ndarray], np.ndarray],
    box: DesignBox,
    starts: np.ndarray,
    start_vals: np.ndarray,
    *,
    n_refine: int = 5,
    init_step: float = 0.1,
    min_step: float = 1e-4,
    max_polls: int = 500,
) -> tuple[np.ndarray, float]:
    """Refine the best ``n_refine`` of pre-scored ``starts`` by compass search.

    All active starts poll their 2 d neighbours in one batched ``score`` call;
    a start moves to its best strictly improving neighbour and doubles its step
    (capped at ``init_step``), or else halves it.
    """
    d = box.dim
    k = min(n_refine, starts.shape[0])
    order = np.argsort(-start_vals, kind="stable")[:k]
    cur = starts[order].copy()
    cur_val = start_vals[order].copy()
    step = np.full(k, float(init_step))
    active = step >= min_step
    dirs = np.vstack([np.eye(d), -np.eye(d)])  # (2d, d)

    for _ in range(max_polls):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nb = cur[idx, None, :] + step[idx, None, None] * dirs[None, :, :] * box.width
        nb = box.clip(nb).reshape(-1, d)
        vals = score(nb).reshape(idx.size, 2 * d)
        best = np.argmax(vals, axis=1)
        best_val = vals[np.arange(idx.size), best]
        improved = best_val > cur_val[idx]
        moved = idx[improved]
        cur[moved] = nb.reshape(idx.size, 2 * d, d)[improved, best[improved]]
        cur_val[moved] = best_val[improved]
        step[moved] = np.minimum(2.0 * step[moved], init_step)
        step[idx[~improved]] *= 0.5
        active = step >= min_step

    i = int(np.argmax(cur_val))
    return box.clip(cur[i]), float(cur_val[i])
