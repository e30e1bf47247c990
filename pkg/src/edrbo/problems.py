"""Contextual benchmark objectives on the unit box and their context distributions.

Every objective is vectorised: ``objective(X, C)`` takes designs (N, d_x) and
contexts (N, d_c) and returns (N,). ``sense`` is +1 for maximisation and -1 for
minimisation; the optimiser always maximises ``sense * f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .acquisition import DesignBox, pattern_search

MAXIMISE = 1
MINIMISE = -1


# ---------------------------------------------------------------------------
# Context distributions (all clipped to [0, 1])
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClippedNormal:
    mean: float
    std: float
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.clip(rng.normal(self.mean, self.std, size=(n, self.dim)), 0.0, 1.0)


@dataclass(frozen=True)
class Uniform01:
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random((n, self.dim))


@dataclass(frozen=True)
class BurrXII:
    alpha: float
    beta: float
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.dim))
        c = ((1.0 - u) ** (-1.0 / self.beta) - 1.0) ** (1.0 / self.alpha)
        return np.clip(c, 0.0, 1.0)


@dataclass(frozen=True)
class ClippedCauchy:
    loc: float
    scale: float
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.dim))
        return np.clip(self.loc + self.scale * np.tan(np.pi * (u - 0.5)), 0.0, 1.0)


@dataclass(frozen=True)
class Mixture:
    components: tuple
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("one weight per mixture component required")
        if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in self.components}) != 1:
            raise ValueError("mixture components must share a dimension")

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        which = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty((n, self.dim))
        for k, comp in enumerate(self.components):
            sel = which == k
            if sel.any():
                out[sel] = comp.sample(rng, int(sel.sum()))
        return out


ContextSampler = ClippedNormal | Uniform01 | BurrXII | ClippedCauchy | Mixture


def sample_context(sampler, rng: np.random.Generator) -> np.ndarray:
    """One context draw, shape (d_c,)."""
    return sampler.sample(rng, 1)[0]


def burr_pdf(c, alpha: float, beta: float):
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("Burr XII density is supported on c >= 0")
    out = alpha * beta * c ** (alpha - 1.0) / (1.0 + c**alpha) ** (beta + 1.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------


def three_hump_camel(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    x, c = X[:, 0], C[:, 0]
    return 2 * x**2 - 1.05 * x**4 + x**6 / 6 + x * c + c**2


def six_hump_camel(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], C[:, 0]
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def ackley(X: np.ndarray, C: np.ndarray, a: float = 20.0, b: float = 0.2) -> np.ndarray:
    z = 65.536 * np.hstack([X, C]) - 32.768
    d = z.shape[1]
    t1 = -a * np.exp(-b * np.sqrt(np.sum(z * z, axis=1) / d))
    t2 = -np.exp(np.sum(np.cos(2 * np.pi * z), axis=1) / d)
    return t1 + t2 + a + np.e


HARTMANN_ALPHA = np.array([1.0, 2.0, 3.0, 3.2])
HARTMANN_A = np.array(
    [
        [10, 3, 17, 3.50, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
HARTMANN_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


# the textbook Hartmann-6 weights; the benchmark uses HARTMANN_ALPHA
STANDARD_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])


def hartmann6(X: np.ndarray, C: np.ndarray, alpha: np.ndarray = HARTMANN_ALPHA) -> np.ndarray:
    z = np.hstack([X, C])
    inner = np.einsum("ij,nij->ni", HARTMANN_A, (z[:, None, :] - HARTMANN_P[None]) ** 2)
    return np.exp(-inner) @ alpha


def _branin_h(u, v):
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5 / np.pi
    r, s, t = 6.0, 10.0, 1 / (8 * np.pi)
    return a * (v - b * u**2 + c * u - r) ** 2 + s * (1 - t) * np.cos(u) + s


def modified_branin(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    h1 = _branin_h(15 * X[:, 0] - 5, 15 * C[:, 0])
    h2 = _branin_h(15 * C[:, 1] - 5, 15 * X[:, 1])
    return -np.sqrt(h1 * h2)


def newsvendor(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    x, c = X[:, 0], C[:, 0]
    return 9 * np.minimum(x, c) + np.maximum(0.0, x - c) - 5 * x


@dataclass(frozen=True)
class Problem:
    name: str
    d_x: int
    d_c: int
    objective: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sense: int
    context: object
    # default oracle resolution: grid points per axis (d_x <= 2) and MC contexts
    oracle_grid: int = 201
    oracle_mc: int = 4096

    @property
    def box(self) -> DesignBox:
        return DesignBox.unit(self.d_x)

    def values(self, X, C) -> np.ndarray:
        """Raw objective on batched inputs, without any validation."""
        return self.objective(np.asarray(X, dtype=float), np.asarray(C, dtype=float))

    def signed(self, X, C) -> np.ndarray:
        return self.sense * self.values(X, C)


_CAMEL_CONTEXT = ClippedNormal(0.5, 0.2)

_COMPLICATED_CONTEXT = Mixture(
    components=(
        ClippedNormal(0.1, 0.02),
        ClippedNormal(0.3, 0.075),
        ClippedNormal(0.4, 0.1),
        ClippedNormal(0.5, 0.1),
        ClippedNormal(0.7, 0.075),
        ClippedNormal(0.8, 0.03),
        ClippedCauchy(0.2, 0.02),
        ClippedCauchy(0.8, 0.02),
    ),
    weights=(1 / 8,) * 8,
)

PROBLEMS: dict[str, Problem] = {
    p.name: p
    for p in [
        Problem("three_hump", 1, 1, three_hump_camel, MINIMISE, _CAMEL_CONTEXT, 2001, 10000),
        Problem("six_hump", 1, 1, six_hump_camel, MINIMISE, ClippedNormal(0.6, 0.2), 2001, 10000),
        Problem("ackley", 2, 1, ackley, MINIMISE, ClippedNormal(0.5, 0.2)),
        Problem("hartmann", 5, 1, hartmann6, MAXIMISE, ClippedNormal(0.5, 0.2)),
        Problem("hartmann_complicated", 5, 1, hartmann6, MAXIMISE, _COMPLICATED_CONTEXT),
        Problem("modified_branin", 2, 2, modified_branin, MINIMISE, ClippedNormal(0.5, 0.2, dim=2)),
        Problem("newsvendor", 1, 1, newsvendor, MAXIMISE, BurrXII(2.0, 20.0), 2001, 100000),
    ]
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; valid: {', '.join(PROBLEMS)}") from None


def evaluate(p: Problem, x, c) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    if x.shape != (p.d_x,) or c.shape != (p.d_c,):
        raise ValueError(f"{p.name} takes x of length {p.d_x} and c of length {p.d_c}")
    if not p.box.contains(x):
        raise ValueError(f"design {x.tolist()} outside the unit box")
    if np.any(c < 0) or np.any(c > 1) or not np.all(np.isfinite(c)):
        raise ValueError(f"context {c.tolist()} outside [0, 1]^{p.d_c}")
    return float(p.values(x[None], c[None])[0])


# ---------------------------------------------------------------------------
# Brute-force oracle for the expected objective under the true context law
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def oracle_contexts(name: str, mc_samples: int, seed: int) -> np.ndarray:
    """The fixed context sample set shared by the oracle and every regret estimate."""
    rng = np.random.default_rng(seed)
    c = get_problem(name).context.sample(rng, mc_samples)
    c.setflags(write=False)
    return c


def expected_value(p: Problem, X, contexts: np.ndarray, chunk: int = 1 << 22) -> np.ndarray:
    """Monte-Carlo estimate of ``E_c[sense * f(x, c)]`` for each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = contexts.shape[0]
    out = np.empty(X.shape[0])
    per = max(1, chunk // m)
    for s in range(0, X.shape[0], per):
        Xs = X[s : s + per]
        v = p.signed(np.repeat(Xs, m, axis=0), np.tile(contexts, (Xs.shape[0], 1)))
        out[s : s + per] = v.reshape(Xs.shape[0], m).mean(axis=1)
    return out


def design_candidates(p: Problem, grid_res: int, rng: np.random.Generator) -> np.ndarray:
    if p.d_x <= 2:
        axis = np.linspace(0.0, 1.0, grid_res)
        mesh = np.meshgrid(*([axis] * p.d_x), indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)
    return rng.random((10_000, p.d_x))


def oracle_optimum(
    p: Problem, grid_res: int | None = None, mc_samples: int | None = None, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Best design for the sense-adjusted expected objective.

    Candidates are a full grid for d_x <= 2 and 10^4 uniform designs otherwise;
    each is scored against one fixed set of ``mc_samples`` context draws, and
    the five best are polished by compass search on the same draws.
    """
    grid_res = p.oracle_grid if grid_res is None else grid_res
    mc_samples = p.oracle_mc if mc_samples is None else mc_samples
    if grid_res < 2 or mc_samples < 1:
        raise ValueError("need grid_res >= 2 and mc_samples >= 1")
    contexts = oracle_contexts(p.name, mc_samples, seed)
    rng = np.random.default_rng([seed, 1])
    cand = design_candidates(p, grid_res, rng)
    vals = expected_value(p, cand, contexts)
    step = 1.0 / (grid_res - 1) if p.d_x <= 2 else 0.05
    x, v = pattern_search(
        lambda X: expected_value(p, X, contexts), p.box, cand, vals,
        init_step=step, min_step=1e-8, max_polls=2000,
    )
    return x, v
