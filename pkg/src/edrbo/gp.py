"""Exact Gaussian-process regression with SE, RQ and Matern-5/2 kernels.

Points are plain float arrays: a single joint point ``xi = [x, c]`` has shape
``(d,)`` and a batch has shape ``(n, d)``. All kernels are anisotropic over the
joint input, with one lengthscale per dimension.
"""

from __future__ import annotations

import enum
from functools import cached_property
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist

LOG_2PI = float(np.log(2.0 * np.pi))

LENGTHSCALE_BOUNDS = (0.05, 2.0)
RQ_ALPHA_BOUNDS = (0.5, 10.0)
MAX_RELATIVE_JITTER = 1e-2


class NumericalError(RuntimeError):
    """Raised when a factorisation or evaluation cannot be made finite."""


class KernelFamily(str, enum.Enum):
    SE = "se"
    RQ = "rq"
    MATERN52 = "matern52"


DEFAULT_FAMILIES = (KernelFamily.SE, KernelFamily.RQ, KernelFamily.MATERN52)


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily
    lengthscale: np.ndarray
    output_scale: float = 1.0
    rq_alpha: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", KernelFamily(self.family))
        ls = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError(f"lengthscale must be a positive vector, got {ls}")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscale", ls)
        if not self.output_scale > 0:
            raise ValueError("output_scale must be positive")
        if not self.rq_alpha > 0:
            raise ValueError("rq_alpha must be positive")

    @property
    def dim(self) -> int:
        return self.lengthscale.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Training inputs ``points`` (n, d), outputs ``outputs`` (n,), noise variance."""

    points: np.ndarray
    outputs: np.ndarray
    noise_var: float = 0.0

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 0)
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if pts.shape[0] != y.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        pts.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.outputs.shape[0]

    @classmethod
    def empty(cls, dim: int, noise_var: float = 0.0) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0), noise_var)

    def append(self, point, output: float) -> "Dataset":
        point = np.asarray(point, dtype=float).reshape(1, -1)
        pts = point if len(self) == 0 else np.vstack([self.points, point])
        return Dataset(pts, np.append(self.outputs, output), self.noise_var)


@dataclass(frozen=True)
class GPPosterior:
    """A fitted GP. ``weights`` and ``chol`` live in standardised output units.

    Queries return de-standardised values: ``mean = y_shift + y_scale * m`` and
    ``std = y_scale * s``.
    """

    spec: KernelSpec
    data: Dataset
    chol: np.ndarray
    weights: np.ndarray
    noise_var: float  # standardised units, what the factorisation actually used
    jitter: float = 0.0
    y_shift: float = 0.0
    y_scale: float = 1.0
    z: np.ndarray = field(default=None, repr=False)  # standardised targets

    @property
    def n(self) -> int:
        return len(self.data)

    @cached_property
    def chol_inv(self) -> np.ndarray:
        """Explicit inverse of the lower Cholesky factor, built on first use."""
        return solve_triangular(self.chol, np.eye(self.n), lower=True, check_finite=False)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def check_points(q, dim: int) -> np.ndarray:
    """Return ``q`` as an (m, dim) float array, validating shape and finiteness."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        q = q.reshape(1, -1)
    if q.ndim != 2 or q.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("points contain non-finite coordinates")
    return q


def _profile(family: KernelFamily, r2: np.ndarray, alpha: float) -> np.ndarray:
    """Unit-scale stationary kernel as a function of scaled squared distance."""
    if family is KernelFamily.SE:
        return np.exp(-0.5 * r2)
    if family is KernelFamily.RQ:
        return (1.0 + r2 / (2.0 * alpha)) ** (-alpha)
    if family is KernelFamily.MATERN52:
        r = np.sqrt(5.0 * r2)
        return (1.0 + r + r * r / 3.0) * np.exp(-r)
    raise ValueError(f"unknown kernel family {family!r}")


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    a = check_points(a, spec.dim)
    b = check_points(b, spec.dim)
    r2 = cdist(a / spec.lengthscale, b / spec.lengthscale, "sqeuclidean")
    return spec.output_scale * _profile(spec.family, r2, spec.rq_alpha)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape or a.shape[0] != spec.dim:
        raise ValueError(f"dimension mismatch: {a.shape}, {b.shape}, kernel dim {spec.dim}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite coordinate")
    r2 = float(np.sum(((a - b) / spec.lengthscale) ** 2))
    return float(spec.output_scale * _profile(spec.family, np.asarray(r2), spec.rq_alpha))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _standardise(y: np.ndarray) -> tuple[float, float]:
    if y.size == 0:
        return 0.0, 1.0
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12 * max(1.0, abs(shift)):
        scale = 1.0
    return shift, scale


def _factorise(K: np.ndarray, noise_var: float, jitter: float | None) -> tuple[np.ndarray, float]:
    """Cholesky of ``K + (noise_var + jitter) I`` with escalating jitter."""
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    base = float(np.trace(K)) / n
    start = 1e-8 * base if jitter is None else jitter
    ladder = [0.0] if (jitter is None and noise_var > 0) else []
    j = start
    while j <= MAX_RELATIVE_JITTER * base * (1 + 1e-12):
        ladder.append(j)
        j *= 10.0
    if not ladder:
        ladder = [start]
    diag = np.arange(n)
    for j in ladder:
        A = K.copy()
        A[diag, diag] += noise_var + j
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, j
    raise NumericalError(f"Cholesky failed after jitter escalation to {ladder[-1]:.3g}")


def fit_gp(
    spec: KernelSpec,
    data: Dataset,
    *,
    standardize: bool = False,
    jitter: float | None = None,
    gram: np.ndarray | None = None,
) -> GPPosterior:
    """Condition a zero-mean GP prior on ``data``.

    With ``standardize`` the outputs are z-scored first and the noise variance
    is rescaled to match; queries are mapped back to the raw output scale.
    ``gram`` may pass a precomputed ``k(X, X)`` for the same spec.
    """
    n = len(data)
    if n and data.points.shape[1] != spec.dim:
        raise ValueError(f"data dimension {data.points.shape[1]} != kernel dim {spec.dim}")
    shift, scale = _standardise(data.outputs) if standardize else (0.0, 1.0)
    z = (data.outputs - shift) / scale
    noise = data.noise_var / scale**2
    K = kernel_matrix(spec, data.points, data.points) if gram is None else gram
    if n == 0:
        K = np.zeros((0, 0))
    L, used = _factorise(K, noise, jitter)
    w = cho_solve((L, True), z, check_finite=False) if n else np.zeros(0)
    return GPPosterior(spec, data, L, w, noise, used, shift, scale, z)


def predict(gp: GPPosterior, q, fast: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at a batch of points ``q`` (m, d).

    ``fast`` multiplies by the cached inverse factor instead of running a
    triangular solve; the two agree to round-off and the matrix product is
    several times quicker for the large batches the acquisition scores.
    """
    q = check_points(q, gp.spec.dim)
    s = gp.spec.output_scale
    if gp.n == 0:
        m = q.shape[0]
        return np.full(m, gp.y_shift), np.full(m, gp.y_scale * np.sqrt(s))
    Kq = kernel_matrix(gp.spec, q, gp.data.points)
    mean = Kq @ gp.weights
    if fast:
        v = gp.chol_inv @ Kq.T
    else:
        v = solve_triangular(gp.chol, Kq.T, lower=True, check_finite=False)
    var = s - np.einsum("ij,ij->j", v, v)
    np.maximum(var, 0.0, out=var)
    return gp.y_shift + gp.y_scale * mean, gp.y_scale * np.sqrt(var)


def posterior_mean(gp: GPPosterior, q) -> float:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ValueError("posterior_mean takes a single point; use predict for batches")
    return float(predict(gp, q)[0][0])


def posterior_std(gp: GPPosterior, q) -> float:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ValueError("posterior_std takes a single point; use predict for batches")
    return float(predict(gp, q)[1][0])


def log_marginal_likelihood(gp: GPPosterior) -> float:
    """Log evidence of the (standardised) training targets under the fitted GP."""
    if gp.n == 0:
        raise ValueError("log marginal likelihood needs at least one observation")
    return float(
        -0.5 * gp.z @ gp.weights - np.sum(np.log(np.diag(gp.chol))) - 0.5 * gp.n * LOG_2PI
    )


def information_gain(gp: GPPosterior) -> float:
    """``0.5 * log det(I + K / noise)`` for the training Gram matrix.

    Reuses the stored factor of ``K + noise I``; the effective noise includes
    any jitter the factorisation needed, which also serves as the floor when
    the nominal noise is zero.
    """
    if gp.n == 0:
        return 0.0
    noise = gp.noise_var + gp.jitter
    if not noise > 0:
        raise NumericalError("information gain undefined for zero noise and zero jitter")
    logdet = 2.0 * np.sum(np.log(np.diag(gp.chol)))
    return float(0.5 * (logdet - gp.n * np.log(noise)))


# ---------------------------------------------------------------------------
# Hyperparameters
# ---------------------------------------------------------------------------


def _log_uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def _search(family, data, budget, seed, standardize, noise_bounds):
    family = KernelFamily(family)
    if len(data) < 2:
        raise ValueError("hyperparameter fitting needs at least 2 observations")
    if budget < 1:
        raise ValueError("search_budget must be >= 1")
    rng = np.random.default_rng(seed)
    _, scale = _standardise(data.outputs) if standardize else (0.0, 1.0)
    X = data.points
    d = X.shape[1]
    # per-dimension squared differences, reused across candidates
    sqdiff = (X[:, None, :] - X[None, :, :]) ** 2
    best = None
    for _ in range(budget):
        ls = _log_uniform(rng, *LENGTHSCALE_BOUNDS, size=d)
        alpha = float(_log_uniform(rng, *RQ_ALPHA_BOUNDS)) if family is KernelFamily.RQ else 1.0
        noise = float(_log_uniform(rng, *noise_bounds)) if noise_bounds else None
        spec = KernelSpec(family, ls, 1.0, alpha)
        r2 = sqdiff @ (1.0 / ls**2)
        gram = _profile(family, r2, alpha)
        cand = data if noise is None else replace(data, noise_var=noise * scale**2)
        try:
            gp = fit_gp(spec, cand, standardize=standardize, gram=gram)
        except NumericalError:
            continue
        lml = log_marginal_likelihood(gp)
        if best is None or lml > best[0]:
            best = (lml, spec, noise)
    if best is None:
        raise NumericalError("every hyperparameter candidate failed to factorise")
    return best


def fit_hyperparams(
    family,
    data: Dataset,
    search_budget: int = 32,
    seed=None,
    *,
    standardize: bool = True,
) -> KernelSpec:
    """Log-uniform random search for the kernel with the highest evidence.

    Lengthscales are drawn in ``LENGTHSCALE_BOUNDS`` per dimension and the RQ
    shape in ``RQ_ALPHA_BOUNDS``; the output scale stays at 1 because the
    targets are standardised. Candidates that cannot be factorised are skipped.
    """
    return _search(family, data, search_budget, seed, standardize, None)[1]


def fit_hyperparams_with_noise(
    family,
    data: Dataset,
    search_budget: int = 32,
    seed=None,
    *,
    noise_bounds: tuple[float, float] = (1e-4, 1.0),
) -> tuple[KernelSpec, float]:
    """Like :func:`fit_hyperparams` but also searches the noise variance.

    The noise is in standardised output units. Returns the kernel and the noise
    variance converted back to raw output units for ``data``.
    """
    _, spec, noise = _search(family, data, search_budget, seed, True, noise_bounds)
    _, scale = _standardise(data.outputs)
    return spec, noise * scale**2
