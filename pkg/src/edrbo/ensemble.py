"""Ensemble of GP experts: consensus moments, W2 barycentre and posterior radius."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import (
    DEFAULT_FAMILIES,
    Dataset,
    GPPosterior,
    KernelFamily,
    KernelSpec,
    fit_gp,
    fit_hyperparams,
    information_gain,
    predict,
)


@dataclass(frozen=True)
class EnsembleConfig:
    """Expert families and the constants entering the confidence width.

    ``specs`` pins the kernel hyperparameters (one per family) and skips the
    random search; it exists for synthetic checks where the true kernel is known.
    """

    families: tuple[KernelFamily, ...] = DEFAULT_FAMILIES
    rkhs_bounds: tuple[float, ...] | None = None
    delta: float = 0.1
    search_budget: int = 32
    standardize: bool = True
    specs: tuple[KernelSpec, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        fams = tuple(KernelFamily(f) for f in self.families)
        object.__setattr__(self, "families", fams)
        if len(fams) < 1:
            raise ValueError("ensemble needs at least one expert")
        bounds = (1.0,) * len(fams) if self.rkhs_bounds is None else tuple(map(float, self.rkhs_bounds))
        if len(bounds) != len(fams) or any(b <= 0 for b in bounds):
            raise ValueError("rkhs_bounds must be positive, one per expert")
        object.__setattr__(self, "rkhs_bounds", bounds)
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.specs is not None:
            specs = tuple(self.specs)
            if len(specs) != len(fams):
                raise ValueError("specs must match families one-to-one")
            object.__setattr__(self, "specs", specs)

    @property
    def size(self) -> int:
        return len(self.families)


@dataclass(frozen=True)
class EnsemblePosterior:
    experts: tuple[GPPosterior, ...]
    config: EnsembleConfig

    @property
    def dim(self) -> int:
        return self.experts[0].spec.dim

    def moments(self, q, fast: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Per-expert means and stds at ``q``, each of shape (M, m)."""
        out = [predict(gp, q, fast) for gp in self.experts]
        return np.stack([o[0] for o in out]), np.stack([o[1] for o in out])


def fit_ensemble(config: EnsembleConfig, data: Dataset, seed=None) -> EnsemblePosterior:
    """Fit every expert from scratch on the shared dataset.

    Each expert draws its hyperparameter candidates from its own child of
    ``seed``, so the result does not depend on the order experts are fitted in.
    """
    children = _children(seed, config.size)
    dim = data.points.shape[1] if len(data) else None
    experts = []
    for m, family in enumerate(config.families):
        if config.specs is not None:
            spec = config.specs[m]
        elif len(data) >= 2:
            spec = fit_hyperparams(
                family, data, config.search_budget, children[m], standardize=config.standardize
            )
        else:
            if dim is None:
                raise ValueError("cannot infer input dimension from an empty dataset; pass specs")
            spec = KernelSpec(family, np.ones(dim))
        experts.append(fit_gp(spec, data, standardize=config.standardize))
    return EnsemblePosterior(tuple(experts), config)


def ensemble_mean(e: EnsemblePosterior, q) -> float | np.ndarray:
    mu, _ = e.moments(q)
    return _squeeze(mu.mean(axis=0), q)


def ensemble_std(e: EnsemblePosterior, q) -> float | np.ndarray:
    _, sd = e.moments(q)
    return _squeeze(sd.mean(axis=0), q)


def barycentre(e: EnsemblePosterior, q):
    """W2 barycentre of the experts' 1-D Gaussian predictives at ``q``.

    For 1-D Gaussians the barycentre is Gaussian with the averaged mean and the
    averaged standard deviation.
    """
    mu, sd = e.moments(q)
    return _squeeze(mu.mean(axis=0), q), _squeeze(sd.mean(axis=0), q)


def radius_from_moments(mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Largest Bures-Wasserstein distance from an expert to the barycentre.

    ``mu`` and ``sd`` are (M, ...) arrays of expert moments.
    """
    # deviations are taken relative to the first expert before averaging, so
    # experts that agree exactly give a radius of exactly zero
    du, ds = mu - mu[:1], sd - sd[:1]
    dmu = du - du.mean(axis=0)
    dsd = ds - ds.mean(axis=0)
    return np.sqrt(np.max(dmu * dmu + dsd * dsd, axis=0))


def posterior_radius(e: EnsemblePosterior, q) -> float | np.ndarray:
    mu, sd = e.moments(q)
    return _squeeze(radius_from_moments(mu, sd), q)


def gaussian_w2(mean_a, std_a, mean_b, std_b):
    """Closed-form 2-Wasserstein distance between 1-D Gaussians."""
    return np.sqrt((np.subtract(mean_a, mean_b)) ** 2 + (np.subtract(std_a, std_b)) ** 2)


def information_gains(e: EnsemblePosterior) -> np.ndarray:
    return np.array([information_gain(gp) for gp in e.experts])


def confidence_beta(e: EnsemblePosterior) -> float:
    """Maximum over experts of ``B_m + sigma * sqrt(2 (gamma_m + 1 + ln(M / delta)))``.

    ``sigma`` is the raw observation noise standard deviation.
    """
    cfg = e.config
    sigma = float(np.sqrt(e.experts[0].data.noise_var))
    log_term = np.log(cfg.size / cfg.delta)
    betas = [
        b + sigma * np.sqrt(2.0 * (g + 1.0 + log_term))
        for b, g in zip(cfg.rkhs_bounds, information_gains(e))
    ]
    return float(max(betas))


def _children(seed, n: int) -> list[np.random.SeedSequence]:
    # stateless alternative to SeedSequence.spawn, so repeated calls agree
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (m,)) for m in range(n)
    ]


def _squeeze(values: np.ndarray, q):
    return float(values[0]) if np.ndim(q) == 1 else values
