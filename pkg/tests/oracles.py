"""Independent reference computations used by the tests.

Nothing here calls into the package's linear algebra: kernels are re-derived
from their closed forms and posteriors come from dense ``np.linalg.solve``.
"""

import numpy as np

from edrbo.gp import Dataset, KernelFamily, KernelSpec


def ref_kernel(family, ls, scale, alpha, A, B):
    D = (A[:, None, :] - B[None, :, :]) / np.asarray(ls)
    r2 = np.sum(D * D, axis=-1)
    family = KernelFamily(family)
    if family is KernelFamily.SE:
        k = np.exp(-0.5 * r2)
    elif family is KernelFamily.RQ:
        k = (1.0 + r2 / (2.0 * alpha)) ** (-alpha)
    else:
        r = np.sqrt(5.0 * r2)
        k = (1.0 + r + 5.0 * r2 / 3.0) * np.exp(-r)
    return scale * k


def dense_gp(spec: KernelSpec, data: Dataset, q, standardize=False):
    y = data.outputs
    if standardize and y.size and np.std(y) > 0:
        shift, scale = float(np.mean(y)), float(np.std(y))
    else:
        shift, scale = 0.0, 1.0
    z = (y - shift) / scale
    noise = data.noise_var / scale**2
    X = data.points
    n = len(y)
    args = (spec.family, spec.lengthscale, spec.output_scale, spec.rq_alpha)
    A = ref_kernel(*args, X, X) + noise * np.eye(n)
    kq = ref_kernel(*args, q, X)
    mean = kq @ np.linalg.solve(A, z)
    var = spec.output_scale - np.sum(kq * np.linalg.solve(A, kq.T).T, axis=1)
    _, logdet = np.linalg.slogdet(A)
    lml = -0.5 * z @ np.linalg.solve(A, z) - 0.5 * logdet - 0.5 * n * np.log(2 * np.pi)
    K = A - noise * np.eye(n)
    _, gain = np.linalg.slogdet(np.eye(n) + K / noise)
    return {
        "mean": shift + scale * mean,
        "std": scale * np.sqrt(np.maximum(var, 0.0)),
        "lml": lml,
        "gain": 0.5 * gain,
    }


def random_dataset(rng, family=None, n=None, d=None, m=20):
    """A random kernel, dataset (n <= 50, d <= 6) and query batch."""
    fams = list(KernelFamily)
    family = KernelFamily(family) if family is not None else fams[int(rng.integers(len(fams)))]
    d = int(rng.integers(1, 7)) if d is None else d
    n = int(rng.integers(1, 51)) if n is None else n
    spec = KernelSpec(
        family,
        rng.uniform(0.1, 1.5, d),
        float(rng.uniform(0.5, 2.0)),
        float(rng.uniform(0.5, 10.0)),
    )
    X = rng.random((n, d))
    y = rng.normal(size=n) * rng.uniform(0.1, 5) + rng.uniform(-3, 3)
    data = Dataset(X, y, float(10 ** rng.uniform(-3, -1)))
    q = np.vstack([rng.random((m, d)), X[: min(n, 5)]])
    return spec, data, q


def w2_gauss(ma, sa, mb, sb):
    return np.sqrt((ma - mb) ** 2 + (sa - sb) ** 2)


def barycentre_cost(a, b, means, stds):
    """Aggregate squared Gaussian W2 from each expert to N(a, b^2)."""
    return sum(w2_gauss(m, s, a, b) ** 2 for m, s in zip(means, stds))
