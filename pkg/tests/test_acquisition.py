import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edrbo.acquisition import (
    ContextBank,
    DesignBox,
    context_averaged_terms,
    edrbo_value,
    erbo_value,
    optimize_acquisition,
    pattern_search,
    stratified_bank,
    ucb_value,
)
from edrbo.ensemble import (
    EnsembleConfig,
    EnsemblePosterior,
    ensemble_mean,
    fit_ensemble,
    posterior_radius,
)
from edrbo.gp import Dataset, KernelSpec, NumericalError, fit_gp, posterior_mean, posterior_std


def toy_ensemble(seed=0, n=12, d_x=1, d_c=1, shift=0.0):
    rng = np.random.default_rng(seed)
    Z = rng.random((n, d_x + d_c))
    y = np.sin(5 * Z[:, 0]) * np.cos(3 * Z[:, -1]) + shift
    return fit_ensemble(EnsembleConfig(search_budget=8), Dataset(Z, y, 1e-3), seed=seed), rng


def test_design_box_validation_and_helpers():
    with pytest.raises(ValueError):
        DesignBox([0.0, 1.0], [1.0, 1.0])
    box = DesignBox.unit(3)
    assert box.dim == 3
    assert box.contains([0.0, 0.5, 1.0]) and not box.contains([0.0, 1.1, 0.5])
    s = box.sample(np.random.default_rng(0), 100)
    assert s.shape == (100, 3) and np.all((s >= 0) & (s <= 1))


def test_bank_reshapes_flat_samples():
    assert ContextBank(np.array([0.1, 0.2])).samples.shape == (2, 1)


def test_empty_bank_rejected():
    e, _ = toy_ensemble()
    with pytest.raises(ValueError):
        edrbo_value(e, np.array([0.3]), ContextBank(np.zeros((0, 1))))


def test_matches_loop_recomputation():
    e, rng = toy_ensemble(d_x=2, d_c=1)
    bank = ContextBank(rng.random((9, 1)))
    X = rng.random((6, 2))
    got = edrbo_value(e, X, bank)
    for x, v in zip(X, got):
        terms = [
            ensemble_mean(e, np.r_[x, c]) - 2.0 * posterior_radius(e, np.r_[x, c])
            for c in bank.samples
        ]
        assert v == pytest.approx(np.mean(terms), abs=1e-12)


def test_single_sample_bank():
    e, _ = toy_ensemble()
    x, c = np.array([0.4]), np.array([0.7])
    q = np.r_[x, c]
    bank = ContextBank(c.reshape(1, 1))
    assert edrbo_value(e, x, bank) == pytest.approx(
        ensemble_mean(e, q) - 2 * posterior_radius(e, q), abs=1e-12
    )
    assert erbo_value(e, x, bank) == pytest.approx(ensemble_mean(e, q), abs=1e-12)


def test_identical_experts_remove_the_penalty():
    e, rng = toy_ensemble()
    same = EnsemblePosterior((e.experts[0],) * 3, e.config)
    bank = ContextBank(rng.random((5, 1)))
    X = rng.random((10, 1))
    np.testing.assert_array_equal(edrbo_value(same, X, bank), erbo_value(same, X, bank))


def test_chunking_does_not_change_values(monkeypatch):
    import edrbo.acquisition as acq

    e, rng = toy_ensemble()
    bank = ContextBank(rng.random((40, 1)))
    X = rng.random((25, 1))
    full = edrbo_value(e, X, bank)
    monkeypatch.setattr(acq, "_CHUNK", 50)
    np.testing.assert_allclose(edrbo_value(e, X, bank), full, atol=1e-14)


def test_wrong_design_dimension_rejected():
    e, _ = toy_ensemble()
    with pytest.raises(ValueError):
        edrbo_value(e, np.zeros((3, 2)), ContextBank(np.zeros((2, 1))))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_penalty_ordering(seed):
    e, rng = toy_ensemble(seed)
    bank = ContextBank(rng.random((int(rng.integers(1, 15)), 1)))
    X = rng.random((30, 1))
    assert np.all(edrbo_value(e, X, bank) <= erbo_value(e, X, bank))


def test_shift_equivariant_argmax():
    # standardisation makes the fitted surrogate shift-equivariant
    grid = np.linspace(0, 1, 20).reshape(-1, 1)
    a, rng = toy_ensemble(seed=3)
    b, _ = toy_ensemble(seed=3, shift=17.0)
    bank = ContextBank(rng.random((8, 1)))
    va, vb = edrbo_value(a, grid, bank), edrbo_value(b, grid, bank)
    np.testing.assert_allclose(vb - va, 17.0, atol=1e-9)
    assert np.argmax(va) == np.argmax(vb)


def test_ucb_cases():
    rng = np.random.default_rng(0)
    X = rng.random((10, 2))
    gp = fit_gp(KernelSpec("se", [0.3, 0.3]), Dataset(X, X.sum(1), 1e-2), standardize=True)
    Q = rng.random((5, 2))
    for q, v in zip(Q, ucb_value(gp, Q, 0.0)):
        assert v == pytest.approx(posterior_mean(gp, q), abs=1e-15)
    for q, v in zip(Q, ucb_value(gp, Q, 2.0)):
        assert v == pytest.approx(posterior_mean(gp, q) + 2 * posterior_std(gp, q), abs=1e-14)
    empty = fit_gp(KernelSpec("se", [1.0, 1.0]), Dataset.empty(2, 0.01))
    assert ucb_value(empty, np.array([0.2, 0.9]), 2.0) == 2.0


# -- stratified subsample --------------------------------------------------------


def test_stratified_bank():
    bank = ContextBank(np.arange(100.0)[::-1].reshape(-1, 1) / 100)
    sub = stratified_bank(bank, 10)
    assert len(sub) == 10
    np.testing.assert_allclose(np.sort(sub.samples[:, 0]), (np.arange(10) * 10 + 5) / 100)
    assert stratified_bank(bank, 200) is bank
    assert stratified_bank(bank, 0) is bank


# -- optimiser --------------------------------------------------------------------


def bowl(X):
    return -np.sum((np.atleast_2d(X) - 0.3) ** 2, axis=1)


def test_optimizer_finds_bowl_centre():
    x, v = optimize_acquisition(bowl, DesignBox.unit(2), 256, seed=0)
    assert np.max(np.abs(x - 0.3)) < 0.02
    assert v == pytest.approx(bowl(x)[0])


def test_budget_one_refinement_never_worsens():
    rng = np.random.default_rng(5)
    start = DesignBox.unit(2).sample(rng, 1)
    x, v = optimize_acquisition(bowl, DesignBox.unit(2), 1, seed=5)
    assert v >= bowl(start)[0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 64))
def test_result_beats_every_raw_start(seed, budget):
    box = DesignBox.unit(3)
    f = lambda X: np.sin(7 * np.atleast_2d(X)).sum(1)  # noqa: E731
    starts = box.sample(np.random.default_rng(seed), budget)
    x, v = optimize_acquisition(f, box, budget, seed=seed)
    assert box.contains(x)
    assert v >= f(starts).max()


def test_refine_surrogate_result_beats_starts_and_is_rescored():
    box = DesignBox.unit(2)
    calls = []

    def f(X):
        calls.append(len(X))
        return bowl(X)

    x, v = optimize_acquisition(f, box, 32, seed=1, refine_fn=lambda X: bowl(X) + 0.01 * X[:, 0])
    starts = box.sample(np.random.default_rng(1), 32)
    assert v >= bowl(starts).max()
    assert v == bowl(x)[0]
    # the expensive function is only called for the starts and the endpoints
    assert calls == [32, 5]


def test_optimizer_is_deterministic():
    f = lambda X: np.cos(9 * np.atleast_2d(X)).prod(1)  # noqa: E731
    a = optimize_acquisition(f, DesignBox.unit(2), 32, seed=np.random.SeedSequence([3, 4]))
    b = optimize_acquisition(f, DesignBox.unit(2), 32, seed=np.random.SeedSequence([3, 4]))
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


def test_nonfinite_acquisition_raises():
    with pytest.raises(NumericalError, match="non-finite"):
        optimize_acquisition(lambda X: np.full(len(X), np.nan), DesignBox.unit(1), 4, seed=0)


def test_invalid_budget():
    with pytest.raises(ValueError):
        optimize_acquisition(bowl, DesignBox.unit(1), 0)


def test_pattern_search_respects_box():
    box = DesignBox([0.0], [1.0])
    f = lambda X: X[:, 0]  # noqa: E731
    x, v = pattern_search(f, box, np.array([[0.5]]), np.array([0.5]))
    assert x[0] == 1.0 and v == 1.0


def test_bank_terms_shape():
    e, rng = toy_ensemble(d_x=1, d_c=2)
    mu, rad = context_averaged_terms(e, rng.random((4, 1)), ContextBank(rng.random((3, 2))))
    assert mu.shape == rad.shape == (4,)
    assert np.all(rad >= 0)
