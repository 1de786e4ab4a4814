import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privselect import (
    Dataset,
    additive_noise,
    geometric_perturb,
    laplace_perturb,
    rotation_perturb,
    zscore_normalize,
)
from privselect._validation import AttackError, PrivSelectError
from privselect.attacks import (
    KnownIOAttack,
    SymmetricFastICA,
    align_components,
    ica_attack,
    known_io_attack,
    naive_estimation,
    run_attack_pool,
    sample_known_pairs,
)
from privselect.dataset import load_wholesale
from privselect.resistance import min_var_over_attributes, var_p_per_attribute


def _z(X):
    n, d = X.shape
    return zscore_normalize(Dataset(features=X, labels=np.arange(n) % 2, attr_names=[f"a{j}" for j in range(d)]))


def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


@pytest.fixture(scope="module")
def wholesale():
    return zscore_normalize(load_wholesale())


@pytest.fixture(scope="module")
def sources():
    """Three independent non-Gaussian sources, standardized."""
    g = np.random.default_rng(77)
    S = np.column_stack([
        g.uniform(-1, 1, 3000),
        g.laplace(0, 1, 3000),
        g.exponential(1, 3000),
    ])
    return _z(S)


def test_naive_vanishing_noise(blobs):
    p = additive_noise(blobs, 1e-12, seed=0)
    r = naive_estimation(p)
    assert r.reconstructed.shape == blobs.features.shape
    np.testing.assert_allclose(r.reconstructed, blobs.features, atol=1e-6)
    assert min_var_over_attributes(blobs, r) < 1e-12


def test_naive_against_noise():
    d = _z(np.random.default_rng(0).standard_normal((100_000, 3)))
    r = naive_estimation(additive_noise(d, 0.3, seed=1))
    # Monte-Carlo oracle: (x + n)/sqrt(1.09) - x has variance ~0.084
    var = var_p_per_attribute(d, r)
    assert np.all(var > 0.05)
    np.testing.assert_allclose(var, 2 - 2 / np.sqrt(1.09), atol=5e-3)


def test_known_io_undoes_rotation(wholesale):
    p = rotation_perturb(wholesale, 10, seed=3)
    idx = sample_known_pairs(wholesale.n_records, 0.10, seed=3)
    assert idx.size == 44
    r = known_io_attack(p, idx, wholesale.features[idx], ridge=0.0)
    assert _rmse(r.reconstructed, wholesale.features) < 1e-6
    assert min_var_over_attributes(wholesale, r) < 1e-10
    assert r.assumptions["n_known"] == 44


def test_known_io_undoes_translation(wholesale):
    p = geometric_perturb(wholesale, 3, 1e-12, seed=5)
    assert np.abs(p.translation).max() > 0
    # oracle: invert the stored transform directly
    oracle = (p.features - p.translation) @ p.rotation
    np.testing.assert_allclose(oracle, wholesale.features, atol=1e-9)
    idx = sample_known_pairs(wholesale.n_records, 0.10, seed=5)
    r = known_io_attack(p, idx, wholesale.features[idx])
    assert _rmse(r.reconstructed, oracle) < 1e-6


def test_known_io_against_laplace(wholesale):
    p = laplace_perturb(wholesale, 1.0, seed=0)
    idx = sample_known_pairs(wholesale.n_records, 0.10, seed=0)
    model = KnownIOAttack().fit(p.features[idx], wholesale.features[idx])
    # the noise swamps the signal, so least squares shrinks the map toward zero
    assert np.abs(model.coef_).max() < 0.5
    r = known_io_attack(p, idx, wholesale.features[idx])
    assert min_var_over_attributes(wholesale, r) > 0.1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32))
def test_known_io_full_knowledge_any_affine(d, seed):
    g = np.random.default_rng(seed)
    X = g.standard_normal((60, d))
    A = np.linalg.qr(g.standard_normal((d, d)))[0] * g.uniform(0.5, 2.0, size=d)
    b = g.uniform(-3, 3, size=d)
    Y = X @ A.T + b
    r = known_io_attack(Y, np.arange(60), X, ridge=0.0)
    assert _rmse(r.reconstructed, X) < 1e-6


def test_known_io_errors():
    Y = np.random.default_rng(0).standard_normal((20, 4))
    with pytest.raises(AttackError, match="cannot determine"):
        known_io_attack(Y, np.arange(3), Y[:3])
    singular = np.column_stack([Y[:, 0], Y[:, 0], Y[:, 1]])
    with pytest.raises(AttackError, match="singular"):
        known_io_attack(singular, np.arange(10), singular[:10], ridge=0.0)
    # a ridge makes the same system solvable
    known_io_attack(singular, np.arange(10), singular[:10], ridge=1e-6)
    with pytest.raises(AttackError, match="known rows shape"):
        known_io_attack(Y, np.arange(5), Y[:4])


def test_known_io_reads_only_known_rows(wholesale):
    p = rotation_perturb(wholesale, 2, seed=1)
    idx = sample_known_pairs(wholesale.n_records, 0.10, seed=9)
    tampered = wholesale.features.copy()
    hidden = np.setdiff1d(np.arange(wholesale.n_records), idx)
    tampered[hidden] = 123.0
    a = run_attack_pool(p, wholesale, ["known_io"], seed=9)[0]
    b = run_attack_pool(p, tampered, ["known_io"], seed=9)[0]
    np.testing.assert_array_equal(a.reconstructed, b.reconstructed)


def test_sample_known_pairs():
    idx = sample_known_pairs(440, 0.1, seed=0)
    assert idx.size == 44 and np.unique(idx).size == 44
    np.testing.assert_array_equal(idx, sample_known_pairs(440, 0.1, seed=0))
    with pytest.raises(AttackError):
        sample_known_pairs(10, 0.0, seed=0)


def test_ica_separates_rotated_uniform_sources():
    g = np.random.default_rng(2024)
    S = g.uniform(-np.sqrt(3), np.sqrt(3), size=(4000, 2))
    theta = 0.6
    A = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    Y = S @ A.T
    r = ica_attack(Y, S)
    assert r.assumptions["converged"]
    corr = [abs(np.corrcoef(r.reconstructed[:, j], S[:, j])[0, 1]) for j in range(2)]
    assert np.mean(corr) > 0.95
    # oracle: the learned unmixing composed with the known mixing is a signed permutation
    ica = SymmetricFastICA().fit(Y)
    G = ica.unmixing_ @ ica.whitening_ @ A
    G = np.abs(G) / np.abs(G).max(axis=1, keepdims=True)
    assert np.sort(G, axis=1)[:, -2].max() < 0.1


def test_ica_gaussian_data_runs(blobs):
    r = ica_attack(additive_noise(blobs, 0.3, seed=0), blobs, max_iter=20)
    assert r.reconstructed.shape == blobs.features.shape
    assert isinstance(r.assumptions["converged"], bool)
    assert r.assumptions["n_iter"] <= 20


def test_ica_permutation_equivariance(sources):
    R = np.linalg.qr(np.random.default_rng(5).standard_normal((3, 3)))[0]
    Y = sources.features @ R.T
    base = ica_attack(Y, sources).reconstructed
    for perm in itertools.permutations(range(3)):
        perm = list(perm)
        # shuffled perturbed columns, same originals: identical reconstruction
        same = ica_attack(Y[:, perm], sources).reconstructed
        np.testing.assert_allclose(same, base, atol=1e-9)
        # shuffle both: reconstruction follows the shuffle
        both = ica_attack(Y[:, perm], sources.features[:, perm]).reconstructed
        np.testing.assert_allclose(both, base[:, perm], atol=1e-9)


def test_align_components_undoes_sign_scale_permutation(sources):
    X = sources.features
    S = np.column_stack([-3 * X[:, 2], 0.5 * X[:, 0] + 4, X[:, 1]])
    aligned, assignment = align_components(S, X)
    assert assignment.tolist() == [1, 2, 0]
    np.testing.assert_allclose(aligned, X, atol=1e-9)


def test_ica_errors():
    one = np.random.default_rng(0).standard_normal((50, 1))
    with pytest.raises(AttackError, match="at least 2"):
        ica_attack(one, one)
    tiny = np.random.default_rng(0).standard_normal((3, 3))
    with pytest.raises(AttackError, match="more records"):
        ica_attack(tiny, tiny)


def test_attack_pool_cardinality_and_order(blobs):
    p = rotation_perturb(blobs, 2, seed=0)
    results = run_attack_pool(p, blobs)
    assert [r.attack for r in results] == ["naive", "known_io", "ica"]
    for r in results:
        assert r.reconstructed.shape == blobs.features.shape
        assert np.all(np.isfinite(r.reconstructed))
    again = run_attack_pool(p, blobs, [("ica", {"max_iter": 5}), "naive"])
    assert [r.attack for r in again] == ["ica", "naive"]


def test_attack_pool_errors_are_tagged(blobs):
    p = rotation_perturb(blobs, 2, seed=0)
    with pytest.raises(AttackError, match="empty"):
        run_attack_pool(p, blobs, [])
    with pytest.raises(AttackError) as info:
        run_attack_pool(p, blobs, ["naive", ("known_io", {"known_fraction": 0.001})])
    assert info.value.attack == "known_io"
    with pytest.raises(AttackError) as info:
        run_attack_pool(p, blobs, [("naive", {"bogus": 1})])
    assert info.value.attack == "naive"
    with pytest.raises(AttackError, match="unknown attack"):
        run_attack_pool(p, blobs, ["spectral"])


def test_ica_rejects_bad_settings():
    Y = np.random.default_rng(0).standard_normal((30, 2))
    with pytest.raises(PrivSelectError, match="max_iter"):
        ica_attack(Y, Y, max_iter=0)
    with pytest.raises(AttackError):
        run_attack_pool(Y, Y, [("ica", {"tol": -1.0})])
