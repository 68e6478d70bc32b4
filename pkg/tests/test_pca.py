import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minifab_bench.analytics.pca import pca_on_features, standardize
from minifab_bench.errors import ContractError, DegenerateInputError


def closed_form_2x2(x):
    """Eigenpairs of a 2x2 correlation matrix [[1, r], [r, 1]] by hand."""
    x = np.asarray(x, dtype=float)
    a, b = x[:, 0] - x[:, 0].mean(), x[:, 1] - x[:, 1].mean()
    r = float(np.sum(a * b) / math.sqrt(np.sum(a * a) * np.sum(b * b)))
    vals = np.array([1 + abs(r), 1 - abs(r)])
    s = 1 / math.sqrt(2)
    v1 = np.array([s, s]) if r >= 0 else np.array([s, -s])
    return r, vals, v1


def test_perfectly_correlated_pair():
    res = pca_on_features([[1, 2], [2, 4], [3, 6], [4, 8]])
    assert np.allclose(res.eigenvalues, [2, 0], atol=1e-12)
    assert res.explained_ratio[0] == pytest.approx(1.0, abs=1e-12)


def test_uncorrelated_pair():
    res = pca_on_features([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    assert np.allclose(res.eigenvalues, [1, 1], atol=1e-12)


def test_three_by_two_against_closed_form():
    x = [[1, 2], [2, 4.1], [3, 5.9]]
    r, vals, v1 = closed_form_2x2(x)
    res = pca_on_features(x)
    assert np.allclose(res.eigenvalues, vals, atol=1e-12)
    assert np.allclose(res.components[:, 0], v1, atol=1e-12)
    assert np.allclose(res.loadings[:, 0], v1 * math.sqrt(vals[0]), atol=1e-12)


def test_constant_column_named():
    with pytest.raises(DegenerateInputError, match="'b'"):
        pca_on_features([[1, 5], [2, 5], [3, 5]], ["a", "b"])


def test_shape_contract():
    with pytest.raises(ContractError):
        pca_on_features([[1, 2]])
    with pytest.raises(ContractError):
        pca_on_features([[1], [2]])
    with pytest.raises(ContractError):
        standardize([[1, 2], [3, 4]], ["only_one"])


def test_sign_convention():
    rng = np.random.default_rng(0)
    res = pca_on_features(rng.normal(size=(40, 4)))
    for k in range(4):
        col = res.components[:, k]
        assert col[np.argmax(np.abs(col))] > 0


matrices = arrays(np.float64, st.tuples(st.integers(3, 40), st.integers(2, 6)), elements=st.floats(-100, 100, allow_nan=False))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_numerical_properties(x):
    assume(np.all(np.ptp(x, axis=0) > 1e-3))
    res = pca_on_features(x)
    p = x.shape[1]
    v = res.components
    assert np.linalg.norm(v.T @ v - np.eye(p)) <= 1e-9
    assert abs(res.eigenvalues.sum() - p) <= 1e-9
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    corr = z.T @ z / x.shape[0]
    assert np.linalg.norm(res.correlation() - corr) <= 1e-9
    assert np.all(np.diff(res.eigenvalues) <= 1e-12)
    assert np.allclose(res.scores, z @ v, atol=1e-9)


def test_repeatable():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(50, 5))
    a, b = pca_on_features(x), pca_on_features(x.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.loadings, b.loadings)
