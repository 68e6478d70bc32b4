"""Correlation-matrix PCA with loadings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from minifab_bench.errors import ContractError, DegenerateInputError


@dataclass(frozen=True)
class PcaResult:
    """Eigen-decomposition of the feature correlation matrix.

    ``components[:, k]`` is the k-th unit direction; ``loadings[:, k]`` is
    that direction scaled by ``sqrt(eigenvalues[k])``; ``scores`` are the
    standardised observations projected on the components.
    """

    eigenvalues: np.ndarray
    components: np.ndarray
    loadings: np.ndarray
    scores: np.ndarray
    feature_names: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    def correlation(self) -> np.ndarray:
        """Correlation matrix rebuilt from the eigenpairs."""
        return (self.components * self.eigenvalues) @ self.components.T


def standardize(matrix, feature_names: Sequence[str] | None = None):
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ContractError("PCA expects an observations x features matrix")
    n, p = x.shape
    if n < 2 or p < 2:
        raise ContractError(f"PCA needs >= 2 observations and >= 2 features, got {n}x{p}")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(p))
    if len(names) != p:
        raise ContractError("feature_names length does not match the matrix")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    for j in range(p):
        if scale[j] == 0 or np.ptp(x[:, j]) == 0:
            raise DegenerateInputError(f"feature column {names[j]!r} is constant")
    return (x - mean) / scale, mean, scale, names


def pca_on_features(matrix, feature_names: Sequence[str] | None = None) -> PcaResult:
    z, mean, scale, names = standardize(matrix, feature_names)
    corr = (z.T @ z) / z.shape[0]
    corr = (corr + corr.T) / 2
    eigenvalues, vectors = np.linalg.eigh(corr)
    order = np.argsort(eigenvalues, kind="stable")[::-1]
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]
    # Deterministic signs: the largest-magnitude entry of each component is positive.
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    loadings = vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    return PcaResult(eigenvalues, vectors, loadings, z @ vectors, names, mean, scale)
