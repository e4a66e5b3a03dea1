"""SMOTE: synthetic minority oversampling along nearest-neighbor segments.

Synthetic rows are interpolations x_i + u * (x_nn - x_i) between a minority
row and one of its k nearest minority neighbors (exact Euclidean search,
distance ties broken by lower row index). Majority rows and all originals
are left untouched; sampling stops once the minority class reaches
round(target_ratio * majority_count) rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SmoteParams:
    k: int = 5
    seed: int = 0
    target_ratio: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise DataError(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.target_ratio <= 1.0):
            raise DataError(f"target_ratio must be in (0, 1], got {self.target_ratio}")


@dataclass
class LabeledMatrix:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"feature rows ({self.features.shape[0]}) != labels ({self.labels.shape[0]})"
            )
        bad = set(np.unique(self.labels)) - {0, 1}
        if bad:
            raise DataError(f"labels must be 0/1, found {sorted(bad)}")


def minority_neighbor_index(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbors of each point, excluding itself.

    Brute-force Euclidean with a stable sort, so equal distances resolve to
    the lower row index.
    """
    sq = np.einsum("ij,ij->i", points, points)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def smote(data: LabeledMatrix, params: SmoteParams) -> LabeledMatrix:
    """Oversample the minority class; deterministic under ``params.seed``."""
    counts = np.bincount(data.labels, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise DataError("both classes must be present for SMOTE")
    minority_label = 1 if counts[1] <= counts[0] else 0
    n_min = int(counts[minority_label])
    n_maj = int(counts[1 - minority_label])
    if params.k >= n_min:
        raise DataError(f"k={params.k} must be below the minority count {n_min}")

    target = int(round(params.target_ratio * n_maj))
    n_new = target - n_min
    if n_new <= 0:
        return LabeledMatrix(data.features.copy(), data.labels.copy())

    minority_rows = np.flatnonzero(data.labels == minority_label)
    points = data.features[minority_rows]
    neighbors = minority_neighbor_index(points, params.k)

    rng = np.random.default_rng(params.seed)
    synthetic = np.empty((n_new, data.features.shape[1]), dtype=np.float64)
    for j in range(n_new):
        i = int(rng.integers(n_min))
        nn = int(neighbors[i, int(rng.integers(params.k))])
        u = rng.random()
        synthetic[j] = points[i] + u * (points[nn] - points[i])

    features = np.vstack([data.features, synthetic])
    labels = np.concatenate(
        [data.labels, np.full(n_new, minority_label, dtype=np.int64)]
    )
    return LabeledMatrix(features, labels)
