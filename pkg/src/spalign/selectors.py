"""Similarity scoring against local-feature grids and top-k region selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import ensure_finite


@dataclass(frozen=True)
class RegionSelection:
    """The k highest-scoring grid cells, in canonical (ascending index) order."""

    indices: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def similarity_scores(ref: np.ndarray, local: np.ndarray) -> np.ndarray:
    """Cosine similarity of a reference feature against each local row.

    Inputs are assumed unit-normalized (the feature bank guarantees this),
    so the score is a plain dot product.
    """
    ref = np.asarray(ref, dtype=np.float64)
    local = np.asarray(local, dtype=np.float64)
    if ref.ndim != 1 or local.ndim != 2 or local.shape[1] != ref.shape[0]:
        raise ValueError(
            f"shape mismatch: ref {ref.shape} vs local {local.shape}"
        )
    return local @ ref


def top_k(scores: np.ndarray, k: int) -> RegionSelection:
    """Select the k largest scores; ties go to the smaller index.

    Returned indices are sorted ascending regardless of score order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"scores must be 1-D, got shape {scores.shape}")
    n = scores.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    ensure_finite(scores, "scores")
    # Stable sort on negated scores keeps equal scores in index order.
    picked = np.argsort(-scores, kind="stable")[:k]
    indices = np.sort(picked)
    return RegionSelection(indices=indices, scores=scores[indices])


def similarity_map(
    ref: np.ndarray,
    local: np.ndarray,
    h: int,
    w: int,
    normalized: bool = False,
) -> np.ndarray:
    """Similarity scores reshaped to the (h, w) grid, row-major.

    With ``normalized`` the grid is min-max scaled to [0, 1]; a constant
    grid (max == min) maps to all zeros by convention.
    """
    if h < 1 or w < 1 or h * w != local.shape[0]:
        raise ValueError(
            f"grid {h} x {w} does not match {local.shape[0]} local rows"
        )
    grid = similarity_scores(ref, local).reshape(h, w)
    if normalized:
        lo, hi = grid.min(), grid.max()
        if hi > lo:
            grid = (grid - lo) / (hi - lo)
        else:
            grid = np.zeros_like(grid)
    return grid
