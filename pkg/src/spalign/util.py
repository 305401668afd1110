"""Small numeric helpers used by several modules."""

from __future__ import annotations

import numpy as np

from .errors import ZeroNormError

# Rows whose norm is already within this tolerance of 1 are left untouched
# by unit_rows. Keeping near-unit rows bitwise intact makes normalization
# idempotent and lets identity projectors reproduce raw features exactly.
UNIT_TOL = 1e-6

# Below this norm a row is treated as zero (normalization undefined).
ZERO_NORM_EPS = 1e-9


def unit_rows(x: np.ndarray, context: str = "feature") -> np.ndarray:
    """Return a copy of ``x`` with every row scaled to unit L2 norm.

    ``x`` may have any number of leading axes; the last axis is the feature
    dimension. Rows already unit-length within ``UNIT_TOL`` are copied
    verbatim, so applying this twice equals applying it once, bit for bit.

    Raises ZeroNormError when a row's norm is below ``ZERO_NORM_EPS``;
    ``context`` names the offending tensor in the message.
    """
    x = np.asarray(x)
    flat = x.reshape(-1, x.shape[-1])
    norms = np.linalg.norm(flat.astype(np.float64, copy=False), axis=1)
    bad = np.flatnonzero(norms < ZERO_NORM_EPS)
    if bad.size:
        raise ZeroNormError(f"{context}: row {bad[0]} has zero norm")
    out = flat.copy()
    fix = np.abs(norms - 1.0) > UNIT_TOL
    if np.any(fix):
        scaled = flat[fix].astype(np.float64) / norms[fix, None]
        out[fix] = scaled.astype(out.dtype)
    return out.reshape(x.shape)


def ensure_finite(x: np.ndarray, context: str = "array") -> None:
    """Raise ValueError if ``x`` contains NaN or Inf."""
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{context}: contains non-finite values")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, used for provenance digests."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h
