"""Principal subspace extraction and orthogonal projection.

A subspace is held as an orthonormal basis B (d x r); the associated
orthogonal projector P = B B^T is never materialized. All contracts are
stated on P: the basis itself is unique only up to rotation within blocks
of equal singular values, and column signs are arbitrary.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError, RankClampWarning
from .util import ensure_finite

DEFAULT_RANK_REL_TOL = 1e-6

_SSPB_MAGIC = b"SSPB"
_SSPB_VERSION = 1


@dataclass(frozen=True)
class Subspace:
    """Orthonormal basis of a subspace of R^d.

    basis: (d, r) float64 with orthonormal columns.
    sigma: the r retained singular values of the source matrix, descending.
    source_rows: number of rows of the matrix the basis was extracted from.
    """

    basis: np.ndarray
    sigma: np.ndarray
    source_rows: int

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]


def principal_subspace(
    X: np.ndarray,
    r_requested: int,
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL,
) -> Subspace:
    """Extract the dominant right-singular subspace of a row matrix.

    Returns a basis spanning the top-r right singular vectors of X, where
    r = min(r_requested, numerical rank) and the numerical rank counts
    singular values above ``rank_rel_tol`` relative to the largest one.
    When r_requested exceeds the numerical rank a RankClampWarning is
    emitted and the rank is silently clamped (the normal regime when the
    requested component count exceeds the row count).

    Instead of a full SVD we eigendecompose the smaller of the two Gram
    matrices: m x m when X is wide (m < d), d x d otherwise. This is
    O(min(m, d)^3) and exact on the projector level.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    m, d = X.shape
    if m < 1 or d < 2:
        raise ValueError(f"matrix must be at least 1 x 2, got {m} x {d}")
    if r_requested < 1:
        raise ValueError(f"r_requested must be >= 1, got {r_requested}")
    if rank_rel_tol < 0:
        raise ValueError("rank_rel_tol must be >= 0")
    ensure_finite(X, "principal_subspace input")

    gram_on_rows = m < d
    if gram_on_rows:
        w, U = np.linalg.eigh(X @ X.T)
    else:
        w, U = np.linalg.eigh(X.T @ X)
    order = np.argsort(w)[::-1]
    w = np.maximum(w[order], 0.0)
    sigma = np.sqrt(w)

    if sigma[0] == 0.0:
        raise ValueError("cannot extract a subspace from the zero matrix")

    num_rank = int(np.count_nonzero(sigma > rank_rel_tol * sigma[0]))
    r = min(r_requested, num_rank)
    if r < r_requested:
        warnings.warn(
            f"requested {r_requested} components but numerical rank is "
            f"{num_rank} ({m} x {d} matrix); keeping {r}",
            RankClampWarning,
            stacklevel=2,
        )

    if gram_on_rows:
        # Recovered right singular vectors v_i = X^T u_i / sigma_i lose
        # orthogonality near the rank cutoff; a thin QR restores it without
        # changing the spanned subspace.
        B = (X.T @ U[:, order[:r]]) / sigma[:r]
        B, _ = np.linalg.qr(B)
    else:
        B = U[:, order[:r]]

    return Subspace(basis=B, sigma=sigma[:r].copy(), source_rows=m)


def identity_subspace(d: int) -> Subspace:
    """Full space of R^d; its projector is the identity."""
    return Subspace(basis=np.eye(d), sigma=np.ones(d), source_rows=d)


def project(s: Subspace, f: np.ndarray) -> np.ndarray:
    """Orthogonal projection B (B^T f) of a vector onto the subspace."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (s.d,):
        raise ValueError(f"vector has shape {f.shape}, subspace dim is {s.d}")
    return s.basis @ (s.basis.T @ f)


def project_rows(s: Subspace, X: np.ndarray) -> np.ndarray:
    """Project every row of an (m, d) matrix onto the subspace."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != s.d:
        raise ValueError(f"matrix has shape {X.shape}, subspace dim is {s.d}")
    return (X @ s.basis) @ s.basis.T


def residual_sq_norm(s: Subspace, f: np.ndarray) -> float:
    """Squared norm of the component of f orthogonal to the subspace.

    Computed as ||f||^2 - ||B^T f||^2 (stable; never forms I - P) and
    clamped at zero against round-off.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (s.d,):
        raise ValueError(f"vector has shape {f.shape}, subspace dim is {s.d}")
    coeffs = s.basis.T @ f
    return max(float(f @ f - coeffs @ coeffs), 0.0)


def residual_sq_norm_rows(s: Subspace, X: np.ndarray) -> np.ndarray:
    """Row-wise residual squared norms for an (m, d) matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != s.d:
        raise ValueError(f"matrix has shape {X.shape}, subspace dim is {s.d}")
    coeffs = X @ s.basis
    out = np.einsum("ij,ij->i", X, X) - np.einsum("ij,ij->i", coeffs, coeffs)
    return np.maximum(out, 0.0)


def write_subspace(fh, s: Subspace) -> None:
    """Serialize a subspace record (magic, dims, sigmas, column-major basis)."""
    fh.write(_SSPB_MAGIC)
    fh.write(struct.pack("<IIII", _SSPB_VERSION, s.d, s.r, s.source_rows))
    fh.write(s.sigma.astype("<f4").tobytes())
    fh.write(s.basis.astype("<f4").tobytes(order="F"))


def read_subspace(fh) -> Subspace:
    """Parse a subspace record written by write_subspace."""
    magic = fh.read(4)
    if magic != _SSPB_MAGIC:
        raise ModelFormatError(f"bad subspace magic {magic!r}")
    header = fh.read(16)
    if len(header) != 16:
        raise ModelFormatError("truncated subspace header")
    version, d, r, source_rows = struct.unpack("<IIII", header)
    if version != _SSPB_VERSION:
        raise ModelFormatError(f"unsupported subspace version {version}")
    if not (1 <= r <= d):
        raise ModelFormatError(f"invalid subspace dims d={d} r={r}")
    sigma_bytes = fh.read(4 * r)
    basis_bytes = fh.read(4 * d * r)
    if len(sigma_bytes) != 4 * r or len(basis_bytes) != 4 * d * r:
        raise ModelFormatError("truncated subspace payload")
    sigma = np.frombuffer(sigma_bytes, dtype="<f4").astype(np.float64)
    basis = (
        np.frombuffer(basis_bytes, dtype="<f4")
        .reshape(r, d)
        .T.astype(np.float64)
    )
    return Subspace(basis=basis.copy(), sigma=sigma, source_rows=source_rows)
