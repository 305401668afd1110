"""Builds the unified vision subspace and per-class language subspaces from
a feature bank and produces the aligned train/text features (the SSP model).
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bank import BankManifest, FeatureBank
from .errors import ModelFormatError
from .selectors import top_k
from .subspace import (
    Subspace,
    principal_subspace,
    project,
    project_rows,
    read_subspace,
    write_subspace,
)

# Region counts from the reference setup; capped by the grid size when the
# bank's grid is smaller than 40 cells.
DEFAULT_REGIONS = 40
# Requested component count for both subspace families; clamped further by
# the numerical rank of the stacked matrices at build time.
DEFAULT_COMPONENTS = 900

_SSPM_MAGIC = b"SSPM"
_SSPM_VERSION = 1


@dataclass(frozen=True)
class SspConfig:
    """Region counts and component counts for subspace construction.

    ``None`` fields resolve to defaults against a concrete bank manifest:
    q = c = min(40, grid cells), r_vis = r_tex = min(900, dim).
    """

    q: int | None = None
    c: int | None = None
    r_vis: int | None = None
    r_tex: int | None = None
    rank_rel_tol: float = 1e-6

    def resolve(self, manifest: BankManifest) -> "SspConfig":
        hw, d = manifest.grid_cells, manifest.dim
        q = min(DEFAULT_REGIONS, hw) if self.q is None else self.q
        c = min(DEFAULT_REGIONS, hw) if self.c is None else self.c
        r_vis = min(DEFAULT_COMPONENTS, d) if self.r_vis is None else self.r_vis
        r_tex = min(DEFAULT_COMPONENTS, d) if self.r_tex is None else self.r_tex
        if not 1 <= q <= hw:
            raise ValueError(f"Q must be in [1, {hw}], got {q}")
        if not 1 <= c <= hw:
            raise ValueError(f"C must be in [1, {hw}], got {c}")
        if r_vis < 1 or r_tex < 1:
            raise ValueError(f"component counts must be >= 1, got {r_vis}/{r_tex}")
        if self.rank_rel_tol < 0:
            raise ValueError("rank_rel_tol must be >= 0")
        return SspConfig(q=q, c=c, r_vis=r_vis, r_tex=r_tex, rank_rel_tol=self.rank_rel_tol)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "c": self.c,
            "r_vis": self.r_vis,
            "r_tex": self.r_tex,
            "rank_rel_tol": self.rank_rel_tol,
        }


@dataclass(frozen=True)
class SspModel:
    """One vision subspace, N language subspaces, and the aligned features."""

    vision: Subspace
    language: list[Subspace]
    aligned_train: np.ndarray  # (N, K, d)
    aligned_text: np.ndarray  # (N, d)
    config: SspConfig
    provenance: int

    @property
    def num_classes(self) -> int:
        return len(self.language)

    @property
    def d(self) -> int:
        return self.vision.d


def _stack_vision_rows(bank: FeatureBank, q: int) -> np.ndarray:
    """Each training sample contributes its global feature plus its q local
    rows most similar to that global feature (one stack for all classes)."""
    m = bank.manifest
    n, k, d = m.num_classes, m.shots, m.dim
    globals_ = bank.train_global.astype(np.float64)
    locals_ = bank.train_local.astype(np.float64)
    out = np.empty((n * k, q + 1, d))
    for i in range(n):
        for j in range(k):
            sel = top_k(locals_[i, j] @ globals_[i, j], q)
            out[i * k + j, 0] = globals_[i, j]
            out[i * k + j, 1:] = locals_[i, j, sel.indices]
    return out.reshape(n * k * (q + 1), d)


def _stack_language_rows(bank: FeatureBank, i: int, c: int) -> np.ndarray:
    """Class text feature plus, per shot, the c local rows most similar to it."""
    m = bank.manifest
    k, d = m.shots, m.dim
    text_i = bank.text[i].astype(np.float64)
    locals_i = bank.train_local[i].astype(np.float64)
    out = np.empty((k * c + 1, d))
    out[0] = text_i
    for j in range(k):
        sel = top_k(locals_i[j] @ text_i, c)
        out[1 + j * c : 1 + (j + 1) * c] = locals_i[j, sel.indices]
    return out


def build_vision_subspace(bank: FeatureBank, cfg: SspConfig | None = None) -> Subspace:
    """One unified subspace spanned by the selected local rows and the
    global image features of every training sample."""
    cfg = (cfg or SspConfig()).resolve(bank.manifest)
    stacked = _stack_vision_rows(bank, cfg.q)
    return principal_subspace(stacked, cfg.r_vis, cfg.rank_rel_tol)


def build_language_subspaces(
    bank: FeatureBank,
    cfg: SspConfig | None = None,
    max_workers: int | None = None,
) -> list[Subspace]:
    """One subspace per class, spanned by the class text feature and its
    top-c most-text-similar local rows across the class's shots.

    Per-class builds are independent; they run on a thread pool and write
    into preassigned slots, so the result does not depend on scheduling.
    """
    cfg = (cfg or SspConfig()).resolve(bank.manifest)
    n = bank.manifest.num_classes

    def one(i: int) -> Subspace:
        return principal_subspace(
            _stack_language_rows(bank, i, cfg.c), cfg.r_tex, cfg.rank_rel_tol
        )

    workers = max_workers or os.cpu_count() or 1
    if workers <= 1 or n == 1:
        return [one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=min(workers, n)) as pool:
        return list(pool.map(one, range(n)))


def align(
    bank: FeatureBank,
    cfg: SspConfig | None = None,
    max_workers: int | None = None,
) -> SspModel:
    """Build both projector families and the aligned feature matrices."""
    cfg = (cfg or SspConfig()).resolve(bank.manifest)
    m = bank.manifest
    vision = build_vision_subspace(bank, cfg)
    language = build_language_subspaces(bank, cfg, max_workers=max_workers)

    flat_train = bank.train_global.reshape(-1, m.dim).astype(np.float64)
    aligned_train = project_rows(vision, flat_train).reshape(bank.train_global.shape)
    aligned_text = np.stack(
        [project(language[i], bank.text[i].astype(np.float64)) for i in range(m.num_classes)]
    )
    return SspModel(
        vision=vision,
        language=language,
        aligned_train=aligned_train,
        aligned_text=aligned_text,
        config=cfg,
        provenance=m.digest(),
    )


def save_model(model: SspModel, path) -> None:
    """Serialize a model: header, config, provenance, subspace records,
    then the aligned train/text features as raw float32."""
    cfg = model.config
    n, k, d = model.aligned_train.shape
    with open(path, "wb") as fh:
        fh.write(_SSPM_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIIIIfQ",
                _SSPM_VERSION,
                n,
                d,
                cfg.q,
                cfg.c,
                cfg.r_vis,
                cfg.r_tex,
                cfg.rank_rel_tol,
                model.provenance,
            )
        )
        write_subspace(fh, model.vision)
        for s in model.language:
            write_subspace(fh, s)
        fh.write(model.aligned_train.astype("<f4").tobytes())
        fh.write(model.aligned_text.astype("<f4").tobytes())


def load_model(path) -> SspModel:
    """Parse a model file written by save_model."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SSPM_MAGIC:
            raise ModelFormatError(f"bad model magic {magic!r}")
        header = fh.read(40)
        if len(header) != 40:
            raise ModelFormatError("truncated model header")
        version, n, d, q, c, r_vis, r_tex, tol, provenance = struct.unpack(
            "<IIIIIIIfQ", header
        )
        if version != _SSPM_VERSION:
            raise ModelFormatError(f"unsupported model version {version}")
        cfg = SspConfig(q=q, c=c, r_vis=r_vis, r_tex=r_tex, rank_rel_tol=float(tol))
        vision = read_subspace(fh)
        language = [read_subspace(fh) for _ in range(n)]
        rest = fh.read()
    total = len(rest) // 4
    if len(rest) % 4 or total % (n * d) or total // (n * d) < 2:
        raise ModelFormatError("aligned-feature payload has inconsistent size")
    k = total // (n * d) - 1
    flat = np.frombuffer(rest, dtype="<f4").astype(np.float64)
    aligned_train = flat[: n * k * d].reshape(n, k, d)
    aligned_text = flat[n * k * d :].reshape(n, d)
    return SspModel(
        vision=vision,
        language=language,
        aligned_train=aligned_train,
        aligned_text=aligned_text,
        config=cfg,
        provenance=provenance,
    )


def subset_shots(bank: FeatureBank, k: int) -> FeatureBank:
    """Bank restricted to the first k shots of every class (deterministic
    prefix subsetting, used by sweeps and ablations)."""
    m = bank.manifest
    if not 1 <= k <= m.shots:
        raise ValueError(f"shots must be in [1, {m.shots}], got {k}")
    if k == m.shots:
        return bank
    manifest = replace(
        m,
        shots=k,
        tensors={
            name: (
                replace(info, shape=(m.num_classes, k) + tuple(info.shape[2:]))
                if name.startswith("train_")
                else info
            )
            for name, info in m.tensors.items()
        },
    )
    return FeatureBank(
        manifest=manifest,
        train_global=bank.train_global[:, :k].copy(),
        train_local=bank.train_local[:, :k].copy(),
        text=bank.text,
        test_global=bank.test_global,
        test_labels=bank.test_labels,
        test_local=bank.test_local,
    )
