"""Test-time pipeline: subspace projection of test features, nearest-
language-subspace routing, logit computation, and accuracy evaluation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bank import FeatureBank
from .errors import DegenerateProjectionError, ProvenanceError
from .projectors import SspModel
from .subspace import project, project_rows, residual_sq_norm, residual_sq_norm_rows
from .util import UNIT_TOL, ZERO_NORM_EPS, unit_rows

RAW_ZEROSHOT = "raw_zeroshot"
SSP_ZEROSHOT = "ssp_zeroshot"
SSP_CACHE = "ssp_cache"
KINDS = (RAW_ZEROSHOT, SSP_ZEROSHOT, SSP_CACHE)


@dataclass(frozen=True)
class ClassifierSpec:
    """Which logits to compute and the cache-blend knobs.

    alpha scales the cache term, beta sharpens its exponential kernel
    (both only used by the cache classifier); text_term_source picks
    whether the text logits pair with the language- or vision-projected
    test feature.
    """

    kind: str = SSP_ZEROSHOT
    alpha: float = 1.0
    beta: float = 5.5
    text_term_source: str = "tex"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")
        if self.text_term_source not in ("tex", "vis"):
            raise ValueError(f"text_term_source must be tex|vis, got {self.text_term_source!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "text_term_source": self.text_term_source,
        }


@dataclass(frozen=True)
class ProjectedTest:
    """Vision- and language-projected test feature (unit-normalized) plus
    the routed class and the pre-normalization projection norms."""

    f_vis: np.ndarray
    f_tex: np.ndarray
    class_index: int
    vis_norm: float
    tex_norm: float


def zero_shot_logits(f: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Cosine logits of a feature against each class text feature."""
    f = np.asarray(f, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if f.ndim != 1 or T.ndim != 2 or T.shape[1] != f.shape[0]:
        raise ValueError(f"shape mismatch: f {f.shape} vs T {T.shape}")
    return T @ f


def route_language_subspace(model: SspModel, f_test: np.ndarray) -> tuple[int, np.ndarray]:
    """Pick the class whose language subspace leaves the smallest orthogonal
    residual of the test feature; ties go to the smallest index. Returns
    the class index and the (raw) projection onto that subspace."""
    residuals = [residual_sq_norm(s, f_test) for s in model.language]
    i = int(np.argmin(residuals))
    return i, project(model.language[i], f_test)


def _unit_vec(v: np.ndarray, norm: float) -> np.ndarray:
    if abs(norm - 1.0) <= UNIT_TOL:
        return v
    return v / norm


def project_test(model: SspModel, f_test: np.ndarray) -> ProjectedTest:
    """Project a test feature into the vision subspace and its routed
    language subspace, re-normalizing both projections to unit length."""
    f_test = np.asarray(f_test, dtype=np.float64)
    f_vis = project(model.vision, f_test)
    vis_norm = float(np.linalg.norm(f_vis))
    if vis_norm < ZERO_NORM_EPS:
        raise DegenerateProjectionError("vision subspace annihilates the test feature")
    i, f_tex = route_language_subspace(model, f_test)
    tex_norm = float(np.linalg.norm(f_tex))
    if tex_norm < ZERO_NORM_EPS:
        raise DegenerateProjectionError(
            f"language subspace {i} annihilates the test feature"
        )
    return ProjectedTest(
        f_vis=_unit_vec(f_vis, vis_norm),
        f_tex=_unit_vec(f_tex, tex_norm),
        class_index=i,
        vis_norm=vis_norm,
        tex_norm=tex_norm,
    )


def onehot_labels(num_classes: int, shots: int) -> np.ndarray:
    """(N*K, N) one-hot matrix matching the flattened training feature order."""
    labels = np.repeat(np.arange(num_classes), shots)
    out = np.zeros((num_classes * shots, num_classes))
    out[np.arange(out.shape[0]), labels] = 1.0
    return out


def _project_batch(model: SspModel, X: np.ndarray):
    """Vision/language projections for a batch of unit test rows."""
    f_vis = project_rows(model.vision, X)
    vis_norms = np.linalg.norm(f_vis, axis=1)
    bad = np.flatnonzero(vis_norms < ZERO_NORM_EPS)
    if bad.size:
        raise DegenerateProjectionError(
            f"vision subspace annihilates test feature {bad[0]}"
        )
    f_vis = unit_rows(f_vis, "vision projection")

    residuals = np.stack(
        [residual_sq_norm_rows(s, X) for s in model.language], axis=1
    )
    routed = np.argmin(residuals, axis=1)
    f_tex = np.empty_like(X)
    for i in np.unique(routed):
        rows = routed == i
        f_tex[rows] = project_rows(model.language[i], X[rows])
    tex_norms = np.linalg.norm(f_tex, axis=1)
    bad = np.flatnonzero(tex_norms < ZERO_NORM_EPS)
    if bad.size:
        raise DegenerateProjectionError(
            f"language subspace {routed[bad[0]]} annihilates test feature {bad[0]}"
        )
    f_tex = unit_rows(f_tex, "language projection")
    return f_vis, f_tex, routed


def ssp_logits_batch(
    model: SspModel,
    spec: ClassifierSpec,
    labels_onehot: np.ndarray,
    F_test: np.ndarray,
) -> np.ndarray:
    """Logits for a batch of test rows (one row per test feature).

    Text term: aligned text features dotted with the language- (or
    vision-) projected test feature. Cache term (cache classifier only):
    affinities of the vision-projected feature to every aligned training
    feature, pushed through exp(-beta (1 - a)) and summed per class.
    All features are unit-normalized before dot products.
    """
    spec.validate()
    if spec.kind == RAW_ZEROSHOT:
        raise ValueError("raw_zeroshot does not use the projection pipeline")
    F_test = np.asarray(F_test, dtype=np.float64)
    n, k, d = model.aligned_train.shape
    if F_test.ndim != 2 or F_test.shape[1] != d:
        raise ValueError(f"test batch has shape {F_test.shape}, expected (*, {d})")
    if labels_onehot.shape != (n * k, n):
        raise ValueError(
            f"labels_onehot has shape {labels_onehot.shape}, expected {(n * k, n)}"
        )

    f_vis, f_tex, _ = _project_batch(model, F_test)
    f_sel = f_tex if spec.text_term_source == "tex" else f_vis
    text_n = unit_rows(model.aligned_text, "aligned text")
    logits = f_sel @ text_n.T
    if spec.kind == SSP_CACHE and spec.alpha != 0.0:
        train_n = unit_rows(model.aligned_train.reshape(n * k, d), "aligned train")
        affinities = f_vis @ train_n.T
        phi = np.exp(-spec.beta * (1.0 - affinities))
        logits = logits + spec.alpha * (phi @ labels_onehot)
    return logits


def ssp_logits(
    model: SspModel,
    spec: ClassifierSpec,
    labels_onehot: np.ndarray,
    f_test: np.ndarray,
) -> np.ndarray:
    """Logits for a single test feature; see ssp_logits_batch."""
    f_test = np.asarray(f_test, dtype=np.float64)
    return ssp_logits_batch(model, spec, labels_onehot, f_test[None, :])[0]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray  # (N, N), rows = true class, cols = predicted
    logit_stats: dict
    spec: ClassifierSpec
    timing_ms: float

    def to_json_dict(self, with_timing: bool = True) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": [float(v) for v in self.per_class_accuracy],
            "confusion": self.confusion.tolist(),
            "logit_stats": self.logit_stats,
            "spec": self.spec.to_dict(),
            "timing_ms": self.timing_ms if with_timing else None,
        }


def evaluate(
    bank: FeatureBank,
    model: SspModel | None,
    spec: ClassifierSpec,
) -> EvalReport:
    """Classify every test feature and tabulate accuracy and confusion.

    ``model`` may be None for the raw zero-shot classifier; otherwise its
    provenance digest must match the bank.
    """
    spec.validate()
    m = bank.manifest
    if m.num_test == 0:
        raise ValueError("bank has an empty test set")
    if model is not None and model.provenance != m.digest():
        raise ProvenanceError(model.provenance, m.digest())
    if spec.kind != RAW_ZEROSHOT and model is None:
        raise ValueError(f"classifier {spec.kind} requires a model")

    start = time.perf_counter()
    X = bank.test_global.astype(np.float64)
    if spec.kind == RAW_ZEROSHOT:
        logits = X @ bank.text.astype(np.float64).T
    else:
        labels_onehot = onehot_labels(m.num_classes, m.shots)
        logits = ssp_logits_batch(model, spec, labels_onehot, X)
    preds = np.argmax(logits, axis=1)

    n = m.num_classes
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (bank.test_labels, preds), 1)
    counts = confusion.sum(axis=1)
    per_class = np.divide(
        np.diag(confusion),
        counts,
        out=np.zeros(n, dtype=np.float64),
        where=counts > 0,
    )
    elapsed_ms = (time.perf_counter() - start) * 1e3
    return EvalReport(
        accuracy=float(np.trace(confusion)) / m.num_test,
        per_class_accuracy=per_class,
        confusion=confusion,
        logit_stats={
            "min": float(logits.min()),
            "max": float(logits.max()),
            "mean": float(logits.mean()),
        },
        spec=spec,
        timing_ms=elapsed_ms,
    )
