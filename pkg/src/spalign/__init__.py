"""Training-free alignment of paired vision/language embedding sets via
selective local-feature subspace projection, with a nearest-subspace
classifier and vMF-based modality-gap diagnostics."""

from .ablation import AblationRow, ablation_csv, run_ablation
from .bank import (
    BankManifest,
    FeatureBank,
    TensorInfo,
    load_bank,
    make_manifest,
    save_bank,
    synth_bank,
)
from .classify import (
    ClassifierSpec,
    EvalReport,
    ProjectedTest,
    evaluate,
    onehot_labels,
    project_test,
    route_language_subspace,
    ssp_logits,
    ssp_logits_batch,
    zero_shot_logits,
)
from .errors import (
    BankFormatError,
    DegenerateProjectionError,
    ModelFormatError,
    ProvenanceError,
    RankClampWarning,
    SpalignError,
    VmfFitError,
    ZeroNormError,
)
from .projectors import (
    SspConfig,
    SspModel,
    align,
    build_language_subspaces,
    build_vision_subspace,
    load_model,
    save_model,
    subset_shots,
)
from .selectors import RegionSelection, similarity_map, similarity_scores, top_k
from .subspace import (
    Subspace,
    identity_subspace,
    principal_subspace,
    project,
    project_rows,
    residual_sq_norm,
    residual_sq_norm_rows,
)
from .vmf import (
    GapMetrics,
    GapReport,
    VmfParams,
    bessel_ratio_A,
    fit_vmf,
    gap_report,
    kl_vmf,
    log_norm_const,
    sample_vmf,
    sample_vmf_rng,
)

__version__ = "0.1.0"
