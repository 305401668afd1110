"""Projector on/off ablation: evaluates the four combinations {neither,
language-only, vision-only, both} across shot settings and tabulates
accuracy, mirroring the usual projection-operation ablation table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bank import FeatureBank
from .classify import RAW_ZEROSHOT, ClassifierSpec, evaluate
from .projectors import SspConfig, SspModel, align, subset_shots
from .subspace import identity_subspace


@dataclass
class AblationRow:
    use_vision: bool
    use_language: bool
    accuracy: dict[int, float] = field(default_factory=dict)


# Row order of the ablation table: baseline first, both projectors last.
COMBOS = ((False, False), (False, True), (True, False), (True, True))


def _variant(full: SspModel, bank: FeatureBank, use_vision: bool, use_language: bool) -> SspModel:
    """Swap identity subspaces in for disabled sides; the disabled side's
    features then pass through unprojected."""
    if use_vision and use_language:
        return full
    ident = identity_subspace(full.d)
    n = full.num_classes
    return SspModel(
        vision=full.vision if use_vision else ident,
        language=full.language if use_language else [ident] * n,
        aligned_train=(
            full.aligned_train if use_vision else bank.train_global.astype(np.float64)
        ),
        aligned_text=(
            full.aligned_text if use_language else bank.text.astype(np.float64)
        ),
        config=full.config,
        provenance=full.provenance,
    )


def run_ablation(
    bank: FeatureBank,
    cfg: SspConfig | None,
    spec: ClassifierSpec,
    shots_list: list[int],
) -> list[AblationRow]:
    """Evaluate all four projector combinations for each shot setting.

    Shot sub-sampling is prefix-based (the k-shot run uses the first k
    shots of every class). With the default text-term classifier the
    baseline row reproduces raw zero-shot logits bit for bit.
    """
    spec.validate()
    if spec.kind == RAW_ZEROSHOT:
        raise ValueError("ablation requires a projection-based classifier kind")
    if not shots_list:
        raise ValueError("shots_list must not be empty")
    rows = [AblationRow(use_vision=v, use_language=l) for v, l in COMBOS]
    for k in shots_list:
        sub = subset_shots(bank, k)
        full = align(sub, cfg)
        for row in rows:
            model = _variant(full, sub, row.use_vision, row.use_language)
            row.accuracy[k] = evaluate(sub, model, spec).accuracy
    return rows


def ablation_csv(rows: list[AblationRow]) -> str:
    """Long-format CSV: use_vision,use_language,shots,accuracy."""
    lines = ["use_vision,use_language,shots,accuracy"]
    for row in rows:
        for k, acc in row.accuracy.items():
            lines.append(f"{int(row.use_vision)},{int(row.use_language)},{k},{acc!r}")
    return "\n".join(lines) + "\n"
