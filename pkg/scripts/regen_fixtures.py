#!/usr/bin/env python3
"""Regenerate the pinned end-to-end regression fixture.

Run from the repository root after any intentional change to the synthetic
generator or the alignment pipeline, then review the diff:

    python3 scripts/regen_fixtures.py
"""

import json
import warnings
from pathlib import Path

from spalign import (
    ClassifierSpec,
    SspConfig,
    align,
    evaluate,
    gap_report,
    run_ablation,
    synth_bank,
)
from spalign.errors import RankClampWarning

BANK_ARGS = dict(
    num_classes=8, shots=16, num_test=256, dim=64,
    grid_h=7, grid_w=7, gap_angle_deg=60.0, noise_kappa=50.0, seed=7,
)
RANK = 12
SWEEP_RANKS = [8, 16, 32, 64]
ABLATION_SHOTS = [4, 16]

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "synth_seed7.json"


def main() -> None:
    warnings.simplefilter("ignore", RankClampWarning)
    bank = synth_bank(**BANK_ARGS)
    cfg = SspConfig(r_vis=RANK, r_tex=RANK)
    model = align(bank, cfg, max_workers=1)

    raw = evaluate(bank, None, ClassifierSpec(kind="raw_zeroshot"))
    ssp_zs = evaluate(bank, model, ClassifierSpec(kind="ssp_zeroshot"))
    ssp_cache = evaluate(bank, model, ClassifierSpec(kind="ssp_cache"))
    gap = gap_report(bank, model)

    ablation = run_ablation(
        bank, cfg,
        ClassifierSpec(kind="ssp_zeroshot", text_term_source="vis"),
        ABLATION_SHOTS,
    )
    sweep = {}
    for r in SWEEP_RANKS:
        m = align(bank, SspConfig(r_vis=r, r_tex=r), max_workers=1)
        sweep[str(r)] = evaluate(bank, m, ClassifierSpec(kind="ssp_zeroshot")).accuracy

    fixture = {
        "bank": BANK_ARGS,
        "rank": RANK,
        "accuracy": {
            "raw_zeroshot": raw.accuracy,
            "ssp_zeroshot": ssp_zs.accuracy,
            "ssp_cache": ssp_cache.accuracy,
        },
        "gap": {"before": gap.before.to_dict(), "after": gap.after.to_dict()},
        "ablation": {
            f"vis={int(row.use_vision)},lang={int(row.use_language)}": {
                str(k): v for k, v in row.accuracy.items()
            }
            for row in ablation
        },
        "rank_sweep": sweep,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")
    print(json.dumps(fixture["accuracy"], indent=2))


if __name__ == "__main__":
    main()
