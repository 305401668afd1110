import numpy as np
import pytest

from spalign.ablation import COMBOS, ablation_csv, run_ablation
from spalign.classify import ClassifierSpec, evaluate
from spalign.projectors import SspConfig


@pytest.fixture(scope="module")
def rows(small_bank):
    return run_ablation(
        small_bank,
        SspConfig(r_vis=5, r_tex=5),
        ClassifierSpec(kind="ssp_zeroshot", text_term_source="vis"),
        [1, 3],
    )


def test_four_rows_in_combo_order(rows):
    assert [(r.use_vision, r.use_language) for r in rows] == list(COMBOS)
    for row in rows:
        assert set(row.accuracy) == {1, 3}


def test_baseline_row_equals_raw_zeroshot(rows, small_bank):
    raw = evaluate(small_bank, None, ClassifierSpec(kind="raw_zeroshot"))
    baseline = rows[0]
    assert not baseline.use_vision and not baseline.use_language
    assert baseline.accuracy[3] == raw.accuracy
    # with one shot: same test set, same raw text features, same accuracy
    assert baseline.accuracy[1] == raw.accuracy


def test_shot_prefix_determinism(small_bank):
    spec = ClassifierSpec(kind="ssp_zeroshot", text_term_source="vis")
    cfg = SspConfig(r_vis=5, r_tex=5)
    once = run_ablation(small_bank, cfg, spec, [2])
    twice = run_ablation(small_bank, cfg, spec, [2])
    for a, b in zip(once, twice):
        assert a.accuracy == b.accuracy


def test_csv_format(rows):
    text = ablation_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "use_vision,use_language,shots,accuracy"
    assert len(lines) == 1 + 4 * 2
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0" and first[2] == "1"
    assert 0.0 <= float(first[3]) <= 1.0


def test_rejects_raw_kind(small_bank):
    with pytest.raises(ValueError, match="projection-based"):
        run_ablation(small_bank, None, ClassifierSpec(kind="raw_zeroshot"), [1])


def test_rejects_empty_shots(small_bank):
    with pytest.raises(ValueError, match="shots_list"):
        run_ablation(small_bank, None, ClassifierSpec(), [])


def test_cache_spec_supported(small_bank):
    rows = run_ablation(
        small_bank,
        SspConfig(r_vis=5, r_tex=5),
        ClassifierSpec(kind="ssp_cache", alpha=1.0, beta=5.5),
        [3],
    )
    assert all(0.0 <= r.accuracy[3] <= 1.0 for r in rows)
