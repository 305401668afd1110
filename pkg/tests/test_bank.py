import json
import math

import numpy as np
import pytest

from spalign.bank import (
    BankManifest,
    FeatureBank,
    load_bank,
    make_manifest,
    save_bank,
    synth_bank,
)
from spalign.errors import BankFormatError, ZeroNormError


def unit32(x):
    x = np.asarray(x, dtype=np.float64)
    return (x / np.linalg.norm(x, axis=-1, keepdims=True)).astype(np.float32)


def write_tiny_bank(root, text_row0=(1.0, 0.0, 0.0, 0.0), global_bytes=None):
    """Hand-written 2-class, 1-shot, d=4, 1x1-grid bank."""
    root.mkdir(exist_ok=True)
    e = np.eye(4, dtype=np.float32)
    tensors = {
        "train_global": unit32([[[1.0, 1.0, 0, 0]], [[0, 0, 1.0, 1.0]]]),
        "train_local": unit32([[[[1.0, 0.5, 0, 0]]], [[[0, 0, 1.0, 0.5]]]]),
        "text": np.stack([np.array(text_row0, dtype=np.float32), e[2]]),
        "test_global": np.stack([e[0], e[3]]),
        "test_labels": np.array([0, 1], dtype=np.int32),
    }
    manifest = {
        "version": 1,
        "dim": 4,
        "grid": [1, 1],
        "num_classes": 2,
        "shots": 1,
        "num_test": 2,
        "tensors": {
            name: {
                "file": f"{name}.bin",
                "shape": list(arr.shape),
                "dtype": "int32" if name == "test_labels" else "float32",
            }
            for name, arr in tensors.items()
        },
        "meta": {"note": "hand-built"},
    }
    if global_bytes is not None:
        (root / "train_global.bin").write_bytes(global_bytes)
    else:
        (root / "train_global.bin").write_bytes(tensors["train_global"].tobytes())
    for name in ("train_local", "text", "test_global"):
        (root / f"{name}.bin").write_bytes(tensors[name].astype("<f4").tobytes())
    (root / "test_labels.bin").write_bytes(tensors["test_labels"].astype("<i4").tobytes())
    (root / "manifest.json").write_text(json.dumps(manifest))
    return manifest


def test_load_hand_built_bank(tmp_path):
    write_tiny_bank(tmp_path / "bank")
    bank = load_bank(tmp_path / "bank")
    assert bank.train_global.shape == (2, 1, 4)
    assert bank.train_local.shape == (2, 1, 1, 4)
    assert bank.text.shape == (2, 4)
    assert bank.test_global.shape == (2, 4)
    assert bank.test_labels.tolist() == [0, 1]
    bank.validate()


def test_shape_mismatch_detected(tmp_path):
    seven = np.zeros(7, dtype="<f4").tobytes()
    write_tiny_bank(tmp_path / "bank", global_bytes=seven)
    with pytest.raises(BankFormatError, match="28"):
        load_bank(tmp_path / "bank")


def test_zero_norm_row_rejected(tmp_path):
    write_tiny_bank(tmp_path / "bank", text_row0=(0.0, 0.0, 0.0, 0.0))
    with pytest.raises(ZeroNormError, match="text"):
        load_bank(tmp_path / "bank")


def test_missing_tensor_file(tmp_path):
    write_tiny_bank(tmp_path / "bank")
    (tmp_path / "bank" / "text.bin").unlink()
    with pytest.raises(BankFormatError, match="missing tensor"):
        load_bank(tmp_path / "bank")


def test_missing_manifest(tmp_path):
    with pytest.raises(BankFormatError, match="manifest"):
        load_bank(tmp_path / "nowhere")


def test_unsupported_version(tmp_path):
    manifest = write_tiny_bank(tmp_path / "bank")
    manifest["version"] = 7
    (tmp_path / "bank" / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(BankFormatError, match="version"):
        load_bank(tmp_path / "bank")


def test_nonfinite_value_rejected(tmp_path):
    write_tiny_bank(tmp_path / "bank")
    bad = np.full((2, 4), np.nan, dtype="<f4")
    (tmp_path / "bank" / "text.bin").write_bytes(bad.tobytes())
    with pytest.raises(BankFormatError, match="non-finite"):
        load_bank(tmp_path / "bank")


def test_label_out_of_range_rejected(tmp_path):
    write_tiny_bank(tmp_path / "bank")
    (tmp_path / "bank" / "test_labels.bin").write_bytes(
        np.array([0, 2], dtype="<i4").tobytes()
    )
    with pytest.raises(BankFormatError, match="labels"):
        load_bank(tmp_path / "bank")


def test_round_trip_bitwise(tmp_path, small_bank):
    save_bank(small_bank, tmp_path / "bank")
    back = load_bank(tmp_path / "bank")
    for name in ("train_global", "train_local", "text", "test_global", "test_labels"):
        assert getattr(back, name).tobytes() == getattr(small_bank, name).tobytes()
    assert back.manifest == small_bank.manifest


def test_resave_identical_bytes(tmp_path, small_bank):
    save_bank(small_bank, tmp_path / "a")
    back = load_bank(tmp_path / "a")
    save_bank(back, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_load_normalization_idempotent(tmp_path):
    # rows deliberately not normalized: load must fix them, and loading the
    # re-saved bank must not change a single byte
    rng = np.random.default_rng(5)
    manifest = make_manifest(8, (2, 2), 2, 2, 4)
    bank = FeatureBank(
        manifest=manifest,
        train_global=unit32(rng.standard_normal((2, 2, 8))),
        train_local=unit32(rng.standard_normal((2, 2, 4, 8))),
        text=unit32(rng.standard_normal((2, 8))),
        test_global=unit32(rng.standard_normal((4, 8))),
        test_labels=np.array([0, 1, 0, 1], dtype=np.int32),
    )
    save_bank(bank, tmp_path / "a")
    # scale one tensor's bytes so load has to renormalize
    raw = np.frombuffer((tmp_path / "a" / "text.bin").read_bytes(), dtype="<f4") * 3.0
    (tmp_path / "a" / "text.bin").write_bytes(raw.astype("<f4").tobytes())
    first = load_bank(tmp_path / "a")
    save_bank(first, tmp_path / "b")
    second = load_bank(tmp_path / "b")
    assert first.text.tobytes() == second.text.tobytes()
    np.testing.assert_allclose(np.linalg.norm(first.text, axis=1), 1.0, atol=1e-5)


def test_save_unwritable_path(tmp_path, small_bank):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        save_bank(small_bank, blocker / "bank")


def test_optional_test_local_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    manifest = make_manifest(6, (2, 1), 2, 1, 3, with_test_local=True)
    bank = FeatureBank(
        manifest=manifest,
        train_global=unit32(rng.standard_normal((2, 1, 6))),
        train_local=unit32(rng.standard_normal((2, 1, 2, 6))),
        text=unit32(rng.standard_normal((2, 6))),
        test_global=unit32(rng.standard_normal((3, 6))),
        test_labels=np.array([0, 1, 0], dtype=np.int32),
        test_local=unit32(rng.standard_normal((3, 2, 6))),
    )
    save_bank(bank, tmp_path / "bank")
    back = load_bank(tmp_path / "bank")
    assert back.test_local is not None
    assert back.test_local.tobytes() == bank.test_local.tobytes()


def test_manifest_digest_sensitivity(small_bank):
    m = small_bank.manifest
    assert m.digest() == BankManifest.from_dict(m.to_dict()).digest()
    altered = make_manifest(
        m.dim, m.grid, m.num_classes, m.shots, m.num_test + 1, meta=m.meta
    )
    assert altered.digest() != m.digest()


def test_synth_determinism():
    a = synth_bank(3, 2, 8, 16, 2, 2, 40.0, 60.0, seed=42)
    b = synth_bank(3, 2, 8, 16, 2, 2, 40.0, 60.0, seed=42)
    for name in ("train_global", "train_local", "text", "test_global", "test_labels"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    c = synth_bank(3, 2, 8, 16, 2, 2, 40.0, 60.0, seed=43)
    assert c.text.tobytes() != a.text.tobytes()


def test_synth_zero_gap_aligns_text_with_images():
    bank = synth_bank(4, 8, 8, 16, 2, 2, 0.0, 5000.0, seed=1)
    for i in range(4):
        mean_img = bank.train_global[i].astype(np.float64).mean(axis=0)
        mean_img /= np.linalg.norm(mean_img)
        assert bank.text[i].astype(np.float64) @ mean_img >= 0.99


@pytest.mark.parametrize(
    "bad_kwargs",
    [
        {"num_classes": 1},
        {"shots": 0},
        {"num_test": 0},
        {"dim": 1},
        {"grid_h": 0},
        {"gap_angle_deg": 180.0},
        {"gap_angle_deg": -1.0},
        {"noise_kappa": 0.0},
    ],
)
def test_synth_parameter_domains(bad_kwargs):
    kwargs = dict(
        num_classes=3, shots=2, num_test=4, dim=8,
        grid_h=2, grid_w=2, gap_angle_deg=30.0, noise_kappa=50.0, seed=0,
    )
    kwargs.update(bad_kwargs)
    with pytest.raises(ValueError):
        synth_bank(**kwargs)


def test_synth_gap_fidelity_monotone():
    angles = {}
    for gap in (0.0, 30.0, 60.0, 90.0):
        bank = synth_bank(16, 8, 16, 32, 2, 2, gap, 100.0, seed=77)
        per_class = []
        for i in range(16):
            mean_img = bank.train_global[i].astype(np.float64).mean(axis=0)
            mean_img /= np.linalg.norm(mean_img)
            cos = np.clip(bank.text[i].astype(np.float64) @ mean_img, -1.0, 1.0)
            per_class.append(math.degrees(math.acos(cos)))
        angles[gap] = float(np.mean(per_class))
    assert angles[0.0] < angles[30.0] < angles[60.0] < angles[90.0]


def test_synth_validates(small_bank):
    small_bank.validate()
    assert small_bank.manifest.meta["generator"] == "spalign.synth"
