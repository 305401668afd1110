import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spalign import FeatureBank, make_manifest, synth_bank


def random_bank(
    rng: np.random.Generator,
    num_classes: int,
    shots: int,
    num_test: int,
    dim: int,
    grid: tuple[int, int],
) -> FeatureBank:
    """Fully random (unstructured) bank for oracle-equivalence tests."""

    def unit(shape):
        x = rng.standard_normal(shape)
        return (x / np.linalg.norm(x, axis=-1, keepdims=True)).astype(np.float32)

    hw = grid[0] * grid[1]
    manifest = make_manifest(dim, grid, num_classes, shots, num_test)
    return FeatureBank(
        manifest=manifest,
        train_global=unit((num_classes, shots, dim)),
        train_local=unit((num_classes, shots, hw, dim)),
        text=unit((num_classes, dim)),
        test_global=unit((num_test, dim)),
        test_labels=(np.arange(num_test) % num_classes).astype(np.int32),
    )


@pytest.fixture(scope="session")
def small_bank() -> FeatureBank:
    """Small structured bank shared by fast tests."""
    return synth_bank(
        num_classes=4, shots=3, num_test=32, dim=24,
        grid_h=3, grid_w=3, gap_angle_deg=50.0, noise_kappa=60.0, seed=11,
    )


@pytest.fixture(scope="session")
def seed7_bank() -> FeatureBank:
    """The pinned end-to-end regression bank."""
    return synth_bank(
        num_classes=8, shots=16, num_test=256, dim=64,
        grid_h=7, grid_w=7, gap_angle_deg=60.0, noise_kappa=50.0, seed=7,
    )
