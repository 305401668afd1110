"""Feature-bank container: on-disk format, loader/saver, synthetic banks.

A bank is a directory holding ``manifest.json`` plus one raw binary file
per tensor (little-endian float32/int32, row-major, no header). Every
feature row is L2-normalized on load, so downstream code can treat dot
products as cosine similarities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BankFormatError
from .util import ensure_finite, fnv1a64, unit_rows
from .vmf import sample_vmf_rng

BANK_VERSION = 1

# Fraction of local grid cells drawn around the shared clutter direction
# in synthetic banks (images share background structure across classes).
BACKGROUND_FRACTION = 0.25

# Class prototypes are drawn from a cone around a shared domain center so
# that image features form one cone and text features another, as real
# embeddings do. Prototypes spread wider than per-sample noise (half the
# concentration) to keep classes separable.
PROTO_KAPPA_FRACTION = 0.5

_DTYPES = {"float32": "<f4", "int32": "<i4"}


@dataclass(frozen=True)
class TensorInfo:
    file: str
    shape: tuple[int, ...]
    dtype: str


@dataclass(frozen=True)
class BankManifest:
    """Shape and file metadata for a feature bank."""

    version: int
    dim: int
    grid: tuple[int, int]
    num_classes: int
    shots: int
    num_test: int
    tensors: dict[str, TensorInfo]
    meta: dict = field(default_factory=dict)

    @property
    def grid_cells(self) -> int:
        return self.grid[0] * self.grid[1]

    def expected_shapes(self) -> dict[str, tuple[tuple[int, ...], str]]:
        n, k, d, m = self.num_classes, self.shots, self.dim, self.num_test
        hw = self.grid_cells
        shapes = {
            "train_global": ((n, k, d), "float32"),
            "train_local": ((n, k, hw, d), "float32"),
            "text": ((n, d), "float32"),
            "test_global": ((m, d), "float32"),
            "test_labels": ((m,), "int32"),
        }
        if "test_local" in self.tensors:
            shapes["test_local"] = ((m, hw, d), "float32")
        return shapes

    def validate(self) -> None:
        if self.version != BANK_VERSION:
            raise BankFormatError(f"unsupported bank version {self.version}")
        if self.dim < 2 or self.num_classes < 2 or self.shots < 1:
            raise BankFormatError(
                f"invalid sizes: dim={self.dim} classes={self.num_classes} "
                f"shots={self.shots}"
            )
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise BankFormatError(f"invalid grid {self.grid}")
        if self.num_test < 0:
            raise BankFormatError(f"invalid num_test {self.num_test}")
        expected = self.expected_shapes()
        missing = set(expected) - set(self.tensors)
        if missing:
            raise BankFormatError(f"manifest missing tensors: {sorted(missing)}")
        unknown = set(self.tensors) - set(expected)
        if unknown:
            raise BankFormatError(f"manifest has unknown tensors: {sorted(unknown)}")
        for name, (shape, dtype) in expected.items():
            info = self.tensors[name]
            if tuple(info.shape) != shape:
                raise BankFormatError(
                    f"tensor {name}: manifest shape {info.shape} != expected {shape}"
                )
            if info.dtype != dtype:
                raise BankFormatError(
                    f"tensor {name}: dtype {info.dtype} != expected {dtype}"
                )

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "dim": self.dim,
            "grid": list(self.grid),
            "num_classes": self.num_classes,
            "shots": self.shots,
            "num_test": self.num_test,
            "tensors": {
                name: {
                    "file": info.file,
                    "shape": list(info.shape),
                    "dtype": info.dtype,
                }
                for name, info in sorted(self.tensors.items())
            },
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "BankManifest":
        try:
            tensors = {
                name: TensorInfo(
                    file=entry["file"],
                    shape=tuple(int(v) for v in entry["shape"]),
                    dtype=entry["dtype"],
                )
                for name, entry in raw["tensors"].items()
            }
            return cls(
                version=int(raw["version"]),
                dim=int(raw["dim"]),
                grid=(int(raw["grid"][0]), int(raw["grid"][1])),
                num_classes=int(raw["num_classes"]),
                shots=int(raw["shots"]),
                num_test=int(raw["num_test"]),
                tensors=tensors,
                meta=raw.get("meta", {}),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BankFormatError(f"malformed manifest: {exc}") from exc

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def digest(self) -> int:
        """64-bit FNV-1a over the canonical manifest JSON; binds models to banks."""
        return fnv1a64(self.canonical_bytes())


def make_manifest(
    dim: int,
    grid: tuple[int, int],
    num_classes: int,
    shots: int,
    num_test: int,
    with_test_local: bool = False,
    meta: dict | None = None,
) -> BankManifest:
    """Manifest with canonical file names for every declared tensor."""
    names = ["train_global", "train_local", "text", "test_global", "test_labels"]
    if with_test_local:
        names.append("test_local")
    stub = BankManifest(
        version=BANK_VERSION,
        dim=dim,
        grid=grid,
        num_classes=num_classes,
        shots=shots,
        num_test=num_test,
        tensors={n: TensorInfo(f"{n}.bin", (), "") for n in names},
        meta=meta or {},
    )
    tensors = {
        name: TensorInfo(f"{name}.bin", shape, dtype)
        for name, (shape, dtype) in stub.expected_shapes().items()
    }
    return BankManifest(
        version=BANK_VERSION,
        dim=dim,
        grid=grid,
        num_classes=num_classes,
        shots=shots,
        num_test=num_test,
        tensors=tensors,
        meta=meta or {},
    )


@dataclass(frozen=True)
class FeatureBank:
    """In-memory bank; feature tensors are float32 with unit-norm rows."""

    manifest: BankManifest
    train_global: np.ndarray
    train_local: np.ndarray
    text: np.ndarray
    test_global: np.ndarray
    test_labels: np.ndarray
    test_local: np.ndarray | None = None

    def digest(self) -> int:
        return self.manifest.digest()

    def _arrays(self) -> dict[str, np.ndarray]:
        out = {
            "train_global": self.train_global,
            "train_local": self.train_local,
            "text": self.text,
            "test_global": self.test_global,
            "test_labels": self.test_labels,
        }
        if self.test_local is not None:
            out["test_local"] = self.test_local
        return out

    def validate(self) -> None:
        self.manifest.validate()
        expected = self.manifest.expected_shapes()
        arrays = self._arrays()
        if set(arrays) != set(expected):
            raise BankFormatError(
                f"bank tensors {sorted(arrays)} != manifest {sorted(expected)}"
            )
        for name, arr in arrays.items():
            shape, _ = expected[name]
            if arr.shape != shape:
                raise BankFormatError(
                    f"tensor {name}: shape {arr.shape} != manifest {shape}"
                )
            ensure_finite(arr, f"tensor {name}")
        labels = self.test_labels
        if labels.size and (labels.min() < 0 or labels.max() >= self.manifest.num_classes):
            raise BankFormatError("test_labels outside [0, num_classes)")
        for name, arr in arrays.items():
            if name == "test_labels":
                continue
            norms = np.linalg.norm(
                arr.reshape(-1, self.manifest.dim).astype(np.float64), axis=1
            )
            if norms.size and np.max(np.abs(norms - 1.0)) > 1e-5:
                raise BankFormatError(f"tensor {name}: rows are not unit-normalized")


def load_bank(path: str | Path) -> FeatureBank:
    """Load and validate a bank directory, normalizing feature rows."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BankFormatError(f"missing manifest: {manifest_path}")
    try:
        raw = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"manifest is not valid JSON: {exc}") from exc
    manifest = BankManifest.from_dict(raw)
    manifest.validate()

    arrays: dict[str, np.ndarray] = {}
    for name, (shape, dtype) in manifest.expected_shapes().items():
        info = manifest.tensors[name]
        file_path = root / info.file
        if not file_path.is_file():
            raise BankFormatError(f"missing tensor file: {file_path}")
        data = file_path.read_bytes()
        expected_size = int(np.prod(shape)) * 4
        if len(data) != expected_size:
            raise BankFormatError(
                f"tensor {name}: file holds {len(data)} bytes, "
                f"shape {shape} needs {expected_size}"
            )
        arr = np.frombuffer(data, dtype=_DTYPES[dtype]).reshape(shape)
        arr = arr.astype(np.float32 if dtype == "float32" else np.int32)
        if dtype == "float32":
            if not np.all(np.isfinite(arr)):
                raise BankFormatError(f"tensor {name}: non-finite value")
            arr = unit_rows(arr, f"tensor {name}")
        arrays[name] = arr

    bank = FeatureBank(
        manifest=manifest,
        train_global=arrays["train_global"],
        train_local=arrays["train_local"],
        text=arrays["text"],
        test_global=arrays["test_global"],
        test_labels=arrays["test_labels"],
        test_local=arrays.get("test_local"),
    )
    bank.validate()
    return bank


def save_bank(bank: FeatureBank, path: str | Path) -> None:
    """Write a bank directory; load_bank(save_bank(b)) round-trips bitwise."""
    bank.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for name, arr in bank._arrays().items():
        info = bank.manifest.tensors[name]
        (root / info.file).write_bytes(
            np.ascontiguousarray(arr).astype(_DTYPES[info.dtype]).tobytes()
        )
    (root / "manifest.json").write_text(
        json.dumps(bank.manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    )


def _rotate_toward(p: np.ndarray, axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rotate unit vector p by angle_rad within the plane spanned by p and axis."""
    perp = axis - (axis @ p) * p
    norm = np.linalg.norm(perp)
    if norm < 1e-9:
        # axis parallel to p: rotate within the plane of p and a basis vector
        j = int(np.argmin(np.abs(p)))
        perp = np.zeros_like(p)
        perp[j] = 1.0
        perp -= (perp @ p) * p
        norm = np.linalg.norm(perp)
    perp /= norm
    return math.cos(angle_rad) * p + math.sin(angle_rad) * perp


def synth_bank(
    num_classes: int,
    shots: int,
    num_test: int,
    dim: int,
    grid_h: int,
    grid_w: int,
    gap_angle_deg: float,
    noise_kappa: float,
    seed: int,
) -> FeatureBank:
    """Generate a synthetic bank with a controllable injected modality gap.

    Class prototypes are drawn from a cone around a shared domain center,
    so all image features live in one region of the sphere. Image features
    (globals and most local cells) are vMF samples around their class
    prototype, while a fixed fraction of local cells cluster near one
    clutter direction shared by all classes. The text feature of each
    class is drawn around the prototype rotated by ``gap_angle_deg``
    toward a gap axis shared by all classes, which reproduces the
    two-cone geometry of real vision/language embeddings. Deterministic
    for a fixed seed.
    """
    if num_classes < 2 or shots < 1 or num_test < 1 or dim < 2:
        raise ValueError(
            f"invalid sizes: classes={num_classes} shots={shots} "
            f"test={num_test} dim={dim}"
        )
    if grid_h < 1 or grid_w < 1:
        raise ValueError(f"invalid grid {grid_h} x {grid_w}")
    if not 0.0 <= gap_angle_deg < 180.0:
        raise ValueError(f"gap_angle must be in [0, 180), got {gap_angle_deg}")
    if noise_kappa <= 0:
        raise ValueError(f"noise_kappa must be > 0, got {noise_kappa}")

    rng = np.random.default_rng(seed)
    hw = grid_h * grid_w
    angle = math.radians(gap_angle_deg)

    center = rng.standard_normal(dim)
    center /= np.linalg.norm(center)
    protos = sample_vmf_rng(center, PROTO_KAPPA_FRACTION * noise_kappa, num_classes, rng)
    gap_axis = rng.standard_normal(dim)
    gap_axis /= np.linalg.norm(gap_axis)
    clutter = rng.standard_normal(dim)
    clutter /= np.linalg.norm(clutter)

    text = np.empty((num_classes, dim))
    for i in range(num_classes):
        text_proto = _rotate_toward(protos[i], gap_axis, angle)
        text[i] = sample_vmf_rng(text_proto, noise_kappa, 1, rng)[0]

    n_bg = int(round(BACKGROUND_FRACTION * hw))
    train_global = np.empty((num_classes, shots, dim))
    train_local = np.empty((num_classes, shots, hw, dim))
    for i in range(num_classes):
        for j in range(shots):
            train_global[i, j] = sample_vmf_rng(protos[i], noise_kappa, 1, rng)[0]
            cells = sample_vmf_rng(protos[i], noise_kappa, hw, rng)
            if n_bg:
                bg_at = rng.choice(hw, size=n_bg, replace=False)
                cells[bg_at] = sample_vmf_rng(clutter, noise_kappa, n_bg, rng)
            train_local[i, j] = cells

    test_labels = (np.arange(num_test) % num_classes).astype(np.int32)
    test_global = np.empty((num_test, dim))
    for m in range(num_test):
        test_global[m] = sample_vmf_rng(protos[test_labels[m]], noise_kappa, 1, rng)[0]

    manifest = make_manifest(
        dim=dim,
        grid=(grid_h, grid_w),
        num_classes=num_classes,
        shots=shots,
        num_test=num_test,
        meta={
            "generator": "spalign.synth",
            "gap_angle_deg": float(gap_angle_deg),
            "noise_kappa": float(noise_kappa),
            "seed": int(seed),
        },
    )
    return FeatureBank(
        manifest=manifest,
        train_global=train_global.astype(np.float32),
        train_local=train_local.astype(np.float32),
        text=text.astype(np.float32),
        test_global=test_global.astype(np.float32),
        test_labels=test_labels,
    )
