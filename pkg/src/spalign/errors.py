"""Exception and warning types shared across the package."""


class SpalignError(Exception):
    """Base class for all spalign errors."""


class BankFormatError(SpalignError):
    """A feature bank directory or manifest is malformed or inconsistent."""


class ZeroNormError(SpalignError):
    """A feature row has (numerically) zero norm and cannot be normalized."""


class ModelFormatError(SpalignError):
    """A serialized subspace or model file is malformed."""


class ProvenanceError(SpalignError):
    """Model and bank provenance digests do not match."""

    def __init__(self, model_digest: int, bank_digest: int):
        super().__init__(
            f"model was built from a different bank: "
            f"model digest {model_digest:#018x}, bank digest {bank_digest:#018x}"
        )
        self.model_digest = model_digest
        self.bank_digest = bank_digest


class DegenerateProjectionError(SpalignError):
    """A projected feature is numerically zero; the subspace carries no
    component of the input."""


class VmfFitError(SpalignError):
    """Directional statistics cannot be estimated from the given samples."""


class RankClampWarning(UserWarning):
    """The requested number of subspace components exceeds the numerical
    rank of the decomposed matrix and was clamped."""
