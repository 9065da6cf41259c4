"""Exception types shared across the package."""


class CrystalEvolveError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CrystalEvolveError):
    """Invalid configuration value or flag combination."""


# --- CIF parsing ---------------------------------------------------------

class CifParseError(CrystalEvolveError):
    """A CIF document could not be parsed into a structure."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class MissingTagError(CifParseError):
    pass


class EmptyAtomLoopError(CifParseError):
    pass


class UnknownElementError(CifParseError):
    pass


class MalformedNumberError(CifParseError):
    pass


# --- dataset manifests ----------------------------------------------------

class LineParseError(CrystalEvolveError):
    """A manifest line is not valid JSON or violates the entry schema."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"manifest line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


# --- structures and geometry ----------------------------------------------

class InvalidStructureError(CrystalEvolveError):
    """A structure violates its own invariants."""


class DegenerateCellError(CrystalEvolveError):
    """Cell angles admit no positive-volume lattice."""


class OutOfRangeError(CrystalEvolveError):
    """Atomic number outside the supported 1..100 table."""


class EdgelessGraphError(CrystalEvolveError):
    """At least one atom has no neighbor within the cutoff."""


# --- surrogate models -------------------------------------------------------

class ShapeMismatchError(CrystalEvolveError):
    """Graph feature widths do not match the model weights."""


class EmptyBatchError(CrystalEvolveError):
    pass


class EmptyDatasetError(CrystalEvolveError):
    pass


class DegenerateLabelsError(CrystalEvolveError):
    """All training labels are equal; the 0-1 normalization is undefined."""


class UnfittedScalerError(CrystalEvolveError):
    """predict_physical called before the target scaler was fit."""


class SchemaVersionMismatchError(CrystalEvolveError):
    """Checkpoint file has an unknown schema version or is corrupted."""


# --- fitness ----------------------------------------------------------------

class NonFiniteInputError(CrystalEvolveError):
    pass


# --- evolution ----------------------------------------------------------------

class PoolTooSmallError(CrystalEvolveError):
    pass


class SingleElementUniverseError(CrystalEvolveError):
    """Element replacement requested but no site has an alternative element."""


# --- run orchestration -------------------------------------------------------

class PartialCheckpointError(CrystalEvolveError):
    """Checkpoint file was truncated before its terminal marker."""


class RunError(CrystalEvolveError):
    """A pipeline phase failed; carries the cycle and phase tag."""

    def __init__(self, cycle: int, phase: str, cause: Exception):
        super().__init__(f"cycle {cycle}, phase {phase}: {cause}")
        self.cycle = cycle
        self.phase = phase
        self.__cause__ = cause
