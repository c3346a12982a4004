"""Exception types shared across the package.

Every error raised on a documented failure path derives from
:class:`CrownpipeError` so callers (notably the CLI) can map the whole
family to a data/validation exit code.
"""


class CrownpipeError(Exception):
    """Base class for all crownpipe errors."""


# --- raster file format ---------------------------------------------------

class RasterFormatError(CrownpipeError):
    """Malformed raster file; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(RasterFormatError):
    pass


class UnsupportedVersion(RasterFormatError):
    pass


class TruncatedFile(RasterFormatError):
    pass


class NonFiniteValue(RasterFormatError):
    pass


class EmptyRaster(CrownpipeError):
    pass


class InvalidRaster(CrownpipeError):
    pass


class IoFailure(CrownpipeError):
    pass


# --- crown lists and patches ----------------------------------------------

class BadRow(CrownpipeError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LabelOutOfRange(CrownpipeError):
    def __init__(self, line: int, label: int):
        super().__init__(f"line {line}: label {label} outside 0..3")
        self.line = line
        self.label = label


class WindowOutOfBounds(CrownpipeError):
    pass


class ZeroMax(CrownpipeError):
    pass


# --- datasets ---------------------------------------------------------------

class DegenerateClass(CrownpipeError):
    pass


class EmptySet(CrownpipeError):
    pass


# --- neural network engine --------------------------------------------------

class ShapeMismatch(CrownpipeError):
    pass


class NoForwardState(CrownpipeError):
    pass


class EmptyLabels(CrownpipeError):
    pass


class EmptyData(CrownpipeError):
    pass


class InvalidConfig(CrownpipeError):
    pass


class BadCheckpoint(CrownpipeError):
    pass


# --- classifiers --------------------------------------------------------------

class SingleClass(CrownpipeError):
    pass


class NonFinite(CrownpipeError):
    pass


# --- metrics -------------------------------------------------------------------

class EmptyMatrix(CrownpipeError):
    pass


class LengthMismatch(CrownpipeError):
    pass


# --- synthetic data ----------------------------------------------------------

class PlacementFailure(CrownpipeError):
    pass
