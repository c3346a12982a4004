"""Multiband raster I/O, crown coordinate lists, and patch extraction.

The on-disk raster format ("MBR1") is a little-endian header followed by
raw float32 samples:

    offset 0   magic  b"MBR1"
    offset 4   u32    version (1)
    offset 8   u32    width
    offset 12  u32    height
    offset 16  u32    bands
    offset 20  u32    reserved (0)
    offset 24  8 bytes reserved padding (0), payload starts at 32
    offset 32  float32 * bands*height*width, band-sequential, row-major

Crown lists are header-free CSV lines ``x,y`` or ``x,y,label`` with integer
fields, LF-terminated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    BadRow,
    EmptyRaster,
    InvalidRaster,
    IoFailure,
    LabelOutOfRange,
    NonFiniteValue,
    TruncatedFile,
    UnsupportedVersion,
    WindowOutOfBounds,
    ZeroMax,
)

MAGIC = b"MBR1"
HEADER_SIZE = 32
_HEADER = struct.Struct("<4s5I8x")

MODEL_BANDS = 8  # all models consume exactly the first eight bands
NUM_CLASSES = 4


@dataclass(frozen=True)
class RasterImage:
    """A width*height*bands grid of finite, non-negative intensities.

    ``data`` is float32 with shape (bands, height, width), matching the
    band-sequential file layout.
    """

    width: int
    height: int
    bands: int
    data: np.ndarray

    def __post_init__(self):
        if self.bands < 1:
            raise EmptyRaster("raster must have at least one band")
        if self.width < 1 or self.height < 1:
            raise InvalidRaster("raster dimensions must be positive")
        expected = (self.bands, self.height, self.width)
        if self.data.shape != expected:
            raise InvalidRaster(
                f"data shape {self.data.shape} does not match header {expected}"
            )
        if not np.isfinite(self.data).all():
            raise InvalidRaster("raster contains non-finite values")
        if (self.data < 0).any():
            raise InvalidRaster("raster contains negative intensities")

    @classmethod
    def from_array(cls, data: np.ndarray) -> "RasterImage":
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 3:
            raise InvalidRaster("expected a (bands, height, width) array")
        bands, height, width = data.shape
        return cls(width=width, height=height, bands=bands, data=data)


@dataclass(frozen=True)
class CrownRecord:
    """Pixel location of one tree crown, optionally with a class label."""

    x: int
    y: int
    label: int | None = None

    def in_bounds(self, raster: RasterImage) -> bool:
        return 0 <= self.x < raster.width and 0 <= self.y < raster.height


@dataclass(frozen=True)
class Patch:
    """One crown's window: an (8, s, s) tensor plus optional metadata.

    ``coords`` are the crown's (x/width, y/height) position in [0, 1];
    ``label`` is a class id in 0..3 when known.
    """

    size: int
    tensor: np.ndarray
    coords: tuple[float, float] | None = None
    label: int | None = None

    def __post_init__(self):
        if self.tensor.shape != (MODEL_BANDS, self.size, self.size):
            raise InvalidRaster(
                f"patch tensor shape {self.tensor.shape} != "
                f"({MODEL_BANDS}, {self.size}, {self.size})"
            )

    def with_tensor(self, tensor: np.ndarray) -> "Patch":
        return Patch(size=self.size, tensor=tensor, coords=self.coords, label=self.label)


def read_raster(path) -> RasterImage:
    """Read an MBR1 file; errors carry the byte offset of the fault."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(raw) < HEADER_SIZE:
        raise TruncatedFile("header incomplete", offset=len(raw))
    magic, version, width, height, bands, reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}", offset=0)
    if version != 1:
        raise UnsupportedVersion(f"unsupported version {version}", offset=4)
    if reserved != 0:
        raise UnsupportedVersion("reserved field must be zero", offset=20)
    if bands < 1:
        raise EmptyRaster("file declares zero bands")

    count = bands * height * width
    expected_size = HEADER_SIZE + 4 * count
    if len(raw) < expected_size:
        raise TruncatedFile(
            f"payload ends early, expected {expected_size} bytes", offset=len(raw)
        )
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=HEADER_SIZE)
    bad = ~np.isfinite(values)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise NonFiniteValue(
            f"non-finite sample at flat index {first}", offset=HEADER_SIZE + 4 * first
        )
    data = values.reshape(bands, height, width).copy()
    if (data < 0).any():
        first = int(np.flatnonzero((data < 0).ravel())[0])
        raise NonFiniteValue(
            f"negative intensity at flat index {first}", offset=HEADER_SIZE + 4 * first
        )
    return RasterImage(width=width, height=height, bands=bands, data=data)


def write_raster(raster: RasterImage, path) -> None:
    """Write ``raster`` so that :func:`read_raster` round-trips bit-exactly."""
    header = _HEADER.pack(MAGIC, 1, raster.width, raster.height, raster.bands, 0)
    payload = np.ascontiguousarray(raster.data, dtype="<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_crowns(path) -> list[CrownRecord]:
    """Parse a crown CSV; rows are ``x,y`` or ``x,y,label``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    crowns = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) not in (2, 3):
            raise BadRow(lineno, f"expected 2 or 3 fields, got {len(fields)}")
        try:
            x, y = int(fields[0]), int(fields[1])
        except ValueError:
            raise BadRow(lineno, f"non-integer coordinate in {line!r}") from None
        label = None
        if len(fields) == 3:
            try:
                label = int(fields[2])
            except ValueError:
                raise BadRow(lineno, f"non-integer label in {line!r}") from None
            if not 0 <= label < NUM_CLASSES:
                raise LabelOutOfRange(lineno, label)
        if x < 0 or y < 0:
            raise BadRow(lineno, "negative coordinate")
        crowns.append(CrownRecord(x=x, y=y, label=label))
    return crowns


def write_crowns(crowns, path) -> None:
    lines = []
    for c in crowns:
        if c.label is None:
            lines.append(f"{c.x},{c.y}")
        else:
            lines.append(f"{c.x},{c.y},{c.label}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def extract_patch(raster: RasterImage, crown: CrownRecord, s: int) -> Patch:
    """Cut the s*s window around ``crown`` over the first eight bands.

    The crown pixel sits at tensor index (s/2, s/2); the window must lie
    fully inside the raster, otherwise :class:`WindowOutOfBounds` is raised
    (callers usually skip such crowns).
    """
    if s < 2 or s % 2 != 0:
        raise InvalidRaster(f"patch size must be even and >= 2, got {s}")
    if raster.bands < MODEL_BANDS:
        raise InvalidRaster(f"raster has {raster.bands} bands, need {MODEL_BANDS}")
    half = s // 2
    row0, col0 = crown.y - half, crown.x - half
    if row0 < 0 or col0 < 0 or row0 + s > raster.height or col0 + s > raster.width:
        raise WindowOutOfBounds(
            f"{s}x{s} window at crown ({crown.x},{crown.y}) leaves the raster"
        )
    window = raster.data[:MODEL_BANDS, row0:row0 + s, col0:col0 + s]
    coords = (crown.x / raster.width, crown.y / raster.height)
    return Patch(
        size=s,
        tensor=window.astype(np.float64),
        coords=coords,
        label=crown.label,
    )


def raster_max(raster: RasterImage) -> float:
    """Global maximum over the first eight bands (the normalization divisor)."""
    value = float(raster.data[:MODEL_BANDS].max())
    if value <= 0:
        raise ZeroMax("training raster maximum is not positive")
    return value


def normalize_patches(patches, max_value: float) -> list[Patch]:
    """Divide every tensor by ``max_value`` and clamp into [0, 1].

    ``max_value`` must be the training raster's maximum; entries from other
    rasters that exceed it are clamped to 1.
    """
    if max_value <= 0:
        raise ZeroMax(f"max_value must be positive, got {max_value}")
    out = []
    for p in patches:
        scaled = np.clip(p.tensor / max_value, 0.0, 1.0)
        out.append(p.with_tensor(scaled))
    return out
