"""Voxel-grid containers and the SEGV on-disk volume format.

All grids are dense 3D scalar fields with physical spacing in mm. Flat
data is stored x-fastest: index = x + nx*(y + ny*z).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class VolumeError(Exception):
    """Base class for volume construction and IO failures."""


class DimensionMismatchError(VolumeError):
    pass


class NonFiniteDataError(VolumeError):
    pass


class NonPositiveSpacingError(VolumeError):
    pass


class ThresholdOutOfRangeError(VolumeError):
    pass


class BadMagicError(VolumeError):
    pass


class UnsupportedVersionError(VolumeError):
    pass


class TruncatedPayloadError(VolumeError):
    pass


def _check_geometry(dims, spacing):
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(s) for s in spacing)
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise DimensionMismatchError(f"dims must be three positive ints, got {dims}")
    if len(spacing) != 3 or any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise NonPositiveSpacingError(f"spacing must be three positive reals, got {spacing}")
    return dims, spacing


@dataclass(frozen=True)
class VoxelGrid:
    """Dense 3D scalar field. data is flat float64, x-fastest order."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims, spacing = _check_geometry(self.dims, self.spacing)
        data = np.array(self.data, dtype=np.float64).ravel()
        if data.size != dims[0] * dims[1] * dims[2]:
            raise DimensionMismatchError(
                f"data length {data.size} != product of dims {dims}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteDataError("grid data contains NaN or inf")
        data.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "data", data)

    @property
    def n_voxels(self) -> int:
        return self.data.size

    def volume(self) -> np.ndarray:
        """Return the data reshaped to (z, y, x) so that x varies fastest."""
        nx, ny, nz = self.dims
        return self.data.reshape(nz, ny, nx)


@dataclass(frozen=True)
class BinaryMask(VoxelGrid):
    """Voxel grid restricted to {0, 1} labels."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all((self.data == 0) | (self.data == 1)):
            raise NonFiniteDataError("mask data must contain only 0 and 1")

    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ProbGrid(VoxelGrid):
    """Voxel grid of probabilities in [0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise NonFiniteDataError("probabilities must lie in [0, 1]")


def new_grid(dims, spacing, data) -> VoxelGrid:
    """Construct a VoxelGrid, copying data."""
    return VoxelGrid(dims=tuple(dims), spacing=tuple(spacing), data=data)


def new_mask(dims, spacing, data) -> BinaryMask:
    return BinaryMask(dims=tuple(dims), spacing=tuple(spacing), data=data)


def new_prob(dims, spacing, data) -> ProbGrid:
    return ProbGrid(dims=tuple(dims), spacing=tuple(spacing), data=data)


def binarize(p: ProbGrid, threshold: float = 0.5) -> BinaryMask:
    """Threshold a probability grid; voxel = 1 iff p >= threshold."""
    if not (0.0 < threshold < 1.0):
        raise ThresholdOutOfRangeError(f"threshold must be in (0,1), got {threshold}")
    labels = (p.data >= threshold).astype(np.float64)
    return BinaryMask(dims=p.dims, spacing=p.spacing, data=labels)


# SEGV format: magic "SEGV", version u8 = 1, dtype u8 (0 = f32, 1 = u8 label),
# 2 reserved bytes, dims 3*u32, spacing 3*f32, then raw payload x-fastest.
# All little-endian.
_MAGIC = b"SEGV"
_VERSION = 1
_HEADER = struct.Struct("<4sBBxx3I3f")


def write_volume(grid: VoxelGrid, path) -> None:
    """Write a grid (dtype f32) or mask (dtype u8) to a SEGV file."""
    is_mask = isinstance(grid, BinaryMask)
    dtype_code = 1 if is_mask else 0
    payload = grid.data.astype(np.uint8 if is_mask else "<f4").tobytes()
    header = _HEADER.pack(_MAGIC, _VERSION, dtype_code, *grid.dims, *grid.spacing)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_volume(path) -> VoxelGrid:
    """Read a SEGV file; returns BinaryMask for label payloads, else VoxelGrid."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than SEGV header")
    magic, version, dtype_code, nx, ny, nz, sx, sy, sz = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if dtype_code not in (0, 1):
        raise UnsupportedVersionError(f"{path}: unknown dtype code {dtype_code}")
    n = nx * ny * nz
    itemsize = 4 if dtype_code == 0 else 1
    payload = raw[_HEADER.size:]
    if len(payload) != n * itemsize:
        raise TruncatedPayloadError(
            f"{path}: expected {n * itemsize} payload bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4" if dtype_code == 0 else np.uint8)
    cls = VoxelGrid if dtype_code == 0 else BinaryMask
    return cls(dims=(nx, ny, nz), spacing=(sx, sy, sz), data=data)
