"""Core data types: image channels, binary masks, reconstruction problems.

Coordinates throughout the package are ``(row, column)`` pairs indexing 2-D
arrays. Pixel values are stored as float64 in the nominal range [0, 255];
8-bit integer data is promoted losslessly on construction. Values may leave
the nominal range during reconstruction, quantization happens only on export.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


def _validated_plane(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(
            "bad_shape", f"{name} must be a 2-D array with positive dimensions"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("non_finite", f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Channel:
    """One 2-D scalar image plane. Immutable after construction."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _validated_plane(self.values, "channel"))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary validity plane: 1 marks available data, 0 marks a pixel to
    reconstruct. Immutable after construction."""

    flags: np.ndarray

    def __post_init__(self):
        arr = np.array(self.flags, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(
                "bad_shape", "mask must be a 2-D array with positive dimensions"
            )
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError("non_binary", "mask flags must all be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        object.__setattr__(self, "flags", arr)

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.flags.shape

    def valid_count(self) -> int:
        return int(self.flags.sum())


@dataclass(frozen=True, eq=False)
class ReconstructionProblem:
    """A distorted channel, its mask, and the ordered reference channels.

    All planes must share one shape, at least one reference is required, and
    the mask must keep at least one valid pixel (a fully masked channel is
    underdetermined and rejected outright).
    """

    distorted: Channel
    mask: Mask
    references: tuple[Channel, ...]

    def __post_init__(self):
        refs = tuple(self.references)
        object.__setattr__(self, "references", refs)
        if len(refs) == 0:
            raise ValidationError(
                "empty_references", "at least one reference channel is required"
            )
        shape = self.distorted.shape
        if self.mask.shape != shape:
            raise ValidationError(
                "dimension_mismatch",
                f"mask shape {self.mask.shape} does not match channel shape {shape}",
            )
        for i, ref in enumerate(refs):
            if ref.shape != shape:
                raise ValidationError(
                    "dimension_mismatch",
                    f"reference {i} shape {ref.shape} does not match channel shape {shape}",
                )
        if self.mask.valid_count() == 0:
            raise ValidationError(
                "fully_masked", "mask has no valid pixels; reconstruction is underdetermined"
            )

    @property
    def num_references(self) -> int:
        return len(self.references)

    @property
    def shape(self) -> tuple[int, int]:
        return self.distorted.shape


def apply_mask(clean: Channel, mask: Mask) -> Channel:
    """Element-wise product of a channel with a binary mask.

    Masked pixels come out exactly 0; valid pixels are untouched.
    """
    if clean.shape != mask.shape:
        raise ValidationError(
            "dimension_mismatch",
            f"channel shape {clean.shape} does not match mask shape {mask.shape}",
        )
    return Channel(clean.values * mask.flags)


def new_problem(
    distorted: Channel, mask: Mask, references: Sequence[Channel]
) -> ReconstructionProblem:
    """Validate and assemble a reconstruction problem."""
    return ReconstructionProblem(distorted, mask, tuple(references))
