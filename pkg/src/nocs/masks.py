"""Procedural test masks: rectangles, bars, mixtures, and random unmasking.

Every pattern is a pure function of its spec. Randomness comes from numpy's
PCG64 generator seeded through SeedSequence, so the same spec reproduces the
same mask bit for bit on any platform; the generator identifier is recorded
in exported mask files so masks stay portable.

Patterns (0 marks a pixel to reconstruct, 1 marks valid data):

  rect_loss      uniformly placed solid rectangles knocked out of a valid
                 frame. Placement avoids touching earlier holes while it can,
                 so holes stay rectangular at moderate densities.
  hbar_loss      full-width horizontal bars knocked out.
  mixed_loss     a blend of rectangles, horizontal bar segments, and vertical
                 bar segments.
  random_unmask  starts fully masked; random rectangles restore validity
                 until the masked share drops to the requested density.
  four_quadrant  2x2 layout combining the four patterns above, one per
                 quadrant: rect_loss top-left, hbar_loss top-right,
                 mixed_loss bottom-left, random_unmask bottom-right.

All patterns stop once the masked fraction of their region reaches the
requested density, so the overall masked share tracks ``density`` up to the
granularity of a single element.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .errors import InputError, ValidationError
from .image_model import Mask

PATTERNS = ("rect_loss", "hbar_loss", "mixed_loss", "random_unmask", "four_quadrant")

# Recorded in exported mask metadata; bump when the placement algorithm changes.
GENERATOR_ID = "nocs-mask-pcg64-v1"

_MASK_BYTE = 0
_VALID_BYTE = 255


def default_element_size(width: int, height: int) -> int:
    """Element size of 12 at 1200 pixels, scaled to the smaller image side."""
    return max(1, round(12 * min(width, height) / 1200))


@dataclass(frozen=True)
class MaskSpec:
    """Parameters of one generated mask.

    density is the requested masked-pixel fraction; element_size controls
    rectangle/bar thickness and defaults to a resolution-scaled value.
    """

    width: int
    height: int
    pattern: str = "four_quadrant"
    density: float = 0.15
    element_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValidationError(
                "bad_mask_spec", f"unknown pattern {self.pattern!r}; choose from {PATTERNS}"
            )
        min_dim = 2 if self.pattern == "four_quadrant" else 1
        if self.width < min_dim or self.height < min_dim:
            raise ValidationError(
                "bad_mask_spec",
                f"pattern {self.pattern!r} needs dimensions of at least {min_dim}",
            )
        if not (0.0 < self.density < 1.0):
            raise ValidationError("bad_mask_spec", "density must lie strictly in (0, 1)")
        if self.element_size is not None and self.element_size < 1:
            raise ValidationError("bad_mask_spec", "element_size must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("bad_mask_spec", "seed must be an unsigned 64-bit integer")

    def effective_element_size(self) -> int:
        if self.element_size is not None:
            return self.element_size
        return default_element_size(self.width, self.height)


def _region_is_clear(flags: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> bool:
    # Check a one-pixel halo so separate stamps never merge into one blob.
    h, w = flags.shape
    return bool(
        (flags[max(0, r0 - 1) : min(h, r1 + 1), max(0, c0 - 1) : min(w, c1 + 1)] == 1).all()
    )


def _stamp_elements(flags, rng, density, draw_element, approx_area):
    """Knock elements out of a valid region until the density target is met.

    First pass keeps elements separated (components stay element-shaped);
    if separation makes the target unreachable, a second pass allows
    overlap. Both passes are attempt-bounded, so generation always halts.
    """
    h, w = flags.shape
    target = density * h * w
    masked = 0
    budget = 200 * int(np.ceil(target / max(1, approx_area))) + 2000
    for separated in (True, False):
        attempts = 0
        while masked < target and attempts < budget:
            attempts += 1
            r0, r1, c0, c1 = draw_element(rng, h, w)
            if separated and not _region_is_clear(flags, r0, r1, c0, c1):
                continue
            region = flags[r0:r1, c0:c1]
            masked += int((region == 1).sum())
            region[:] = 0
        if masked >= target:
            break


def _rect_sides(rng, element):
    lo = max(1, element // 2)
    hi = max(lo, (3 * element) // 2)
    return int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))


def _draw_rect(rng, h, w, element):
    rh, rw = _rect_sides(rng, element)
    rh, rw = min(rh, h), min(rw, w)
    r0 = int(rng.integers(0, h - rh + 1))
    c0 = int(rng.integers(0, w - rw + 1))
    return r0, r0 + rh, c0, c0 + rw


def _draw_hbar(rng, h, w, element):
    thickness = min(max(1, int(rng.integers(max(1, element // 2), (3 * element) // 2 + 1))), h)
    r0 = int(rng.integers(0, h - thickness + 1))
    return r0, r0 + thickness, 0, w


def _draw_segment(rng, h, w, element, horizontal):
    lo = max(1, element // 2)
    thickness = int(rng.integers(lo, (3 * element) // 2 + 1))
    length = int(rng.integers(2 * element, 6 * element + 1))
    if horizontal:
        thickness = min(thickness, h)
        length = min(length, w)
        r0 = int(rng.integers(0, h - thickness + 1))
        c0 = int(rng.integers(0, w - length + 1))
        return r0, r0 + thickness, c0, c0 + length
    thickness = min(thickness, w)
    length = min(length, h)
    r0 = int(rng.integers(0, h - length + 1))
    c0 = int(rng.integers(0, w - thickness + 1))
    return r0, r0 + length, c0, c0 + thickness


def _stamp_rect_loss(flags, rng, density, element):
    _stamp_elements(
        flags, rng, density, lambda g, h, w: _draw_rect(g, h, w, element), element * element
    )


def _stamp_hbar_loss(flags, rng, density, element):
    _stamp_elements(
        flags, rng, density, lambda g, h, w: _draw_hbar(g, h, w, element),
        element * flags.shape[1],
    )


def _stamp_mixed_loss(flags, rng, density, element):
    def draw(g, h, w):
        kind = int(g.integers(0, 3))
        if kind == 0:
            return _draw_rect(g, h, w, element)
        return _draw_segment(g, h, w, element, horizontal=(kind == 1))

    _stamp_elements(flags, rng, density, draw, 3 * element * element)


def _stamp_random_unmask(flags, rng, density, element):
    """Start fully masked and punch valid rectangles until only ``density``
    of the region stays masked. Overlap is expected here."""
    flags[:] = 0
    h, w = flags.shape
    lo = max(1, 2 * element)
    hi = max(lo, 6 * element)
    target_masked = density * h * w
    masked = h * w
    attempts = 0
    budget = 500 * (h * w) // (lo * lo) + 1000
    while masked > target_masked and attempts < budget:
        attempts += 1
        rh = min(int(rng.integers(lo, hi + 1)), h)
        rw = min(int(rng.integers(lo, hi + 1)), w)
        r0 = int(rng.integers(0, h - rh + 1))
        c0 = int(rng.integers(0, w - rw + 1))
        region = flags[r0 : r0 + rh, c0 : c0 + rw]
        masked -= int((region == 0).sum())
        region[:] = 1


_STAMPERS = {
    "rect_loss": _stamp_rect_loss,
    "hbar_loss": _stamp_hbar_loss,
    "mixed_loss": _stamp_mixed_loss,
    "random_unmask": _stamp_random_unmask,
}


def generate_mask(spec: MaskSpec) -> Mask:
    """Generate the mask described by ``spec``. Same spec, same mask."""
    flags = np.ones((spec.height, spec.width), dtype=np.uint8)
    element = spec.effective_element_size()
    root = np.random.SeedSequence(spec.seed)
    if spec.pattern == "four_quadrant":
        half_h, half_w = spec.height // 2, spec.width // 2
        quadrants = (
            ("rect_loss", flags[:half_h, :half_w]),
            ("hbar_loss", flags[:half_h, half_w:]),
            ("mixed_loss", flags[half_h:, :half_w]),
            ("random_unmask", flags[half_h:, half_w:]),
        )
        for child, (name, view) in zip(root.spawn(4), quadrants):
            _STAMPERS[name](view, np.random.Generator(np.random.PCG64(child)), spec.density, element)
    else:
        rng = np.random.Generator(np.random.PCG64(root))
        _STAMPERS[spec.pattern](flags, rng, spec.density, element)
    if not flags.any():
        raise ValidationError(
            "fully_masked", "generated mask has no valid pixels; lower the density"
        )
    return Mask(flags)


def save_mask(mask: Mask, path, spec: MaskSpec | None = None) -> None:
    """Write a mask as an 8-bit single-channel image: 0 masked, 255 valid.

    PNG output records the generator identifier (and the spec, when given)
    as text metadata.
    """
    path = Path(path)
    data = np.where(mask.flags == 1, _VALID_BYTE, _MASK_BYTE).astype(np.uint8)
    image = Image.fromarray(data, mode="L")
    if path.suffix.lower() == ".png":
        info = PngInfo()
        info.add_text("mask-generator", GENERATOR_ID)
        if spec is not None:
            info.add_text("mask-pattern", spec.pattern)
            info.add_text("mask-density", repr(spec.density))
            info.add_text("mask-element-size", str(spec.effective_element_size()))
            info.add_text("mask-seed", str(spec.seed))
        image.save(path, pnginfo=info)
    else:
        image.save(path)


def load_mask(path) -> Mask:
    """Read a mask written by save_mask. Only bytes 0 and 255 are accepted."""
    path = Path(path)
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                raise InputError(f"{path}: mask files must be 8-bit single-channel")
            data = np.asarray(image)
    except FileNotFoundError:
        raise
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"{path}: cannot read mask file ({exc})") from exc
    if not np.isin(data, (_MASK_BYTE, _VALID_BYTE)).all():
        raise ValidationError(
            "bad_mask_file", f"{path}: mask bytes must be exactly 0 or 255"
        )
    return Mask((data == _VALID_BYTE).astype(np.uint8))
