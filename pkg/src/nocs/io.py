"""Image file plumbing for the CLI: PNG/PPM readers and writers, band
manifests for multi-channel stacks, and export quantization.

A band manifest is a JSON file of the form ``{"bands": ["b0.png", ...]}``
with one 8-bit grayscale file per spectral band, paths relative to the
manifest. Saving a manifest writes the band files next to it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


def quantize(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half to even, yielding uint8."""
    return np.rint(np.clip(values, 0.0, 255.0)).astype(np.uint8)


def _open_8bit(path: Path, allow_color: bool) -> np.ndarray:
    try:
        with Image.open(path) as image:
            if image.mode == "P":
                image = image.convert("RGB")
            if image.mode == "L":
                return np.asarray(image)
            if image.mode == "RGB" and allow_color:
                return np.asarray(image)
            raise InputError(
                f"{path}: unsupported mode {image.mode!r}; need 8-bit "
                + ("RGB or grayscale" if allow_color else "grayscale")
            )
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError) as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from exc


def load_planes(path) -> tuple[np.ndarray, str]:
    """Read an image or band manifest as a (C, H, W) uint8 stack.

    Returns the stack and its kind: "gray", "rgb", or "manifest".
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: cannot read band manifest ({exc})") from exc
        bands = manifest.get("bands") if isinstance(manifest, dict) else None
        if not isinstance(bands, list) or not bands:
            raise InputError(f"{path}: manifest must contain a non-empty 'bands' list")
        planes = []
        for name in bands:
            plane = _open_8bit(path.parent / name, allow_color=False)
            if planes and plane.shape != planes[0].shape:
                raise InputError(f"{path}: band {name!r} has mismatched dimensions")
            planes.append(plane)
        return np.stack(planes), "manifest"
    data = _open_8bit(path, allow_color=True)
    if data.ndim == 2:
        return data[None, :, :], "gray"
    return np.ascontiguousarray(data.transpose(2, 0, 1)), "rgb"


def save_planes(path, planes: np.ndarray, kind: str) -> None:
    """Write a (C, H, W) uint8 stack in the same layout it was loaded from."""
    path = Path(path)
    planes = np.asarray(planes, dtype=np.uint8)
    if kind == "manifest":
        names = [f"{path.stem}_band{i}.png" for i in range(planes.shape[0])]
        for name, plane in zip(names, planes):
            Image.fromarray(plane, mode="L").save(path.parent / name)
        path.write_text(
            json.dumps({"bands": names}, indent=2) + "\n", encoding="utf-8"
        )
        return
    if kind == "gray":
        if planes.shape[0] != 1:
            raise InputError("grayscale output needs exactly one plane")
        Image.fromarray(planes[0], mode="L").save(path)
        return
    if kind == "rgb":
        if planes.shape[0] != 3:
            raise InputError("RGB output needs exactly three planes")
        Image.fromarray(planes.transpose(1, 2, 0), mode="RGB").save(path)
        return
    raise InputError(f"unknown image kind {kind!r}")


def list_images(directory) -> list[Path]:
    """Image files directly inside ``directory``, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory}: not a directory")
    found = [
        entry
        for entry in sorted(directory.iterdir())
        if entry.is_file() and entry.suffix.lower() in IMAGE_SUFFIXES
    ]
    if not found:
        raise InputError(f"{directory}: contains no readable images")
    return found
