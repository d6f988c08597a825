import json

import numpy as np
import pytest
from PIL import Image

from nocs.errors import InputError
from nocs.io import list_images, load_planes, quantize, save_planes


def test_quantize_rounds_half_to_even_and_clamps():
    values = np.array([2.5, 3.5, -1.0, 300.0, 0.4999, 254.5])
    assert np.array_equal(quantize(values), [2, 4, 0, 255, 0, 254])
    assert quantize(values).dtype == np.uint8


def test_rgb_png_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    planes = rng.integers(0, 256, (3, 20, 24), dtype=np.uint8)
    path = tmp_path / "image.png"
    save_planes(path, planes, "rgb")
    loaded, kind = load_planes(path)
    assert kind == "rgb"
    assert np.array_equal(loaded, planes)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    planes = rng.integers(0, 256, (3, 8, 8), dtype=np.uint8)
    path = tmp_path / "image.ppm"
    save_planes(path, planes, "rgb")
    loaded, kind = load_planes(path)
    assert kind == "rgb"
    assert np.array_equal(loaded, planes)


def test_gray_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    planes = rng.integers(0, 256, (1, 10, 12), dtype=np.uint8)
    path = tmp_path / "image.png"
    save_planes(path, planes, "gray")
    loaded, kind = load_planes(path)
    assert kind == "gray"
    assert np.array_equal(loaded, planes)


def test_manifest_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    planes = rng.integers(0, 256, (4, 9, 9), dtype=np.uint8)
    path = tmp_path / "stack.json"
    save_planes(path, planes, "manifest")
    loaded, kind = load_planes(path)
    assert kind == "manifest"
    assert np.array_equal(loaded, planes)
    manifest = json.loads(path.read_text())
    assert len(manifest["bands"]) == 4


def test_manifest_rejects_mismatched_bands(tmp_path):
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "a.png")
    Image.fromarray(np.zeros((5, 4), dtype=np.uint8)).save(tmp_path / "b.png")
    path = tmp_path / "stack.json"
    path.write_text(json.dumps({"bands": ["a.png", "b.png"]}))
    with pytest.raises(InputError):
        load_planes(path)


def test_manifest_requires_band_list(tmp_path):
    path = tmp_path / "stack.json"
    path.write_text(json.dumps({"bands": []}))
    with pytest.raises(InputError):
        load_planes(path)


def test_load_rejects_high_bit_depth(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
    with pytest.raises(InputError):
        load_planes(path)


def test_load_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_planes(tmp_path / "absent.png")


def test_list_images_sorted_and_filtered(tmp_path):
    for name in ("b.png", "a.png", "notes.txt", "c.ppm"):
        (tmp_path / name).write_bytes(b"")
    found = list_images(tmp_path)
    assert [p.name for p in found] == ["a.png", "b.png", "c.ppm"]


def test_list_images_empty_directory(tmp_path):
    with pytest.raises(InputError):
        list_images(tmp_path)
