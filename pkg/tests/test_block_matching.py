import numpy as np
import pytest

from nocs import (
    Channel,
    NocsParams,
    ValidationError,
    block_distance,
    extract_block,
    match_blocks,
    match_blocks_many,
)


# --- independent oracles -------------------------------------------------

def clamped_block(values, center, size):
    """Brute-force block extraction with index clamping."""
    h, w = values.shape
    lo = (size - 1) // 2
    out = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            r = min(max(center[0] - lo + i, 0), h - 1)
            c = min(max(center[1] - lo + j, 0), w - 1)
            out[i, j] = values[r, c]
    return out


def distance_oracle(refs, x, y, size):
    """Nested-loop per-channel sum of Euclidean block-difference norms."""
    total = 0.0
    for ref in refs:
        diff = clamped_block(ref.values, x, size) - clamped_block(ref.values, y, size)
        ssd = 0.0
        for row in diff:
            for value in row:
                ssd += value * value
        total += np.sqrt(ssd)
    return total


def matches_oracle(refs, target, params):
    """Exhaustive sort of all in-bounds window candidates.

    The target is pinned to the front; the remaining slots hold the smallest
    distances with ties broken by row-major candidate order.
    """
    h, w = refs[0].shape
    r = params.search_radius
    coords, dists = [], []
    for row in range(target[0] - r, target[0] + r + 1):
        if not 0 <= row < h:
            continue
        for col in range(target[1] - r, target[1] + r + 1):
            if not 0 <= col < w:
                continue
            coords.append((row, col))
            dists.append(distance_oracle(refs, target, (row, col), params.block_size))
    order = sorted(
        range(len(coords)),
        key=lambda i: (coords[i] != tuple(target), dists[i], i),
    )[: params.stack_size]
    return np.array([coords[i] for i in order]), np.array([dists[i] for i in order])


def random_refs(seed, shape, count):
    rng = np.random.default_rng(seed)
    return [Channel(rng.uniform(0, 255, shape)) for _ in range(count)]


# --- parameter validation ------------------------------------------------

def test_params_defaults():
    params = NocsParams()
    assert (params.block_size, params.stack_size, params.search_radius) == (9, 44, 16)
    assert params.batch_fraction == 0.10


@pytest.mark.parametrize(
    "kwargs",
    [
        {"block_size": 0},
        {"stack_size": 1},
        {"search_radius": 0},
        {"search_radius": 1, "stack_size": 10},  # window 9 < 10
        {"batch_fraction": 0.0},
        {"batch_fraction": 1.5},
    ],
)
def test_params_rejects_bad_values(kwargs):
    with pytest.raises(ValidationError) as err:
        NocsParams(**kwargs)
    assert err.value.code == "bad_params"


# --- extract_block -------------------------------------------------------

def test_extract_block_constant_image():
    channel = Channel(np.full((12, 12), 7.0))
    block = extract_block(channel, (6, 6), 9)
    assert block.shape == (9, 9)
    assert np.array_equal(block, np.full((9, 9), 7.0))


def test_extract_block_corner_matches_clamped_oracle():
    ramp = Channel(np.arange(100, dtype=np.float64).reshape(10, 10))
    for center in [(0, 0), (0, 9), (9, 0), (9, 9), (1, 5)]:
        block = extract_block(ramp, center, 9)
        assert np.array_equal(block, clamped_block(ramp.values, center, 9))


def test_extract_block_size_one():
    channel = Channel(np.arange(16, dtype=np.float64).reshape(4, 4))
    assert extract_block(channel, (2, 3), 1) == np.array([[11.0]])


def test_extract_block_even_size_matches_oracle():
    # Even sizes extend one pixel further below/right than above/left.
    rng = np.random.default_rng(3)
    channel = Channel(rng.uniform(0, 255, (9, 9)))
    for center in [(0, 0), (4, 4), (8, 8)]:
        assert np.array_equal(
            extract_block(channel, center, 4), clamped_block(channel.values, center, 4)
        )


def test_extract_block_center_outside():
    channel = Channel(np.zeros((4, 4)))
    with pytest.raises(ValidationError) as err:
        extract_block(channel, (4, 0), 3)
    assert err.value.code == "outside_image"


# --- block_distance ------------------------------------------------------

def test_distance_zero_for_same_coordinate():
    refs = random_refs(4, (16, 16), 2)
    assert block_distance(refs, (8, 8), (8, 8), 9) == 0.0


def test_distance_unit_blocks():
    # One reference, block of zeros vs block of ones, S=3: norm is sqrt(9).
    values = np.zeros((8, 8))
    values[4:8, 4:8] = 1.0
    refs = [Channel(values)]
    assert block_distance(refs, (1, 1), (5, 5), 3) == pytest.approx(3.0, abs=1e-12)


def test_distance_matches_nested_loop_oracle():
    refs = random_refs(5, (16, 16), 2)
    rng = np.random.default_rng(6)
    for _ in range(20):
        x = tuple(rng.integers(0, 16, 2))
        y = tuple(rng.integers(0, 16, 2))
        got = block_distance(refs, x, y, 5)
        assert got == pytest.approx(distance_oracle(refs, x, y, 5), abs=1e-9)


def test_distance_symmetry():
    refs = random_refs(7, (12, 12), 3)
    rng = np.random.default_rng(8)
    for _ in range(20):
        x = tuple(rng.integers(0, 12, 2))
        y = tuple(rng.integers(0, 12, 2))
        assert block_distance(refs, x, y, 7) == pytest.approx(
            block_distance(refs, y, x, 7), abs=1e-12
        )


def test_distance_zero_iff_blocks_identical():
    # A constant image makes every block identical; a ramp makes none.
    constant = [Channel(np.full((10, 10), 3.0))]
    assert block_distance(constant, (2, 2), (7, 5), 3) == 0.0
    ramp = [Channel(np.arange(100, dtype=np.float64).reshape(10, 10))]
    assert block_distance(ramp, (4, 4), (4, 5), 3) > 0.0


# --- match_blocks --------------------------------------------------------

def test_match_constant_image_all_ties():
    refs = [Channel(np.full((10, 10), 5.0))]
    params = NocsParams(block_size=3, stack_size=6, search_radius=2)
    target = (5, 5)
    result = match_blocks(refs, target, params)
    assert np.all(result.distances == 0.0)
    # Expected: target first, then the earliest window coordinates row-major.
    window = [
        (r, c)
        for r in range(3, 8)
        for c in range(3, 8)
        if (r, c) != target
    ]
    expected = [target] + window[:5]
    assert [tuple(p) for p in result.locations] == expected


def test_match_random_image_equals_exhaustive_oracle():
    refs = random_refs(11, (32, 32), 2)
    params = NocsParams(block_size=9, stack_size=8, search_radius=4)
    rng = np.random.default_rng(12)
    for _ in range(10):
        target = tuple(rng.integers(0, 32, 2))
        result = match_blocks(refs, target, params)
        exp_locs, exp_dists = matches_oracle(refs, target, params)
        assert np.array_equal(result.locations, exp_locs)
        np.testing.assert_allclose(result.distances, exp_dists, atol=1e-9)


def test_match_selects_whole_window_when_k_equals_window():
    refs = random_refs(13, (5, 5), 1)
    params = NocsParams(block_size=3, stack_size=25, search_radius=4)
    result = match_blocks(refs, (2, 2), params)
    seen = {tuple(p) for p in result.locations}
    assert seen == {(r, c) for r in range(5) for c in range(5)}


def test_match_window_too_small_after_clipping():
    refs = random_refs(14, (4, 4), 1)
    params = NocsParams(block_size=3, stack_size=20, search_radius=4)
    with pytest.raises(ValidationError) as err:
        match_blocks(refs, (0, 0), params)
    assert err.value.code == "window_too_small"


def test_match_is_deterministic():
    refs = random_refs(15, (20, 20), 2)
    params = NocsParams(block_size=5, stack_size=10, search_radius=3)
    first = match_blocks(refs, (10, 10), params)
    second = match_blocks(refs, (10, 10), params)
    assert np.array_equal(first.locations, second.locations)
    assert np.array_equal(first.distances, second.distances)


def test_match_invariants():
    refs = random_refs(16, (20, 20), 2)
    params = NocsParams(block_size=5, stack_size=12, search_radius=3)
    result = match_blocks(refs, (7, 9), params)
    assert tuple(result.locations[0]) == (7, 9)
    assert result.distances[0] == 0.0
    assert np.all(np.diff(result.distances) >= 0.0)
    assert np.all(np.abs(result.locations - np.array([7, 9])) <= 3)


def test_match_many_agrees_with_single_calls():
    refs = random_refs(17, (24, 24), 2)
    params = NocsParams(block_size=7, stack_size=9, search_radius=3)
    targets = np.array([[0, 0], [5, 20], [12, 12], [23, 23]])
    locs, dists = match_blocks_many(refs, targets, params)
    for i, target in enumerate(targets):
        single = match_blocks(refs, target, params)
        assert np.array_equal(locs[i], single.locations)
        assert np.array_equal(dists[i], single.distances)


def test_match_target_outside_image():
    refs = random_refs(18, (8, 8), 1)
    params = NocsParams(block_size=3, stack_size=4, search_radius=2)
    with pytest.raises(ValidationError) as err:
        match_blocks(refs, (8, 3), params)
    assert err.value.code == "outside_image"
