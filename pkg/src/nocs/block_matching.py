"""Windowed block matching over the reference channels.

For a target pixel, every in-bounds candidate inside a square search window
is scored with the multi-channel block distance (sum over channels of the
Euclidean norm of the block difference) and the ``stack_size`` closest
candidates are kept. Blocks reaching past the image border are filled by
replicate (clamp-to-edge) padding, and the window itself is clipped at the
border rather than skipped, so every pixel of the image is matchable.

Matching reads only the reference channels. Distances therefore never change
while the distorted channel is being filled in, which is why match lists can
be computed once per pixel and reused across iterations.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange

from .errors import ValidationError
from .image_model import Channel

_DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class NocsParams:
    """Tuning parameters of the reconstruction algorithm.

    block_size:     side length of the square comparison blocks.
    stack_size:     number of matched locations kept per pixel (the target
                    itself always included, at the first position).
    search_radius:  candidates are searched up to this many pixels away per
                    axis, i.e. inside a (2r+1) x (2r+1) window.
    batch_fraction: share of the pending pixels processed per iteration.
    """

    block_size: int = 9
    stack_size: int = 44
    search_radius: int = 16
    batch_fraction: float = 0.10

    def __post_init__(self):
        if self.block_size < 1:
            raise ValidationError("bad_params", "block_size must be >= 1")
        if self.stack_size < 2:
            raise ValidationError("bad_params", "stack_size must be >= 2")
        if self.search_radius < 1:
            raise ValidationError("bad_params", "search_radius must be >= 1")
        window = (2 * self.search_radius + 1) ** 2
        if window < self.stack_size:
            raise ValidationError(
                "bad_params",
                f"search window holds {window} candidates, fewer than stack_size "
                f"{self.stack_size}",
            )
        if not (0.0 < self.batch_fraction <= 1.0):
            raise ValidationError("bad_params", "batch_fraction must be in (0, 1]")


@dataclass(frozen=True, eq=False)
class MatchList:
    """Matched locations for one target pixel, closest first.

    ``locations[0]`` is the target itself with distance exactly 0; distances
    are non-decreasing. Ties are broken by row-major order of the candidate
    coordinate, which makes matching fully deterministic.
    """

    target: tuple[int, int]
    locations: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        if self.locations.shape[0] != self.distances.shape[0]:
            raise ValidationError(
                "bad_shape", "locations and distances must have equal length"
            )


def _block_start(block_size: int) -> int:
    # Blocks cover [c - floor((S-1)/2), c + ceil((S-1)/2)] per axis.
    return (block_size - 1) // 2


def _pad_plane(values: np.ndarray, block_size: int) -> np.ndarray:
    lo = _block_start(block_size)
    hi = block_size - 1 - lo
    return np.pad(values, ((lo, hi), (lo, hi)), mode="edge")


def _padded_stack(refs: Sequence[Channel], block_size: int) -> np.ndarray:
    return np.ascontiguousarray(
        np.stack([_pad_plane(ref.values, block_size) for ref in refs])
    )


def _check_inside(shape: tuple[int, int], coord, name: str) -> tuple[int, int]:
    r, c = int(coord[0]), int(coord[1])
    if not (0 <= r < shape[0] and 0 <= c < shape[1]):
        raise ValidationError(
            "outside_image", f"{name} ({r}, {c}) lies outside the {shape} image"
        )
    return r, c


def extract_block(channel: Channel, center, block_size: int) -> np.ndarray:
    """Extract the block_size x block_size block around ``center``.

    Out-of-bounds samples replicate the nearest edge pixel. For even sizes
    the block extends one pixel further below/right than above/left.
    """
    if block_size < 1:
        raise ValidationError("bad_params", "block_size must be >= 1")
    r, c = _check_inside(channel.shape, center, "block center")
    lo = _block_start(block_size)
    rows = np.clip(np.arange(r - lo, r - lo + block_size), 0, channel.height - 1)
    cols = np.clip(np.arange(c - lo, c - lo + block_size), 0, channel.width - 1)
    return channel.values[np.ix_(rows, cols)]


def block_distance(refs: Sequence[Channel], x, y, block_size: int) -> float:
    """Distance between two coordinates: per reference channel the Euclidean
    norm of the block difference, summed over channels."""
    total = 0.0
    for ref in refs:
        bx = extract_block(ref, x, block_size)
        by = extract_block(ref, y, block_size)
        total += float(np.linalg.norm(bx - by))
    return total


@njit(cache=True, parallel=True)
def _window_distances(padded, targets, height, width, block_size, radius):
    """Distances from each target to every window candidate.

    Returns an (n, side*side) array indexed row-major over window offsets;
    out-of-bounds candidates hold +inf. The accumulation order is fixed
    (channels outer, block rows/cols inner), so results are bit-identical
    regardless of thread count.
    """
    n = targets.shape[0]
    nrefs = padded.shape[0]
    side = 2 * radius + 1
    out = np.full((n, side * side), np.inf)
    for t in prange(n):
        tr = targets[t, 0]
        tc = targets[t, 1]
        for wy in range(-radius, radius + 1):
            yr = tr + wy
            if yr < 0 or yr >= height:
                continue
            for wx in range(-radius, radius + 1):
                yc = tc + wx
                if yc < 0 or yc >= width:
                    continue
                total = 0.0
                for i in range(nrefs):
                    ssd = 0.0
                    for br in range(block_size):
                        for bc in range(block_size):
                            d = padded[i, tr + br, tc + bc] - padded[i, yr + br, yc + bc]
                            ssd += d * d
                    total += np.sqrt(ssd)
                out[t, (wy + radius) * side + (wx + radius)] = total
    return out


def _select_top(dist_rows: np.ndarray, targets: np.ndarray, params: NocsParams):
    side = 2 * params.search_radius + 1
    k = params.stack_size
    candidates = np.isfinite(dist_rows).sum(axis=1)
    if np.any(candidates < k):
        worst = int(candidates.min())
        raise ValidationError(
            "window_too_small",
            f"clipped search window holds only {worst} candidates, "
            f"fewer than stack_size {k}",
        )
    work = dist_rows.copy()
    center = params.search_radius * side + params.search_radius
    work[:, center] = -1.0  # pin the target to the front before sorting
    order = np.argsort(work, axis=1, kind="stable")[:, :k]
    dists = np.take_along_axis(dist_rows, order, axis=1)
    rows = targets[:, 0:1] + order // side - params.search_radius
    cols = targets[:, 1:2] + order % side - params.search_radius
    locs = np.stack([rows, cols], axis=2)
    return locs, dists


def match_blocks_many(
    refs: Sequence[Channel],
    targets: np.ndarray,
    params: NocsParams,
    chunk_size: int = _DEFAULT_CHUNK,
) -> tuple[np.ndarray, np.ndarray]:
    """Match every target coordinate at once.

    Args:
        refs: reference channels, all with one shape.
        targets: (n, 2) integer array of (row, col) coordinates.
        params: matching parameters.
        chunk_size: targets are processed in chunks of this size to bound
            the memory of the distance buffer.

    Returns:
        (locations, distances): int64 (n, K, 2) and float64 (n, K) arrays,
        each row sorted as described on MatchList.
    """
    if len(refs) == 0:
        raise ValidationError("empty_references", "need at least one reference channel")
    height, width = refs[0].shape
    targets = np.ascontiguousarray(np.asarray(targets, dtype=np.int64).reshape(-1, 2))
    n = targets.shape[0]
    locs = np.empty((n, params.stack_size, 2), dtype=np.int64)
    dists = np.empty((n, params.stack_size), dtype=np.float64)
    if n == 0:
        return locs, dists
    if targets.min() < 0 or targets[:, 0].max() >= height or targets[:, 1].max() >= width:
        raise ValidationError("outside_image", "a target coordinate lies outside the image")
    padded = _padded_stack(refs, params.block_size)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        chunk = targets[start:stop]
        rows = _window_distances(
            padded, chunk, height, width, params.block_size, params.search_radius
        )
        locs[start:stop], dists[start:stop] = _select_top(rows, chunk, params)
    return locs, dists


def match_blocks(refs: Sequence[Channel], target, params: NocsParams) -> MatchList:
    """Find the stack_size most similar window locations for one pixel."""
    r, c = _check_inside(refs[0].shape, target, "match target")
    locs, dists = match_blocks_many(refs, np.array([[r, c]], dtype=np.int64), params)
    return MatchList(target=(r, c), locations=locs[0], distances=dists[0])


@contextmanager
def limit_worker_threads(workers: int | None):
    """Temporarily cap the number of threads used by the matching kernel.

    Results are bit-identical for any worker count; this only trades time.
    """
    if workers is None:
        yield
        return
    prev = numba.get_num_threads()
    capped = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(capped)
    try:
        yield
    finally:
        numba.set_num_threads(prev)
