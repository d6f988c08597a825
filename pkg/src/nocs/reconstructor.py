"""Iterative reconstruction of the masked pixels of one channel.

The driver matches blocks once per masked pixel, then repeatedly schedules
the easiest pending pixels (most valid entries in their bar first), fits the
per-pixel regression for a whole batch against a state snapshot, and writes
all batch results back together. Reconstructed pixels immediately count as
valid data for later bars. When every pending bar has zero valid entries,
a closed masked region has been hit and a single-pixel emergency copy is
performed before normal scheduling resumes.

Batches are snapshot-synchronous, sorting is fully tie-broken, and the
matching kernel is bit-deterministic, so the output is identical for any
worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .block_matching import NocsParams, limit_worker_threads, match_blocks_many
from .errors import ValidationError
from .image_model import Channel, ReconstructionProblem
from .regression import Bar, fit_predict_batch

# Emergency neighbor directions in tie-break order.
DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))

ProgressCallback = Callable[[int, int], None]


@dataclass(eq=False)
class ReconstructionState:
    """Mutable working copies plus the per-pixel match cache.

    ``targets`` holds the originally masked coordinates in row-major order;
    ``pending[i]`` is True until targets[i] has been reconstructed. The mask
    is set to 1 at a pixel the moment its value is written back.
    """

    values: np.ndarray
    mask: np.ndarray
    targets: np.ndarray
    pending: np.ndarray
    match_locations: np.ndarray
    match_distances: np.ndarray
    target_index: np.ndarray

    @property
    def pending_count(self) -> int:
        return int(self.pending.sum())


@dataclass
class ReconstructionStats:
    """Counters filled in by reconstruct() when a sink is passed."""

    iterations: int = 0
    batches: int = 0
    emergency_steps: int = 0
    zero_valid_deferrals: int = 0
    pixels_reconstructed: int = 0


@dataclass(frozen=True, eq=False)
class EmergencyCandidates:
    """Masked pixels adjacent to valid data.

    pixels:     (Q, 2) masked coordinates with at least one valid 4-neighbor,
                in row-major order.
    directions: (Q, 4) flags aligned with DIRECTIONS; True where stepping in
                that direction lands in-bounds on a currently valid pixel.
    """

    pixels: np.ndarray
    directions: np.ndarray


def init_state(problem: ReconstructionProblem, params: NocsParams) -> ReconstructionState:
    """Copy the problem into working arrays and fill the match cache."""
    values = problem.distorted.values.copy()
    mask = problem.mask.flags.copy()
    targets = np.argwhere(mask == 0).astype(np.int64)
    locations, distances = match_blocks_many(problem.references, targets, params)
    target_index = np.full(mask.shape, -1, dtype=np.int64)
    if len(targets):
        target_index[targets[:, 0], targets[:, 1]] = np.arange(len(targets))
    return ReconstructionState(
        values=values,
        mask=mask,
        targets=targets,
        pending=np.ones(len(targets), dtype=bool),
        match_locations=locations,
        match_distances=distances,
        target_index=target_index,
    )


def build_bar(state: ReconstructionState, x, refs: Sequence[Channel]) -> Bar:
    """Assemble the bar for coordinate ``x`` from the current state."""
    r, c = int(x[0]), int(x[1])
    idx = int(state.target_index[r, c]) if state.target_index[r, c] >= 0 else -1
    if idx < 0:
        raise ValidationError("no_cached_matches", f"({r}, {c}) has no cached match list")
    if state.mask[r, c] != 0:
        raise ValidationError("not_masked", f"({r}, {c}) is not masked in the working mask")
    locs = state.match_locations[idx]
    rows, cols = locs[:, 0], locs[:, 1]
    return Bar(
        target=(r, c),
        values=state.values[rows, cols],
        valid=state.mask[rows, cols],
        ref_values=np.stack([ref.values[rows, cols] for ref in refs]),
    )


def _pending_valid_counts(state: ReconstructionState, idx: np.ndarray) -> np.ndarray:
    locs = state.match_locations[idx]
    return state.mask[locs[:, :, 0], locs[:, :, 1]].sum(axis=1, dtype=np.int64)


def _schedule(state: ReconstructionState, batch_fraction: float):
    idx = np.flatnonzero(state.pending)
    if idx.size == 0:
        raise ValidationError("no_pending", "nothing left to schedule")
    counts = _pending_valid_counts(state, idx)
    zero_present = bool((counts == 0).any())
    if counts.max() == 0:
        return idx[:0], True  # emergency signal
    rows = state.targets[idx, 0]
    cols = state.targets[idx, 1]
    order = np.lexsort((cols, rows, -counts))
    batch = order[: math.ceil(batch_fraction * idx.size)]
    batch = batch[counts[batch] > 0]
    return idx[batch], zero_present


def schedule_batch(state: ReconstructionState, batch_fraction: float) -> np.ndarray:
    """Coordinates of the next batch, easiest bars first.

    Pending bars are ranked by the number of valid entries, descending, with
    row-major coordinate order as the tie break; the first
    ceil(batch_fraction * pending) of them are returned. Bars with zero valid
    entries are deferred. An empty result means every pending bar is fully
    masked and the emergency path must run instead.
    """
    chosen, _ = _schedule(state, batch_fraction)
    return state.targets[chosen]


def find_emergency_candidates(state: ReconstructionState) -> EmergencyCandidates:
    """Masked pixels with at least one valid 4-neighbor, plus the directions."""
    mask = state.mask
    height, width = mask.shape
    ok = np.zeros((4,) + mask.shape, dtype=bool)
    for d, (dr, dc) in enumerate(DIRECTIONS):
        r0, r1 = max(0, -dr), height - max(0, dr)
        c0, c1 = max(0, -dc), width - max(0, dc)
        ok[d, r0:r1, c0:c1] = (mask[r0:r1, c0:c1] == 0) & (
            mask[r0 + dr : r1 + dr, c0 + dc : c1 + dc] == 1
        )
    any_dir = ok.any(axis=0)
    pixels = np.argwhere(any_dir).astype(np.int64)
    directions = ok[:, pixels[:, 0], pixels[:, 1]].T.copy()
    return EmergencyCandidates(pixels=pixels, directions=directions)


def emergency_step(state: ReconstructionState, refs: Sequence[Channel]) -> tuple[int, int]:
    """Copy one value across the masked-region boundary.

    Over all masked pixels with a valid 4-neighbor, the (pixel, direction)
    pair with the smallest summed squared reference difference wins; ties go
    to the row-major earlier pixel, then to DIRECTIONS order. The distorted
    value of the valid neighbor is copied onto the masked pixel, which then
    leaves the pending set so normal scheduling can resume.
    """
    candidates = find_emergency_candidates(state)
    assert len(candidates.pixels) > 0, "no masked pixel borders valid data"
    height, width = state.mask.shape
    planes = np.stack([ref.values for ref in refs])

    costs = np.full((height, width, 4), np.inf)
    for d, (dr, dc) in enumerate(DIRECTIONS):
        r0, r1 = max(0, -dr), height - max(0, dr)
        c0, c1 = max(0, -dc), width - max(0, dc)
        diff = planes[:, r0:r1, c0:c1] - planes[:, r0 + dr : r1 + dr, c0 + dc : c1 + dc]
        costs[r0:r1, c0:c1, d] = (diff * diff).sum(axis=0)
    allowed = np.zeros((height, width, 4), dtype=bool)
    px = candidates.pixels
    allowed[px[:, 0], px[:, 1]] = candidates.directions
    costs[~allowed] = np.inf

    flat = int(np.argmin(costs))  # first minimum = row-major pixel, then direction
    r, rem = divmod(flat, width * 4)
    c, d = divmod(rem, 4)
    dr, dc = DIRECTIONS[d]
    state.values[r, c] = state.values[r + dr, c + dc]
    state.mask[r, c] = 1
    idx = int(state.target_index[r, c])
    assert idx >= 0
    state.pending[idx] = False
    return (r, c)


def reconstruct(
    problem: ReconstructionProblem,
    params: NocsParams | None = None,
    *,
    workers: int | None = None,
    progress: ProgressCallback | None = None,
    stats: ReconstructionStats | None = None,
) -> Channel:
    """Reconstruct every masked pixel of the distorted channel.

    Args:
        problem: validated distorted channel, mask, and references.
        params: algorithm parameters; defaults to NocsParams().
        workers: optional cap on matching-kernel threads. The output is
            bit-identical for any value.
        progress: optional callable invoked after each iteration with
            (iteration_index, pixels_remaining).
        stats: optional ReconstructionStats sink filled during the run.

    Returns:
        A channel equal to the input on originally valid pixels and filled
        by regression (or emergency copies) everywhere else. Values are not
        clamped to [0, 255] here.
    """
    if params is None:
        params = NocsParams()
    with limit_worker_threads(workers):
        state = init_state(problem, params)
        ref_planes = np.stack([ref.values for ref in problem.references])
        iteration = 0
        while state.pending.any():
            iteration += 1
            chosen, zero_present = _schedule(state, params.batch_fraction)
            if chosen.size == 0:
                emergency_step(state, problem.references)
                if stats is not None:
                    stats.emergency_steps += 1
                    stats.pixels_reconstructed += 1
            else:
                locs = state.match_locations[chosen]
                rows, cols = locs[:, :, 0], locs[:, :, 1]
                # Snapshot semantics: gather everything before writing back.
                bar_values = state.values[rows, cols]
                bar_valid = state.mask[rows, cols]
                bar_refs = ref_planes[:, rows, cols].transpose(1, 0, 2)
                predictions, _, _, _ = fit_predict_batch(bar_values, bar_valid, bar_refs)
                coords = state.targets[chosen]
                state.values[coords[:, 0], coords[:, 1]] = predictions
                state.mask[coords[:, 0], coords[:, 1]] = 1
                state.pending[chosen] = False
                if stats is not None:
                    stats.batches += 1
                    stats.pixels_reconstructed += len(chosen)
                    if zero_present:
                        stats.zero_valid_deferrals += 1
            if stats is not None:
                stats.iterations = iteration
            if progress is not None:
                progress(iteration, state.pending_count)
        return Channel(state.values)
