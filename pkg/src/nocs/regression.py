"""Per-pixel affine regression between a masked bar and its reference bars.

A bar collects, for one target pixel, the distorted-channel values at its
matched locations together with their validity flags and the matching values
from every reference channel. Only the valid entries take part in fitting:
the best reference channel is the one with the highest Pearson correlation
against the valid distorted values, a slope/intercept pair is fitted to it by
least squares in closed form, and the masked pixel is predicted by applying
that line to the reference value at the target location itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class Bar:
    """Value stack for one target pixel.

    values:     (K,) distorted-channel values at the matched locations.
    valid:      (K,) flags, 1 where the location currently holds data. The
                first slot is the target pixel itself and must be 0 while the
                bar is pending.
    ref_values: (N, K) matrix, one row per reference channel.
    """

    target: tuple[int, int]
    values: np.ndarray
    valid: np.ndarray
    ref_values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid)
        refs = np.asarray(self.ref_values, dtype=np.float64)
        if values.ndim != 1 or valid.shape != values.shape:
            raise ValidationError("bad_bar", "values and valid must be equal-length vectors")
        if refs.ndim != 2 or refs.shape[1] != values.shape[0] or refs.shape[0] < 1:
            raise ValidationError("bad_bar", "ref_values must be an (N, K) matrix")
        if not np.isin(valid, (0, 1)).all():
            raise ValidationError("bad_bar", "valid flags must all be 0 or 1")
        valid = valid.astype(np.uint8)
        if valid[0] != 0:
            raise ValidationError("bad_bar", "first slot of a pending bar must be masked")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "ref_values", refs)

    @property
    def stack_size(self) -> int:
        return self.values.shape[0]

    @property
    def num_references(self) -> int:
        return self.ref_values.shape[0]

    def valid_count(self) -> int:
        return int(self.valid.sum())


@dataclass(frozen=True)
class AffineFit:
    """Slope/intercept model tied to one reference channel (0-based index)."""

    slope: float
    intercept: float
    ref_index: int


def _correlation(dm: np.ndarray, dr: np.ndarray) -> float:
    # dm, dr are mean-centred valid subvectors. Zero variance on either side
    # carries no directional information and scores 0.
    denom = float(np.linalg.norm(dm)) * float(np.linalg.norm(dr))
    if denom == 0.0:
        return 0.0
    return float(dm @ dr) / denom


def select_reference(bar: Bar) -> int:
    """Pick the reference channel most correlated with the valid entries.

    With a single reference the answer is index 0 without any computation.
    Ties go to the smallest channel index.
    """
    if bar.valid_count() < 2:
        raise ValidationError(
            "underdetermined", "need at least 2 valid entries to rank references"
        )
    if bar.num_references == 1:
        return 0
    sel = bar.valid == 1
    m = bar.values[sel]
    dm = m - m.mean()
    best_index = 0
    best_score = -np.inf
    for i in range(bar.num_references):
        r = bar.ref_values[i, sel]
        score = _correlation(dm, r - r.mean())
        if score > best_score:
            best_score = score
            best_index = i
    return best_index


def fit_affine(bar: Bar, ref_index: int) -> AffineFit:
    """Closed-form least-squares line through (reference, distorted) pairs.

    A degenerate denominator (constant reference over the valid entries,
    including the single-entry case) falls back to the constant model:
    slope 0, intercept equal to the mean of the valid distorted values.
    """
    sel = bar.valid == 1
    n_valid = int(sel.sum())
    if n_valid == 0:
        raise ValidationError("empty_bar", "cannot fit a bar with no valid entries")
    if not (0 <= ref_index < bar.num_references):
        raise ValidationError("bad_params", f"reference index {ref_index} out of range")
    m = bar.values[sel]
    r = bar.ref_values[ref_index, sel]
    m_mean = float(m.mean())
    r_mean = float(r.mean())
    dr = r - r_mean
    denom = float(dr @ dr)
    if denom == 0.0:
        return AffineFit(slope=0.0, intercept=m_mean, ref_index=ref_index)
    slope = float(dr @ (m - m_mean)) / denom
    return AffineFit(slope=slope, intercept=m_mean - slope * r_mean, ref_index=ref_index)


def predict_pixel(bar: Bar, fit: AffineFit) -> float:
    """Apply the fitted line to the reference value at the target pixel.

    The result is intentionally not clamped; quantization is an export step.
    """
    return fit.slope * float(bar.ref_values[fit.ref_index, 0]) + fit.intercept


def fit_predict_batch(
    values: np.ndarray, valid: np.ndarray, ref_values: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized reference selection + fit + prediction for many bars.

    Args:
        values: (B, K) distorted-channel values.
        valid: (B, K) validity flags; every row needs at least one valid entry.
        ref_values: (B, N, K) reference values.

    Returns:
        (predictions, slopes, intercepts, ref_indices), each of length B,
        following the same degeneracy rules as the scalar operations.
    """
    v = np.asarray(valid, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    ref_values = np.asarray(ref_values, dtype=np.float64)
    n_bars, n_refs = ref_values.shape[0], ref_values.shape[1]
    counts = v.sum(axis=1)
    if np.any(counts < 1):
        raise ValidationError("empty_bar", "every bar needs at least one valid entry")

    m_mean = (values * v).sum(axis=1) / counts
    dm = (values - m_mean[:, None]) * v
    r_mean = (ref_values * v[:, None, :]).sum(axis=2) / counts[:, None]
    dr = (ref_values - r_mean[:, :, None]) * v[:, None, :]

    if n_refs == 1:
        ref_idx = np.zeros(n_bars, dtype=np.int64)
    else:
        num = (dr * dm[:, None, :]).sum(axis=2)
        denom = np.sqrt((dm * dm).sum(axis=1))[:, None] * np.sqrt((dr * dr).sum(axis=2))
        safe = np.where(denom > 0.0, denom, 1.0)
        corr = np.where(denom > 0.0, num / safe, 0.0)
        ref_idx = np.argmax(corr, axis=1)

    take = (np.arange(n_bars), ref_idx)
    dr_z = dr[take]
    denom_z = (dr_z * dr_z).sum(axis=1)
    num_z = (dr_z * dm).sum(axis=1)
    safe_z = np.where(denom_z > 0.0, denom_z, 1.0)
    slopes = np.where(denom_z > 0.0, num_z / safe_z, 0.0)
    intercepts = m_mean - slopes * r_mean[take]
    predictions = slopes * ref_values[take][:, 0] + intercepts
    return predictions, slopes, intercepts, ref_idx
