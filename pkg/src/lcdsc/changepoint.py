"""Variance change point detection by penalized optimal partitioning.

Segments a series under the Gaussian variance likelihood cost
``n_seg * log(max(var, var_floor))`` (biased MLE variance about the
segment mean) plus a model-selection penalty, and returns the exact
global minimizer via the optimal-partitioning recursion.  Candidate
starts are pruned PELT-style; the pruning rules below are conservative
enough that the optimum is never changed:

* candidates are only dropped ``min_seg_len`` steps after they are first
  dominated, which closes the gap left by the minimum-length constraint;
* the modified-BIC segment term ``log(len)`` breaks plain cost
  subadditivity by at most ``log(n/4)``, so that slack is folded into the
  domination test;
* pruning is disabled outright when any admissible window could hit the
  variance floor, where the subadditivity argument no longer applies.

Ties are broken toward fewer change points, then the lexicographically
smallest change-point vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emd import _as_1d_float, _frozen_copy

_PENALTY_KINDS = ("aic", "bic", "mbic")


@dataclass(frozen=True)
class Penalty:
    """Model-selection penalty: ``aic`` (beta per change), ``bic``, or ``mbic``."""

    kind: str
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in _PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {_PENALTY_KINDS}")
        if self.kind == "aic" and not self.beta > 0:
            raise ValueError("aic penalty requires beta > 0")

    @classmethod
    def aic(cls, beta: float) -> "Penalty":
        return cls("aic", beta)

    @classmethod
    def bic(cls) -> "Penalty":
        return cls("bic")

    @classmethod
    def mbic(cls) -> "Penalty":
        return cls("mbic")


@dataclass(frozen=True, eq=False)
class SegStats:
    """Prefix sums enabling O(1) segment mean/variance lookups."""

    prefix_sum: np.ndarray
    prefix_sumsq: np.ndarray
    n: int
    var_floor: float

    @classmethod
    def from_series(cls, series) -> "SegStats":
        x = _as_1d_float(series)
        if not np.all(np.isfinite(x)):
            raise ValueError("invalid samples: input contains non-finite values")
        prefix_sum = np.concatenate(([0.0], np.cumsum(x)))
        prefix_sumsq = np.concatenate(([0.0], np.cumsum(x * x)))
        var_floor = 1e-12 * (float(np.var(x)) + 1e-300)
        return cls(_frozen_copy(prefix_sum), _frozen_copy(prefix_sumsq), x.size, var_floor)


@dataclass(frozen=True)
class ChangePointSet:
    """Detected change points with the objective value that selected them.

    A change at ``tau`` splits the series into ``[.., tau]`` and
    ``[tau+1, ..]``; ``taus`` is strictly increasing and every implied
    segment has at least ``min_seg_len`` samples.
    """

    taus: tuple[int, ...]
    total_cost: float
    penalty: Penalty
    min_seg_len: int

    def segments(self, n: int) -> list[tuple[int, int]]:
        """Inclusive ``(start, end)`` bounds of every implied segment."""
        starts = [0] + [tau + 1 for tau in self.taus]
        ends = list(self.taus) + [n - 1]
        return list(zip(starts, ends))


def segment_cost(stats: SegStats, i: int, j: int) -> float:
    """Gaussian variance cost of the inclusive segment ``[i, j]``."""
    n_seg = j - i + 1
    if n_seg < 2:
        raise ValueError("segment too short: cost needs at least 2 samples")
    if i < 0 or j >= stats.n:
        raise ValueError("segment out of bounds")
    total = stats.prefix_sum[j + 1] - stats.prefix_sum[i]
    total_sq = stats.prefix_sumsq[j + 1] - stats.prefix_sumsq[i]
    mean = total / n_seg
    var = total_sq / n_seg - mean * mean
    return n_seg * math.log(max(var, stats.var_floor))


def penalty_value(penalty: Penalty, m: int, n: int, seg_lengths) -> float:
    """Penalty term for ``m`` change points with the given segment lengths.

    ``aic`` charges ``beta`` per change, ``bic`` charges ``log(n)`` per
    change, and ``mbic`` charges ``3*log(n)`` per change plus ``log`` of
    every segment length (the modified BIC of the change-point
    literature, which also grades the change locations).
    """
    lengths = [int(v) for v in seg_lengths]
    if m < 0 or len(lengths) != m + 1 or sum(lengths) != n:
        raise ValueError("inconsistent segment lengths for penalty evaluation")
    if penalty.kind == "aic":
        return penalty.beta * m
    if penalty.kind == "bic":
        return m * math.log(n)
    return 3.0 * m * math.log(n) + sum(math.log(length) for length in lengths)


def _objective(
    stats: SegStats, taus: tuple[int, ...], penalty: Penalty, penalty_scale: float = 1.0
) -> float:
    """Canonical objective: left-to-right segment costs plus the penalty."""
    n = stats.n
    starts = [0] + [tau + 1 for tau in taus]
    ends = list(taus) + [n - 1]
    total = 0.0
    for i, j in zip(starts, ends):
        total += segment_cost(stats, i, j)
    lengths = [j - i + 1 for i, j in zip(starts, ends)]
    return total + penalty_scale * penalty_value(penalty, len(taus), n, lengths)


def _pruning_safe(stats: SegStats, min_seg_len: int) -> bool:
    # Certify that no admissible segment can hit the variance floor: every
    # admissible segment contains a full window of length min_seg_len, and
    # parent variance >= (window_len / parent_len) * window variance.
    ps, pq = stats.prefix_sum, stats.prefix_sumsq
    w = min_seg_len
    sums = ps[w:] - ps[:-w]
    sumsq = pq[w:] - pq[:-w]
    mean = sums / w
    window_var = sumsq / w - mean * mean
    return float(window_var.min()) * w >= stats.var_floor * stats.n


def detect_changepoints(
    series, penalty: Penalty, min_seg_len: int = 10, penalty_scale: float = 1.0
) -> ChangePointSet:
    """Exact minimizer of segment costs plus penalty over all segmentations.

    Parameters
    ----------
    series : array_like
        Values to segment (for the cleaning pipeline, an instantaneous
        amplitude series).
    penalty : Penalty
        Per-change penalty controlling the number of detected changes.
    min_seg_len : int, optional
        Minimum samples per segment, at least 2 (default 10: variance
        estimates on shorter windows are too noisy).
    penalty_scale : float, optional
        Multiplier on the penalty term (default 1.0).  Values above one
        compensate for serial correlation, which inflates the Gaussian
        likelihood evidence relative to the nominal sample count.
    """
    x = _as_1d_float(series)
    if min_seg_len < 2:
        raise ValueError("min_seg_len must be at least 2")
    if not penalty_scale > 0:
        raise ValueError("penalty_scale must be positive")
    n = x.size
    if n < 2 * min_seg_len:
        raise ValueError("series too short: need at least 2*min_seg_len samples")
    stats = SegStats.from_series(x)
    ps = np.asarray(stats.prefix_sum)
    pq = np.asarray(stats.prefix_sumsq)
    floor = stats.var_floor
    msl = min_seg_len

    mbic = penalty.kind == "mbic"
    if penalty.kind == "aic":
        per_change = penalty.beta
    elif penalty.kind == "bic":
        per_change = math.log(n)
    else:
        per_change = 3.0 * math.log(n)
    per_change *= penalty_scale
    prune_slack = -penalty_scale * math.log(n / 4.0) if mbic else 0.0
    prune = _pruning_safe(stats, msl)

    never = np.iinfo(np.intp).max
    cand = np.empty(n + 1, dtype=np.intp)
    cand_f = np.empty(n + 1)
    cand_expiry = np.empty(n + 1, dtype=np.intp)
    n_cand = 0

    f_best = np.empty(n + 1)
    f_best[0] = -per_change
    taus_of: list[tuple[int, ...] | None] = [None] * (n + 1)
    taus_of[0] = ()

    for t in range(msl, n + 1):
        s_new = t - msl
        if s_new == 0 or s_new >= msl:
            cand[n_cand] = s_new
            cand_f[n_cand] = f_best[s_new]
            cand_expiry[n_cand] = never
            n_cand += 1

        alive = cand_expiry[:n_cand] > t
        if not alive.all():
            keep = np.flatnonzero(alive)
            cand[: keep.size] = cand[keep]
            cand_f[: keep.size] = cand_f[keep]
            cand_expiry[: keep.size] = cand_expiry[keep]
            n_cand = keep.size

        starts = cand[:n_cand]
        lengths = (t - starts).astype(float)
        sums = ps[t] - ps[starts]
        sumsq = pq[t] - pq[starts]
        mean = sums / lengths
        var = sumsq / lengths - mean * mean
        np.maximum(var, floor, out=var)
        costs = lengths * np.log(var)
        if mbic:
            costs += penalty_scale * np.log(lengths)
        vals = cand_f[:n_cand] + costs + per_change

        best_pos = int(np.argmin(vals))
        best = float(vals[best_pos])
        ties = np.flatnonzero(vals == best)
        if ties.size > 1:
            # prefer fewer change points, then the smallest tau vector
            best_key = None
            for pos in ties:
                s = int(starts[pos])
                cand_taus = taus_of[s] if s == 0 else taus_of[s] + (s - 1,)
                key = (len(cand_taus), cand_taus)
                if best_key is None or key < best_key:
                    best_key = key
                    best_pos = int(pos)
        s_star = int(starts[best_pos])
        f_best[t] = best
        taus_of[t] = taus_of[s_star] if s_star == 0 else taus_of[s_star] + (s_star - 1,)

        if prune:
            dominated = (vals - per_change + prune_slack > best) & (
                cand_expiry[:n_cand] == never
            )
            if dominated.any():
                cand_expiry[:n_cand][dominated] = t + msl

    taus = taus_of[n]
    assert taus is not None
    return ChangePointSet(
        taus=taus,
        total_cost=_objective(stats, taus, penalty, penalty_scale),
        penalty=penalty,
        min_seg_len=min_seg_len,
    )
