"""Competing ensemble-decomposition cleaning methods.

Subset rules rebuild a signal from a chosen set of IMFs (the residual is
always excluded); the oracle selector exhaustively searches a rule family
for the best residual sum of squares against a known truth, giving each
family its performance upper bound.  The wavelet-style baselines
threshold each IMF against the universal threshold with a MAD noise
estimate, either sample by sample (hard) or whole inter-zero-crossing
intervals at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emd import Decomposition, _as_1d_float
from .simulation import rss

_MAD_TO_SIGMA = 0.6745


@dataclass(frozen=True)
class KHighest:
    """Keep the k highest-numbered (lowest-frequency) IMFs."""

    k: int


@dataclass(frozen=True)
class LLowest:
    """Keep the l lowest-numbered (highest-frequency) IMFs."""

    l: int


@dataclass(frozen=True)
class Band:
    """Keep the contiguous 1-based index window [lo, hi]; lo > hi keeps none."""

    lo: int
    hi: int


@dataclass(frozen=True)
class ExplicitSet:
    """Keep exactly the given 1-based IMF indices."""

    indices: frozenset[int]


SubsetRule = KHighest | LLowest | Band | ExplicitSet

ORACLE_FAMILIES = ("khigh", "llow", "band", "powerset")


def retained_indices(rule: SubsetRule, n_imfs: int) -> frozenset[int]:
    """1-based IMF indices the rule keeps out of ``n_imfs`` available."""
    if isinstance(rule, KHighest):
        if not 0 <= rule.k <= n_imfs:
            raise ValueError("k must lie in [0, n_imfs]")
        return frozenset(range(n_imfs - rule.k + 1, n_imfs + 1))
    if isinstance(rule, LLowest):
        if not 0 <= rule.l <= n_imfs:
            raise ValueError("l must lie in [0, n_imfs]")
        return frozenset(range(1, rule.l + 1))
    if isinstance(rule, Band):
        if rule.lo > rule.hi:
            return frozenset()
        if rule.lo < 1 or rule.hi > n_imfs:
            raise ValueError("band window out of range")
        return frozenset(range(rule.lo, rule.hi + 1))
    if isinstance(rule, ExplicitSet):
        if not all(1 <= j <= n_imfs for j in rule.indices):
            raise ValueError("explicit indices out of range")
        return frozenset(rule.indices)
    raise TypeError(f"unknown subset rule {rule!r}")


def keep_subset(d: Decomposition, rule: SubsetRule) -> np.ndarray:
    """Sum of the retained IMFs only; an empty selection returns zeros."""
    kept = retained_indices(rule, d.n_imfs)
    out = np.zeros(d.source_len)
    for imf in d.imfs:
        if imf.index in kept:
            out += imf.samples
    return out


def _family_rules(family: str, n_imfs: int):
    if family == "khigh":
        return [KHighest(k) for k in range(n_imfs + 1)]
    if family == "llow":
        return [LLowest(l) for l in range(n_imfs + 1)]
    if family == "band":
        rules = [Band(1, 0)]
        rules.extend(Band(lo, hi) for lo in range(1, n_imfs + 1) for hi in range(lo, n_imfs + 1))
        return rules
    if family == "powerset":
        if n_imfs > 20:
            raise ValueError("subset explosion: powerset search is capped at 20 imfs")
        rules = []
        for mask in range(2**n_imfs):
            rules.append(ExplicitSet(frozenset(j + 1 for j in range(n_imfs) if mask >> j & 1)))
        return rules
    raise ValueError(f"unknown rule family {family!r}; expected one of {ORACLE_FAMILIES}")


def oracle_select(d: Decomposition, truth, family: str) -> tuple[SubsetRule, float]:
    """Best rule in a family by residual sum of squares against ``truth``.

    Ties prefer the smaller retained set, then the lexicographically
    smallest index tuple, so the result is deterministic.
    """
    truth = _as_1d_float(truth, "truth")
    if truth.size != d.source_len:
        raise ValueError("truth length does not match the decomposition")
    best_rule = None
    best_rss = np.inf
    best_key: tuple[int, tuple[int, ...]] | None = None
    for rule in _family_rules(family, d.n_imfs):
        value = rss(keep_subset(d, rule), truth)
        kept = tuple(sorted(retained_indices(rule, d.n_imfs)))
        key = (len(kept), kept)
        if value < best_rss or (value == best_rss and key < best_key):
            best_rule, best_rss, best_key = rule, value, key
    assert best_rule is not None
    return best_rule, best_rss


def noise_sigma(imf) -> float:
    """Robust noise scale: median absolute deviation over 0.6745."""
    x = _as_1d_float(imf, "imf")
    if x.size == 0:
        raise ValueError("empty series")
    return float(np.median(np.abs(x - np.median(x))) / _MAD_TO_SIGMA)


def _universal_threshold(x: np.ndarray) -> float:
    return noise_sigma(x) * np.sqrt(2.0 * np.log(x.size)) if x.size > 1 else 0.0


def wavelet_hard_threshold(imf) -> np.ndarray:
    """Zero every sample at or below the universal threshold."""
    x = _as_1d_float(imf, "imf")
    if x.size == 0:
        raise ValueError("empty series")
    out = x.copy()
    out[np.abs(x) <= _universal_threshold(x)] = 0.0
    return out


def wavelet_interval_threshold(imf) -> np.ndarray:
    """Keep or zero whole inter-zero-crossing intervals.

    The IMF is partitioned at its zero crossings; an interval survives in
    its entirety when its extremum magnitude exceeds the universal
    threshold, otherwise the whole interval is zeroed.
    """
    x = _as_1d_float(imf, "imf")
    if x.size == 0:
        raise ValueError("empty series")
    threshold = _universal_threshold(x)
    signs = np.sign(x)
    # exact zeros extend the preceding interval
    idx = np.where(signs != 0, np.arange(x.size), -1)
    np.maximum.accumulate(idx, out=idx)
    filled = np.where(idx >= 0, signs[np.maximum(idx, 0)], 0.0)
    cuts = np.flatnonzero((filled[:-1] != filled[1:]) & (filled[:-1] != 0) & (filled[1:] != 0)) + 1
    bounds = np.concatenate(([0], cuts, [x.size]))
    out = np.zeros_like(x)
    for a, b in zip(bounds[:-1], bounds[1:]):
        if np.abs(x[a:b]).max() > threshold:
            out[a:b] = x[a:b]
    return out
