"""Empirical mode decomposition, plain and noise-ensembled.

A signal is split into intrinsic mode functions (IMFs) by repeatedly
sifting: subtract the mean of the upper and lower extrema envelopes until
the component oscillates about zero, then peel it off and continue on the
remainder.  The ensemble variant (EEMD) repeats the decomposition over
many independently noise-perturbed copies of the input and averages the
IMFs index by index, which stabilises mode mixing on noisy recordings.

Envelopes are natural cubic splines through the local extrema, with the
two extrema nearest each endpoint mirrored across it to suppress end
swings.  Sifting stops once the extrema/zero-crossing counts differ by at
most one for ``s_number`` consecutive iterations (S-stoppage).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgtsv

_SEED_MASK = 2**64 - 1


class MonotonicComponent(ValueError):
    """Raised when a series has too few extrema to build both envelopes."""


def _as_1d_float(values, name: str = "series") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real-valued signal.

    Parameters
    ----------
    samples : array_like
        The raw sample values.
    dt : float, optional
        Sample interval in seconds (default 1.0).
    """

    samples: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_copy(_as_1d_float(self.samples, "samples")))
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True, eq=False)
class Imf:
    """One intrinsic mode function.

    ``index`` is the 1-based extraction order (highest frequency first).
    ``truncated`` marks components whose sifting hit the iteration cap
    before S-stoppage confirmed convergence.
    """

    samples: np.ndarray
    index: int
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_copy(_as_1d_float(self.samples, "samples")))
        if self.index < 1:
            raise ValueError("imf index is 1-based")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Ordered IMFs plus the residual of one source signal."""

    imfs: tuple[Imf, ...]
    residual: np.ndarray
    source_len: int
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "residual", _frozen_copy(_as_1d_float(self.residual, "residual")))
        if self.residual.size != self.source_len:
            raise ValueError("residual length does not match source length")
        for imf in self.imfs:
            if imf.samples.size != self.source_len:
                raise ValueError("imf length does not match source length")

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def imf_matrix(self) -> np.ndarray:
        """IMFs stacked as rows, shape ``(n_imfs, source_len)``."""
        if not self.imfs:
            return np.zeros((0, self.source_len))
        return np.stack([imf.samples for imf in self.imfs])


@dataclass(frozen=True)
class EmdConfig:
    """Decomposition settings.

    ``ensemble_size=1`` with ``noise_amplitude=0`` reduces the ensemble
    variant to a plain decomposition.  ``max_imfs=None`` caps extraction
    at ``floor(log2(n)) - 1``, the usual dyadic bound.
    """

    s_number: int = 4
    max_sift_iters: int = 50
    max_imfs: int | None = None
    ensemble_size: int = 100
    noise_amplitude: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.s_number < 1:
            raise ValueError("s_number must be at least 1")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be at least 1")
        if self.max_imfs is not None and self.max_imfs < 1:
            raise ValueError("max_imfs must be at least 1 (or None for auto)")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be at least 1")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be nonnegative")


def find_extrema(series) -> tuple[np.ndarray, np.ndarray]:
    """Locate strict interior extrema by three-point comparison.

    Flat runs count once, at the run midpoint.  Returns ascending index
    arrays ``(maxima, minima)``.
    """
    x = _as_1d_float(series)
    if x.size < 3:
        raise ValueError("series too short: extrema detection needs at least 3 samples")
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    s = np.sign(d[nz])
    flips = np.flatnonzero(s[:-1] != s[1:])
    lefts = nz[flips] + 1
    rights = nz[flips + 1]
    mids = ((lefts + rights) // 2).astype(np.intp)
    rising = s[flips] > 0
    return mids[rising], mids[~rising]


def _zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    s = s[s != 0]
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s[:-1] != s[1:]))


def _spline_second_derivs(xk: np.ndarray, yk: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Knot second derivatives of the natural cubic spline (plus h, dy)."""
    n = xk.size
    h = np.diff(xk)
    dy = np.diff(yk) / h
    diag = np.empty(n)
    diag[0] = 1.0
    diag[-1] = 1.0
    diag[1:-1] = 2.0 * (h[:-1] + h[1:])
    upper = np.zeros(n - 1)
    upper[1:] = h[1:]
    lower = np.zeros(n - 1)
    lower[:-1] = h[:-1]
    rhs = np.zeros(n)
    rhs[1:-1] = 6.0 * (dy[1:] - dy[:-1])
    _, _, _, m, info = dgtsv(lower, diag, upper, rhs, 1, 1, 1, 1)
    if info != 0:
        raise ArithmeticError("tridiagonal spline solve failed")
    return m, h, dy


def _natural_spline(xk: np.ndarray, yk: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Evaluate the natural cubic spline through ``(xk, yk)`` at ``xq``."""
    n = xk.size
    m, h, dy = _spline_second_derivs(xk, yk)
    i = np.clip(np.searchsorted(xk, xq, side="right") - 1, 0, n - 2)
    t = xq - xk[i]
    hi = h[i]
    a3 = (m[i + 1] - m[i]) / (6.0 * hi)
    a2 = m[i] / 2.0
    a1 = dy[i] - hi * (2.0 * m[i] + m[i + 1]) / 6.0
    return yk[i] + t * (a1 + t * (a2 + t * a3))


_GRID_CACHE: dict[int, np.ndarray] = {}


def _query_grid(n: int) -> np.ndarray:
    grid = _GRID_CACHE.get(n)
    if grid is None:
        grid = np.arange(n, dtype=float)
        grid.setflags(write=False)
        if len(_GRID_CACHE) < 64:
            _GRID_CACHE[n] = grid
    return grid


def _integer_grid_spline(xk: np.ndarray, yk: np.ndarray, n_query: int) -> np.ndarray:
    """Natural spline evaluated at 0..n_query-1 for integer-valued knots."""
    m, h, dy = _spline_second_derivs(xk, yk)
    a0 = yk[:-1]
    a1 = dy - h * (2.0 * m[:-1] + m[1:]) / 6.0
    a2 = 0.5 * m[:-1]
    a3 = (m[1:] - m[:-1]) / (6.0 * h)
    edges = np.clip(xk.astype(np.intp), 0, n_query)
    i = np.repeat(np.arange(xk.size - 1), np.diff(edges))
    t = _query_grid(n_query) - xk[i]
    return a0[i] + t * (a1[i] + t * (a2[i] + t * a3[i]))


def _envelope_from_extrema(x: np.ndarray, maxima: np.ndarray, minima: np.ndarray) -> np.ndarray:
    end = x.size - 1

    def fit(ext: np.ndarray) -> np.ndarray:
        # mirror the two nearest extrema across each endpoint
        k = ext.size
        pos = np.empty(k + 4, dtype=float)
        pos[0] = -ext[1]
        pos[1] = -ext[0]
        pos[2:-2] = ext
        pos[-2] = 2 * end - ext[-1]
        pos[-1] = 2 * end - ext[-2]
        vals = np.empty(k + 4)
        vals[0] = x[ext[1]]
        vals[1] = x[ext[0]]
        vals[2:-2] = x[ext]
        vals[-2] = x[ext[-1]]
        vals[-1] = x[ext[-2]]
        return _integer_grid_spline(pos, vals, x.size)

    return 0.5 * (fit(maxima) + fit(minima))


def envelope_mean(series) -> np.ndarray:
    """Mean of the upper and lower extrema envelopes.

    Raises ``MonotonicComponent`` when fewer than 2 maxima or 2 minima
    exist, which signals that sifting has nothing left to extract.
    """
    x = _as_1d_float(series)
    maxima, minima = find_extrema(x)
    if maxima.size < 2 or minima.size < 2:
        raise MonotonicComponent(
            "monotonic component: envelope needs at least 2 maxima and 2 minima"
        )
    return _envelope_from_extrema(x, maxima, minima)


def sift(series, config: EmdConfig | None = None, index: int = 1) -> Imf:
    """Extract one IMF by iterative envelope-mean subtraction.

    The candidate is refined until ``|#extrema - #zero crossings| <= 1``
    holds for ``s_number`` consecutive iterations or the iteration cap is
    reached (which sets the ``truncated`` flag).
    """
    config = config or EmdConfig()
    h = _as_1d_float(series).copy()
    maxima, minima = find_extrema(h)
    if maxima.size < 2 or minima.size < 2:
        raise MonotonicComponent(
            "monotonic component: envelope needs at least 2 maxima and 2 minima"
        )
    streak = 0
    truncated = True
    for _ in range(config.max_sift_iters):
        h -= _envelope_from_extrema(h, maxima, minima)
        maxima, minima = find_extrema(h)
        n_ext = maxima.size + minima.size
        if abs(n_ext - _zero_crossings(h)) <= 1:
            streak += 1
        else:
            streak = 0
        if streak >= config.s_number:
            truncated = False
            break
        if maxima.size < 2 or minima.size < 2:
            # nothing left to refine against; accept the component as-is
            truncated = False
            break
    return Imf(samples=h, index=index, truncated=truncated)


def _coerce_series(series) -> TimeSeries:
    return series if isinstance(series, TimeSeries) else TimeSeries(series)


def _validate_input(x: np.ndarray) -> None:
    if x.size < 4:
        raise ValueError("series too short: decomposition needs at least 4 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid samples: input contains non-finite values")


def _auto_max_imfs(n: int) -> int:
    return max(1, int(math.floor(math.log2(n))) - 1)


def emd(series, config: EmdConfig | None = None) -> Decomposition:
    """Plain empirical mode decomposition.

    IMFs are extracted by repeated sift-and-subtract until the remainder
    has too few extrema to envelope (it is then monotonic or nearly so)
    or the IMF cap is reached.  The sum of the IMFs and the residual
    reproduces the input to floating-point accuracy.
    """
    config = config or EmdConfig()
    ts = _coerce_series(series)
    x = ts.samples
    _validate_input(x)
    cap = config.max_imfs if config.max_imfs is not None else _auto_max_imfs(x.size)

    imfs: list[Imf] = []
    diagnostics: list[str] = []
    remainder = x.copy()
    while len(imfs) < cap:
        maxima, minima = find_extrema(remainder)
        if maxima.size < 2 or minima.size < 2:
            break
        imf = sift(remainder, config, index=len(imfs) + 1)
        if imf.truncated:
            diagnostics.append(
                f"imf {imf.index}: sifting stopped at max_sift_iters={config.max_sift_iters}"
            )
        imfs.append(imf)
        remainder = remainder - imf.samples
    return Decomposition(tuple(imfs), remainder, x.size, tuple(diagnostics))


def eemd(series, config: EmdConfig | None = None, workers: int = 1) -> Decomposition:
    """Noise-ensembled decomposition.

    Each trial adds white Gaussian noise with standard deviation
    ``noise_amplitude * std(series)`` drawn from an RNG stream derived
    from ``(seed, trial index)``, so results are reproducible under any
    scheduling.  IMFs are averaged index by index across trials; trials
    that produced fewer IMFs contribute zeros at the missing indices.
    The residual closes the decomposition: it is the input minus the
    ensembled IMFs, so the additive identity is preserved exactly.
    """
    config = config or EmdConfig()
    ts = _coerce_series(series)
    x = ts.samples
    _validate_input(x)
    scale = config.noise_amplitude * float(np.std(x))
    seed = config.seed & _SEED_MASK

    def run_trial(k: int) -> Decomposition:
        rng = np.random.default_rng([seed, k])
        noisy = x + rng.normal(0.0, scale, x.size)
        return emd(TimeSeries(noisy, ts.dt), config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, range(config.ensemble_size)))
    else:
        trials = [run_trial(k) for k in range(config.ensemble_size)]

    width = max(t.n_imfs for t in trials)
    diagnostics: list[str] = []
    short = sum(1 for t in trials if t.n_imfs < width)
    if short:
        diagnostics.append(
            f"{short} of {config.ensemble_size} trials produced fewer than "
            f"{width} imfs; missing entries averaged as zeros"
        )
    truncations = sum(1 for t in trials for imf in t.imfs if imf.truncated)
    if truncations:
        diagnostics.append(f"{truncations} trial imfs hit max_sift_iters during sifting")

    if width == 0:
        return Decomposition((), x.copy(), x.size, tuple(diagnostics))

    stack = np.zeros((config.ensemble_size, width, x.size))
    for k, trial in enumerate(trials):
        for j, imf in enumerate(trial.imfs):
            stack[k, j] = imf.samples
    mean = stack.mean(axis=0)

    imfs = tuple(
        Imf(
            samples=mean[j],
            index=j + 1,
            truncated=any(t.n_imfs > j and t.imfs[j].truncated for t in trials),
        )
        for j in range(width)
    )
    # subtract sequentially so a degenerate ensemble matches emd() bit for bit
    residual = x.copy()
    for j in range(width):
        residual = residual - mean[j]
    return Decomposition(imfs, residual, x.size, tuple(diagnostics))


def reconstruct(d: Decomposition) -> np.ndarray:
    """Sum of all IMFs plus the residual, elementwise."""
    return np.sum(d.imf_matrix(), axis=0) + d.residual


def orthogonality_index(d: Decomposition) -> float:
    """Total cross-IMF leakage relative to the signal energy.

    Computes ``sum_t sum_{j != k} imf_j(t) imf_k(t) / sum_t x(t)^2`` with
    ``x`` the reconstruction; near zero when the IMFs are mutually
    orthogonal.
    """
    if d.n_imfs < 2:
        raise ValueError("orthogonality index needs at least 2 imfs")
    x = reconstruct(d)
    denom = float(np.sum(x * x))
    if denom == 0.0:
        raise ValueError("degenerate signal: zero energy")
    matrix = d.imf_matrix()
    total = np.sum(matrix, axis=0)
    cross = float(np.sum(total * total - np.sum(matrix * matrix, axis=0)))
    return cross / denom
