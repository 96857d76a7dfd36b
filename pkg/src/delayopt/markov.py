"""Continuous-time Markov chain over topology modes.

Generator validation, stationary distribution, and reproducible sample-path
generation with exponential holding times.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GeneratorError, ReducibleChainError, ValidationError

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


@dataclass
class GeneratorMatrix:
    """Validated transition-rate matrix (rows sum to zero, off-diagonal >= 0)."""

    rates: np.ndarray

    def __post_init__(self):
        self.rates = _validated_rates(self.rates)

    @property
    def n_states(self):
        return self.rates.shape[0]


def _validated_rates(rates) -> np.ndarray:
    y = np.asarray(rates, dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise DimensionError(f"generator must be square, got shape {y.shape}")
    s = y.shape[0]
    off = y.copy()
    np.fill_diagonal(off, 0.0)
    for p in range(s):
        if np.any(off[p] < 0):
            raise GeneratorError(f"generator row {p + 1} has a negative off-diagonal rate")
        row_sum = float(y[p].sum())
        if abs(row_sum) > ROW_SUM_TOL * max(1.0, float(np.abs(y[p]).max())):
            raise GeneratorError(f"generator row {p + 1} sums to {row_sum:.3e}, expected 0")
        if y[p, p] > 0:
            raise GeneratorError(f"generator row {p + 1} has a positive diagonal entry")
    return y


def validate_generator(rates) -> GeneratorMatrix:
    """Validate a transition-rate matrix and wrap it."""
    return GeneratorMatrix(rates)


@dataclass
class ModePath:
    """Piecewise-constant, right-continuous mode signal on [0, horizon].

    ``switch_times[k]`` is the start of segment k (the first one is 0) and
    ``mode_ids[k]`` its 1-based mode.  The last segment extends to ``horizon``.
    """

    switch_times: np.ndarray
    mode_ids: np.ndarray
    horizon: float

    def __post_init__(self):
        self.switch_times = np.asarray(self.switch_times, dtype=float)
        self.mode_ids = np.asarray(self.mode_ids, dtype=int)
        if self.switch_times.shape != self.mode_ids.shape:
            raise DimensionError("switch_times and mode_ids must align")
        if self.switch_times[0] != 0.0:
            raise ValidationError("mode path must start at time 0")
        if np.any(np.diff(self.switch_times) <= 0):
            raise ValidationError("switch times must be strictly increasing")
        if np.any(self.mode_ids[:-1] == self.mode_ids[1:]):
            raise ValidationError("consecutive segments must change mode")

    @property
    def n_segments(self):
        return len(self.mode_ids)

    def mode_at(self, t) -> np.ndarray:
        """Mode id at time(s) t (right-continuous)."""
        idx = np.searchsorted(self.switch_times, t, side="right") - 1
        return self.mode_ids[np.clip(idx, 0, self.n_segments - 1)]

    def segment_durations(self) -> np.ndarray:
        ends = np.append(self.switch_times[1:], self.horizon)
        return ends - self.switch_times

    def occupation_fractions(self, n_states: int) -> np.ndarray:
        durations = self.segment_durations()
        frac = np.zeros(n_states)
        for mode, dur in zip(self.mode_ids, durations):
            frac[mode - 1] += dur
        return frac / self.horizon

    def holding_times(self, n_states: int) -> dict:
        """Completed (uncensored) holding times grouped by state."""
        durations = self.segment_durations()[:-1]
        out = {p + 1: [] for p in range(n_states)}
        for mode, dur in zip(self.mode_ids[:-1], durations):
            out[mode].append(dur)
        return {p: np.asarray(v) for p, v in out.items()}

    def jump_counts(self, n_states: int) -> np.ndarray:
        counts = np.zeros((n_states, n_states), dtype=int)
        for a, b in zip(self.mode_ids[:-1], self.mode_ids[1:]):
            counts[a - 1, b - 1] += 1
        return counts


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Unique positive probability vector pi with pi @ rates = 0.

    Requires an irreducible chain; reducible generators are rejected because
    the stationary distribution is then not unique (or not positive).
    """
    y = gen.rates
    s = gen.n_states
    if s == 1:
        return np.array([1.0])
    from .graph import _strongly_connected

    if not _strongly_connected(y.T > 0):  # i hears j <=> rate j->i positive
        raise ReducibleChainError(
            "chain is reducible; stationary distribution is not unique"
        )
    _, _, vh = np.linalg.svd(y.T)
    pi = vh[-1]
    pi = pi / pi.sum()
    if np.any(pi <= 0):
        raise ReducibleChainError("stationary vector is not strictly positive")
    residual = float(np.linalg.norm(pi @ y))
    if residual > STATIONARY_TOL * max(1.0, float(np.abs(y).max())):
        raise ValidationError(f"stationary residual {residual:.2e} exceeds tolerance")
    return pi


def sample_mode_path(
    gen: GeneratorMatrix,
    initial_dist,
    horizon: float,
    seed: int,
) -> ModePath:
    """Draw one mode path: exponential holding times, embedded-chain jumps.

    The initial distribution is normalized (with a warning) if it does not
    sum to one.  Fully deterministic for a given seed.
    """
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    dist = np.asarray(initial_dist, dtype=float)
    if dist.shape != (gen.n_states,):
        raise DimensionError(
            f"initial distribution must have length {gen.n_states}"
        )
    if np.any(dist < 0) or dist.sum() <= 0:
        raise ValidationError("initial distribution must be nonnegative and nonzero")
    total = float(dist.sum())
    if abs(total - 1.0) > 1e-9:
        warnings.warn(
            f"initial mode distribution sums to {total:.4f}; normalizing",
            stacklevel=2,
        )
    dist = dist / total

    rng = np.random.default_rng(seed)
    y = gen.rates
    s = gen.n_states
    mode = int(rng.choice(s, p=dist))
    times = [0.0]
    ids = [mode + 1]
    t = 0.0
    while True:
        rate = -y[mode, mode]
        if rate <= 0:
            break  # absorbing state holds to the horizon
        t += rng.exponential(1.0 / rate)
        if t >= horizon:
            break
        jump_p = y[mode].copy()
        jump_p[mode] = 0.0
        jump_p /= rate
        mode = int(rng.choice(s, p=jump_p))
        times.append(t)
        ids.append(mode + 1)
    return ModePath(np.asarray(times), np.asarray(ids), float(horizon))
