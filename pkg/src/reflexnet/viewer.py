"""Motor-unit observables and the reference comparison used by the WiringViewer."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .organization import NCS, NCSDirection, NCSKind

DEFAULT_EPSILON = 0.05
# relative-time resolution used to align spikes from different trials
TIME_DECIMALS = 6


class SpikeTrainError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencySeries:
    times: tuple[float, ...] = ()
    freqs: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.times)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.freqs))

    def shifted(self, offset: float) -> "FrequencySeries":
        return FrequencySeries(tuple(t + offset for t in self.times), self.freqs)


@dataclass(frozen=True)
class ReferenceTrace:
    times: tuple[float, ...]
    freqs: tuple[float, ...]
    source: str = "experimental"
    tolerance: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))
        if not self.times:
            raise ValueError("reference trace is empty")
        if len(self.times) != len(self.freqs):
            raise ValueError("reference times and frequencies differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("reference times must be strictly increasing")
        if any(f < 0 or not math.isfinite(f) for f in self.freqs):
            raise ValueError("reference frequencies must be finite and >= 0")
        if self.source not in ("experimental", "generated"):
            raise ValueError(f"unknown reference source {self.source!r}")

    @classmethod
    def from_series(cls, series: FrequencySeries, **kw) -> "ReferenceTrace":
        return cls(series.times, series.freqs, **kw)

    def at(self, t) -> np.ndarray:
        """Linear interpolation, clamped to the end values outside the span."""
        return np.interp(t, self.times, self.freqs)

    @property
    def nonzero(self) -> bool:
        return any(f > 0 for f in self.freqs)


def _check_increasing(spikes: Sequence[float]) -> list[float]:
    spikes = [float(s) for s in spikes]
    for a, b in zip(spikes, spikes[1:]):
        if not b > a:
            raise SpikeTrainError(f"spike times must be strictly increasing ({a} then {b})")
    return spikes


def instantaneous_frequency(spikes: Sequence[float]) -> FrequencySeries:
    """Reciprocal inter-spike interval in Hz, attached to the later spike."""
    spikes = _check_increasing(spikes)
    if len(spikes) < 2:
        return FrequencySeries()
    t = np.asarray(spikes)
    return FrequencySeries(tuple(t[1:].tolist()), tuple((1000.0 / np.diff(t)).tolist()))


@dataclass
class Psth:
    bin_width: float
    window: tuple[float, float]
    counts: np.ndarray
    trials: int

    @property
    def bin_starts(self) -> np.ndarray:
        return self.window[0] + self.bin_width * np.arange(len(self.counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def psth(
    spikes: Sequence[float],
    stimulus_times: Sequence[float],
    bin_width: float,
    window: tuple[float, float],
) -> Psth:
    """Peristimulus time histogram over half-open bins ``[lo + i*w, lo + (i+1)*w)``.

    ``window`` is given relative to each stimulus; a spike is counted once
    for every stimulus whose window contains it.
    """
    lo, hi = window
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if not hi > lo:
        raise ValueError(f"PSTH window must satisfy lo < hi, got {window}")
    n_bins = max(1, math.ceil((hi - lo) / bin_width - 1e-9))
    counts = np.zeros(n_bins, dtype=np.int64)
    spikes = np.asarray(spikes, dtype=float)
    for t_stim in stimulus_times:
        rel = spikes - t_stim
        rel = rel[(rel >= lo) & (rel < hi)]
        idx = np.floor((rel - lo) / bin_width).astype(np.int64)
        np.add.at(counts, np.clip(idx, 0, n_bins - 1), 1)
    return Psth(float(bin_width), (float(lo), float(hi)), counts, len(stimulus_times))


def relative_error(f_obs: float, f_ref: float) -> float:
    if f_ref == 0:
        return 0.0 if f_obs == 0 else 1.0
    return min(1.0, abs(f_obs - f_ref) / f_ref)


def compare(
    observed: FrequencySeries,
    reference: ReferenceTrace,
    epsilon: float | None = None,
    origin: str = "viewer",
    window: tuple[float, float] = (0.0, 0.0),
) -> list[NCS]:
    """InstantFrequency NCSs for every observed point outside the good band."""
    eps = reference.tolerance if epsilon is None else epsilon
    if len(observed) == 0:
        if reference.nonzero:
            return [NCS(NCSKind.INSTANT_FREQUENCY, NCSDirection.TOO_LOW, 1.0, origin, window)]
        return []
    f_ref = reference.at(np.asarray(observed.times))
    out = []
    for f_obs, ref in zip(observed.freqs, f_ref.tolist()):
        if abs(f_obs - ref) <= eps * ref:
            continue
        direction = NCSDirection.TOO_LOW if f_obs < ref else NCSDirection.TOO_HIGH
        out.append(
            NCS(NCSKind.INSTANT_FREQUENCY, direction, relative_error(f_obs, ref), origin, window)
        )
    return out


def trial_error(observed: FrequencySeries, reference: ReferenceTrace) -> float:
    """Mean relative frequency error of one trial; 1.0 for a silent trial."""
    if len(observed) == 0:
        return 1.0 if reference.nonzero else 0.0
    f_ref = reference.at(np.asarray(observed.times)).tolist()
    return float(np.mean([relative_error(o, r) for o, r in zip(observed.freqs, f_ref)]))


def trial_series(spikes: Sequence[float], t_stim: float, window_ms: float) -> FrequencySeries:
    """Instantaneous frequency of the spikes in ``[t_stim, t_stim + window_ms)``, relative to ``t_stim``."""
    inside = [s - t_stim for s in spikes if t_stim <= s < t_stim + window_ms]
    return instantaneous_frequency(inside)


def average_series(per_trial: Sequence[FrequencySeries]) -> FrequencySeries:
    """Mean frequency at each relative time across trials (times aligned to 1e-6 ms)."""
    groups: dict[float, list[float]] = defaultdict(list)
    for series in per_trial:
        for t, f in series.points():
            groups[round(t, TIME_DECIMALS)].append(f)
    times = sorted(groups)
    return FrequencySeries(tuple(times), tuple(float(np.mean(groups[t])) for t in times))


@dataclass
class TrialObservation:
    index: int
    t_stim: float
    series: FrequencySeries
    ncs: list[NCS] = field(default_factory=list)
    error: float | None = None
