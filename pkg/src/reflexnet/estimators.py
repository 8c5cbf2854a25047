"""scikit-learn style wrappers around the observables and the calibration loop."""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import ScenarioConfig
from .runner import calibrate, calibration_report
from .viewer import ReferenceTrace, average_series, instantaneous_frequency, psth
from .validation import check_series, check_spike_train, check_times


class InstantaneousFrequencyTransformer(TransformerMixin, BaseEstimator):
    """Spike train -> (n - 1, 2) array of ``time_ms, frequency_hz`` rows."""

    def fit(self, X, y=None):
        check_spike_train(X)
        return self

    def transform(self, X):
        series = instantaneous_frequency(check_spike_train(X))
        return np.column_stack([series.times, series.freqs]) if len(series) else np.empty((0, 2))


class PSTHTransformer(TransformerMixin, BaseEstimator):
    """Spike train -> PSTH counts around ``stimulus_times``."""

    def __init__(self, stimulus_times=(0.0,), bin_width=1.0, window=(0.0, 100.0)):
        self.stimulus_times = stimulus_times
        self.bin_width = bin_width
        self.window = window

    def fit(self, X, y=None):
        check_spike_train(X)
        self.bin_starts_ = psth([], [], self.bin_width, tuple(self.window)).bin_starts
        return self

    def transform(self, X):
        check_is_fitted(self, "bin_starts_")
        hist = psth(check_spike_train(X), check_times(self.stimulus_times), self.bin_width, tuple(self.window))
        return hist.counts


class ReflexCalibrator(BaseEstimator):
    """Self-organizes the configured network until its motoneuron matches a reference.

    ``fit`` takes the reference as an (n, 2) array of ``time_ms, frequency_hz``
    rows; ``predict`` returns the calibrated network's trial-averaged
    frequency at the requested relative times.
    """

    def __init__(self, config: ScenarioConfig | None = None, max_trials=None, seed=None):
        self.config = config
        self.max_trials = max_trials
        self.seed = seed

    def _config(self) -> ScenarioConfig:
        if self.config is None:
            raise ValueError("ReflexCalibrator needs a ScenarioConfig")
        cfg = self.config
        if self.seed is not None:
            cfg = cfg.replace(seed=int(self.seed))
        if self.max_trials is not None:
            cfg = cfg.replace(calibration=dataclasses.replace(cfg.calibration, max_trials=int(self.max_trials)))
        return cfg

    def fit(self, X, y=None):
        arr = check_series(X)
        cfg = self._config()
        self.reference_ = ReferenceTrace(arr[:, 0], arr[:, 1], tolerance=cfg.viewer.epsilon)
        sim, errors, log = calibrate(cfg, self.reference_)
        self.network_ = sim.network
        self.log_ = log
        self.report_ = calibration_report(cfg, sim, errors, log, 0.0)
        tail = [o.series for o in sim.observations[-cfg.calibration.convergence_window:]]
        self.series_ = average_series(tail)
        self.converged_ = self.report_.converged
        return self

    def predict(self, X):
        check_is_fitted(self, "series_")
        t = check_times(X)
        if len(self.series_) == 0:
            return np.zeros_like(t)
        return np.interp(t, self.series_.times, self.series_.freqs)

    def score(self, X, y=None):
        """Negative mean relative error of the prediction against ``X``."""
        arr = check_series(X)
        pred = self.predict(arr[:, 0])
        ref = arr[:, 1]
        rel = np.where(ref > 0, np.minimum(1.0, np.abs(pred - ref) / np.where(ref > 0, ref, 1.0)), (pred > 0) * 1.0)
        return -float(np.mean(rel))
