"""Random-forest quantile forecasting of load and PV.

Quantiles come from the spread of the individual tree predictions, not from a
quantile loss: each tree is fit on its own bootstrap resample, so the ensemble
of leaf means is an empirical predictive distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .physics import WeatherParams, WeatherSample, expected_weather, hour_of_day

LAGS = (1, 2, 3, 24)
MIN_HISTORY = 25  # deepest lag (24) plus the 25-tick trend
QUANTILES = (0.05, 0.50, 0.95)
FEATURE_NAMES = (
    "lag1", "lag2", "lag3", "lag24", "ma3", "ma24", "trend",
    "ghi", "ambient_temp_c", "sin_hour", "cos_hour", "sin_dow", "cos_dow",
)


class InsufficientHistory(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


class UntrainedModel(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    lags: tuple[float, ...]
    moving_averages: tuple[float, float]
    trend: float
    ghi: float
    ambient_temp_c: float
    sin_hour: float
    cos_hour: float
    sin_dow: float
    cos_dow: float

    def to_array(self) -> np.ndarray:
        return np.array(
            [*self.lags, *self.moving_averages, self.trend, self.ghi, self.ambient_temp_c,
             self.sin_hour, self.cos_hour, self.sin_dow, self.cos_dow],
            dtype=np.float64,
        )


@dataclass
class History:
    """Realized per-tick series, index = tick."""

    load_kw: list[float] = field(default_factory=list)
    pv_kw: list[float] = field(default_factory=list)
    weather: list[WeatherSample] = field(default_factory=list)

    def append(self, load_kw: float, pv_kw: float, weather: WeatherSample) -> None:
        if weather.tick != len(self.load_kw):
            raise ValueError(f"history expects tick {len(self.load_kw)}, got {weather.tick}")
        self.load_kw.append(load_kw)
        self.pv_kw.append(pv_kw)
        self.weather.append(weather)

    def __len__(self) -> int:
        return len(self.load_kw)


def cyclical(tick: int) -> tuple[float, float, float, float]:
    h = 2.0 * math.pi * hour_of_day(tick) / 24.0
    d = 2.0 * math.pi * ((tick // 24) % 7) / 7.0
    return math.sin(h), math.cos(h), math.sin(d), math.cos(d)


def series_features(values, t: int, weather: WeatherSample) -> FeatureVector:
    """Features for predicting ``values[t]`` from ``values[:t]``."""
    if t < MIN_HISTORY or len(values) < t:
        raise InsufficientHistory(f"need {MIN_HISTORY} ticks of history before tick {t}")
    lags = tuple(float(values[t - k]) for k in LAGS)
    ma3 = float(np.mean(values[t - 3:t]))
    ma24 = float(np.mean(values[t - 24:t]))
    trend = float(values[t - 1] - values[t - 25])
    return FeatureVector(lags, (ma3, ma24), trend, weather.ghi, weather.ambient_temp_c, *cyclical(t))


def build_features(history: History, t: int, weather: WeatherSample | None = None) -> tuple[FeatureVector, FeatureVector]:
    """Load and PV feature vectors for target tick ``t``.

    ``weather`` defaults to the realized sample at ``t``, which must then
    already be in ``history``.
    """
    if weather is None:
        if t >= len(history.weather):
            raise InsufficientHistory(f"no weather recorded for tick {t}")
        weather = history.weather[t]
    return series_features(history.load_kw, t, weather), series_features(history.pv_kw, t, weather)


# --------------------------------------------------------------------------
# Forest
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    max_depth: int = 8
    min_leaf_size: int = 5
    feature_subsample_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        if self.tree_count < 2:
            raise ValueError("treeCount: quantiles need at least two trees")
        if not 0 < self.feature_subsample_fraction <= 1:
            raise ValueError("featureSubsampleFraction: must lie in (0, 1]")


@dataclass
class ForestModel:
    trees: list
    tree_count: int
    max_depth: int
    min_leaf_size: int
    feature_subsample_fraction: float
    bootstrap_seed: int

    def tree_predictions(self, x: np.ndarray) -> np.ndarray:
        """Per-tree predictions, shape ``(tree_count, n_samples)``."""
        if not self.trees:
            raise UntrainedModel("forest has no trees")
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float32)
        return np.stack([t.predict(x, check_input=False) for t in self.trees])


def train_forest(samples, config: ForestConfig = ForestConfig(), seed: int = 0) -> ForestModel:
    """Fit a bagged forest on ``[(FeatureVector | array, target), ...]``."""
    if len(samples) < 2 * config.min_leaf_size:
        raise InsufficientSamples(f"need at least {2 * config.min_leaf_size} samples, got {len(samples)}")
    x = np.array([s.to_array() if isinstance(s, FeatureVector) else np.asarray(s, float) for s, _ in samples])
    y = np.array([target for _, target in samples], dtype=np.float64)
    rf = RandomForestRegressor(
        n_estimators=config.tree_count,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_leaf_size,
        max_features=config.feature_subsample_fraction,
        bootstrap=True,
        random_state=seed,
        n_jobs=1,
    )
    rf.fit(x.astype(np.float32), y)
    return ForestModel(
        list(rf.estimators_), config.tree_count, config.max_depth, config.min_leaf_size,
        config.feature_subsample_fraction, seed,
    )


def empirical_quantiles(values, qs=QUANTILES) -> tuple[float, ...]:
    # numpy's default "linear" method: h = (n - 1) q, interpolate between order statistics.
    return tuple(float(v) for v in np.quantile(np.asarray(values, float), qs))


def predict_quantiles(model: ForestModel, features, nonnegative: bool = True) -> tuple[float, float, float]:
    x = features.to_array() if isinstance(features, FeatureVector) else np.asarray(features, float)
    preds = model.tree_predictions(x)[:, 0]
    q05, q50, q95 = empirical_quantiles(preds)
    if nonnegative:
        q05, q50, q95 = max(q05, 0.0), max(q50, 0.0), max(q95, 0.0)
    return q05, q50, q95


# --------------------------------------------------------------------------
# Multi-step forecasting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForecastBundle:
    start_tick: int
    horizon: int
    load_q05: tuple[float, ...]
    load_q50: tuple[float, ...]
    load_q95: tuple[float, ...]
    pv_q05: tuple[float, ...]
    pv_q50: tuple[float, ...]
    pv_q95: tuple[float, ...]

    def __post_init__(self):
        for lo, mid, hi in ((self.load_q05, self.load_q50, self.load_q95), (self.pv_q05, self.pv_q50, self.pv_q95)):
            if not len(lo) == len(mid) == len(hi) == self.horizon:
                raise ValueError("every quantile trajectory must have `horizon` steps")
            for a, b, c in zip(lo, mid, hi):
                if not 0.0 <= a <= b <= c:
                    raise ValueError(f"quantiles out of order or negative: {a}, {b}, {c}")

    @classmethod
    def deterministic(cls, start_tick: int, load_kw, pv_kw) -> ForecastBundle:
        load, pv = tuple(float(v) for v in load_kw), tuple(float(v) for v in pv_kw)
        return cls(start_tick, len(load), load, load, load, pv, pv, pv)


def training_set(values, history: History, t: int, window: int):
    first = max(MIN_HISTORY, t - window)
    return [(series_features(values, k, history.weather[k]), values[k]) for k in range(first, t)]


@dataclass
class Forecaster:
    """Retrains one forest per series at every call and rolls it forward."""

    weather_params: WeatherParams
    config: ForestConfig = field(default_factory=ForestConfig)
    window: int = 168
    warmup_tick: int = 168

    def forecast(self, history: History, t: int, horizon: int, seed: int = 0) -> ForecastBundle:
        """Quantile trajectories for ticks ``t .. t + horizon - 1``.

        Lags come from realized values before ``t``; later steps feed back the
        median. Weather at ``t`` is the observed sample when available, later
        steps use the noise-free diurnal model.
        """
        if t < self.warmup_tick or t < MIN_HISTORY + 2 * self.config.min_leaf_size or len(history) < t:
            raise InsufficientHistory(f"cannot forecast at tick {t}")
        load_model = train_forest(training_set(history.load_kw, history, t, self.window), self.config, seed)
        pv_model = train_forest(training_set(history.pv_kw, history, t, self.window), self.config, seed + 1)

        load = list(history.load_kw[:t])
        pv = list(history.pv_kw[:t])
        out = {k: [] for k in ("l05", "l50", "l95", "p05", "p50", "p95")}
        for step in range(horizon):
            k = t + step
            if k < len(history.weather):
                w = history.weather[k]
            else:
                w = expected_weather(self.weather_params, k)
            lq = predict_quantiles(load_model, series_features(load, k, w))
            if w.ghi <= 0.0:
                pq = (0.0, 0.0, 0.0)
            else:
                pq = predict_quantiles(pv_model, series_features(pv, k, w))
            for key, v in zip(("l05", "l50", "l95"), lq):
                out[key].append(v)
            for key, v in zip(("p05", "p50", "p95"), pq):
                out[key].append(v)
            load.append(lq[1])
            pv.append(pq[1])
        return ForecastBundle(
            t, horizon,
            tuple(out["l05"]), tuple(out["l50"]), tuple(out["l95"]),
            tuple(out["p05"]), tuple(out["p50"]), tuple(out["p95"]),
        )


def persistence_forecast(values, t: int, lag: int = 24) -> float:
    if t < lag:
        raise InsufficientHistory(f"persistence needs {lag} ticks of history")
    return float(values[t - lag])
