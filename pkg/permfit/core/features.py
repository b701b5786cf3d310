"""
Predictor construction for functional inputs: Fourier-basis coefficients of
sensor time series, and the velocity-accuracy (VA) index used as a serve response.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import InvalidParams, InvalidPoints, MissingColumn, NonFinite, ParseError, TooFewSamples

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("obs_id", "channel", "t_index", "value")
# nine for the deep target area, six and three for the neighbouring ones, one for in-but-elsewhere, zero for a fault
SERVE_POINTS = frozenset({0, 1, 3, 6, 9})


@dataclass(frozen=True, eq=False)
class SeriesRecord:
    """One channel (sensor x axis) of one observation, uniformly sampled."""
    obs_id: str
    channel: str
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if samples.size < 2:
            raise TooFewSamples(f"Series {self.obs_id}/{self.channel} has {samples.size} samples; need at least 2.")
        if not np.all(np.isfinite(samples)):
            raise NonFinite(f"Series {self.obs_id}/{self.channel} contains non-finite samples.")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


def fourier_basis(length: int, k: int) -> np.ndarray:
    """Columns [1, cos(2 pi j t / T), sin(2 pi j t / T) for j = 1..k] on t = 0..T-1, T = length."""
    t = np.arange(length, dtype=np.float64)
    angles = 2.0 * np.pi * np.outer(t, np.arange(1, k + 1)) / length
    basis = np.empty((length, 2 * k + 1))
    basis[:, 0] = 1.0
    basis[:, 1::2] = np.cos(angles)
    basis[:, 2::2] = np.sin(angles)
    return basis


def fourier_features(series: SeriesRecord, k: int) -> np.ndarray:
    """
    Least-squares coefficients of the series on the first k harmonics, ordered
    [constant, cos_1, sin_1, ..., cos_k, sin_k]. The observation window is one period.
    """
    length = series.samples.size
    if k < 1 or 2 * k + 1 > length:
        raise TooFewSamples(f"k={k} harmonics need 2k+1 <= series length, got length {length}.")
    coefficients, _, _, _ = scipy.linalg.lstsq(fourier_basis(length, k), series.samples, check_finite=False)
    return np.asarray(coefficients, dtype=np.float64)


def reconstruct(coefficients: np.ndarray, length: int) -> np.ndarray:
    """Evaluates the Fourier expansion given by fourier_features on the sampling grid."""
    k = (len(coefficients) - 1) // 2
    return fourier_basis(length, k) @ coefficients


def va_index(ball_velocity_kph: float, achieved_points: int) -> float:
    """Velocity-accuracy index: (velocity^2 / 100) * (points / 9)."""
    if achieved_points not in SERVE_POINTS:
        raise InvalidPoints(f"Points must be one of {sorted(SERVE_POINTS)}, got {achieved_points}.")
    if not ball_velocity_kph >= 0:
        raise InvalidParams(f"Ball velocity must be non-negative, got {ball_velocity_kph}.")
    return (ball_velocity_kph ** 2 / 100.0) * (achieved_points / 9.0)


def va_index_column(velocities: Iterable[float], points: Iterable[int]) -> np.ndarray:
    return np.array([va_index(float(v), p) for v, p in zip(velocities, points)], dtype=np.float64)


def read_series_csv(path: str) -> List[SeriesRecord]:
    """
    Reads the long-format series file (columns obs_id, channel, t_index, value).
    Samples of each (obs_id, channel) are ordered by t_index.
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8", dtype={"obs_id": str, "channel": str})
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(f"Cannot parse series file '{path}': {e}") from e

    for column in SERIES_COLUMNS:
        if column not in frame.columns:
            raise MissingColumn(f"Series file '{path}' lacks column '{column}'.")
    for column in ("t_index", "value"):
        numeric = pd.to_numeric(frame[column], errors="coerce")
        bad = numeric.isna()
        if bad.any():
            position = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"Non-numeric {column} in '{path}' at row {position + 2}.",
                             row=position + 2, column=column)
        frame[column] = numeric

    records = []
    for (obs_id, channel), group in frame.groupby(["obs_id", "channel"], sort=True):
        ordered = group.sort_values("t_index", kind="stable")
        records.append(SeriesRecord(str(obs_id), str(channel), ordered["value"].to_numpy()))
    logger.info(f"Read {len(records)} series from '{path}'.")
    return records


def series_design(records: Iterable[SeriesRecord], k: int) -> Tuple[List[str], np.ndarray]:
    """
    One predictor row per observation: the Fourier coefficients of each channel,
    channels in sorted order, concatenated. Every observation must carry the same channels.
    """
    by_obs: Dict[str, Dict[str, SeriesRecord]] = {}
    for record in records:
        by_obs.setdefault(record.obs_id, {})[record.channel] = record
    if not by_obs:
        raise TooFewSamples("No series records given.")

    obs_ids = sorted(by_obs)
    channels = sorted(by_obs[obs_ids[0]])
    rows = []
    for obs_id in obs_ids:
        if sorted(by_obs[obs_id]) != channels:
            raise MissingColumn(f"Observation '{obs_id}' has channels {sorted(by_obs[obs_id])}, expected {channels}.")
        rows.append(np.concatenate([fourier_features(by_obs[obs_id][ch], k) for ch in channels]))
    return obs_ids, np.vstack(rows)
