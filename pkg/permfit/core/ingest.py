"""
Dataset ingestion from CSV.

Two inputs are understood:
- a plain table (header row, comma separated) whose response column is named on
  the command line; every other column becomes a predictor, in file order;
- a long-format series file plus a per-observation table, for functional predictors
  (Fourier coefficients) and either a plain response or the VA index.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import MissingColumn, ParseError
from .features import read_series_csv, series_design, va_index_column
from .models import Dataset, validate_dataset

logger = logging.getLogger(__name__)

OBS_ID_COLUMN = "obs_id"


def _read_table(path: str) -> pd.DataFrame:
    # Read everything as text so that non-numeric cells can be located exactly
    try:
        return pd.read_csv(path, encoding="utf-8", dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"'{path}' is empty.") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(f"Cannot parse '{path}': {e}") from e


def _numeric_column(frame: pd.DataFrame, column: str, path: str) -> np.ndarray:
    """Converts one text column to float64. Line numbers count the header as line 1."""
    text = frame[column].str.strip()
    values = pd.to_numeric(text, errors="coerce")
    # "nan"/"inf" parse as floats and are rejected later as non-finite
    bad = values.isna() & (text.str.lower() != "nan")
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        line = position + 2
        raise ParseError(f"Non-numeric value '{frame[column].iloc[position]}' in '{path}' "
                         f"at row {line}, column {column}.", row=line, column=column)
    return values.to_numpy(dtype=np.float64)


def ingest_csv(path: str, response_column: str) -> Dataset:
    """Reads a table and returns the validated Dataset (predictor column order preserved)."""
    frame = _read_table(path)
    if response_column not in frame.columns:
        raise MissingColumn(f"Response column '{response_column}' not found in '{path}' "
                            f"(columns: {list(frame.columns)}).")
    predictor_columns = [c for c in frame.columns if c != response_column]
    if not predictor_columns:
        raise MissingColumn(f"'{path}' has no predictor columns besides '{response_column}'.")

    X = np.column_stack([_numeric_column(frame, c, path) for c in predictor_columns])
    y = _numeric_column(frame, response_column, path)
    data = validate_dataset(X, y)
    logger.info(f"Loaded '{path}': n={data.n}, predictors {predictor_columns}, response '{response_column}'.")
    return data


def default_fourier_k(series_path: str) -> int:
    """Largest number of harmonics the shortest series in the file supports."""
    shortest = min(record.samples.size for record in read_series_csv(series_path))
    return max((shortest - 1) // 2, 1)


def ingest_functional(series_path: str, table_path: str, k: int,
                      response_column: Optional[str] = None,
                      va_columns: Optional[Tuple[str, str]] = None) -> Tuple[List[str], Dataset]:
    """
    Builds a Dataset from functional inputs: predictors are the Fourier coefficients
    of every channel of an observation, the response comes from table_path, keyed
    by obs_id. With va_columns=(velocity, points) the response is the VA index.
    Returns the observation ids in row order together with the Dataset.
    """
    if (response_column is None) == (va_columns is None):
        raise ValueError("Give exactly one of a response column or the VA index columns.")

    obs_ids, X = series_design(read_series_csv(series_path), k)

    table = _read_table(table_path)
    needed = [OBS_ID_COLUMN] + ([response_column] if response_column else list(va_columns))
    for column in needed:
        if column not in table.columns:
            raise MissingColumn(f"Column '{column}' not found in '{table_path}'.")
    table[OBS_ID_COLUMN] = table[OBS_ID_COLUMN].str.strip()
    duplicated = table[OBS_ID_COLUMN].duplicated()
    if duplicated.any():
        position = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise ParseError(f"Duplicate obs_id '{table[OBS_ID_COLUMN].iloc[position]}' in '{table_path}'.",
                         row=position + 2, column=OBS_ID_COLUMN)

    if va_columns:
        velocity_column, points_column = va_columns
        velocities = _numeric_column(table, velocity_column, table_path)
        points = _numeric_column(table, points_column, table_path)
        responses = va_index_column(velocities, points)
    else:
        responses = _numeric_column(table, response_column, table_path)

    by_id = dict(zip(table[OBS_ID_COLUMN], responses))
    missing = [obs_id for obs_id in obs_ids if obs_id not in by_id]
    if missing:
        raise MissingColumn(f"No response row in '{table_path}' for observations {missing}.")
    extra = len(by_id) - len(obs_ids)
    if extra:
        logger.warning(f"{extra} rows of '{table_path}' have no series and are ignored.")

    data = validate_dataset(X, [by_id[obs_id] for obs_id in obs_ids])
    logger.info(f"Built functional design from '{series_path}': n={data.n}, d={data.d} (k={k}).")
    return obs_ids, data
