"""Median/IQR robust scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class ScalerParams:
    median: np.ndarray
    iqr: np.ndarray

    @property
    def width(self) -> int:
        return self.median.size


def fit_scaler(train: np.ndarray) -> ScalerParams:
    """Per-column median and IQR; quartiles interpolate linearly between order statistics."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ArgumentError("fit_scaler needs a non-empty 2-D matrix")
    q1, med, q3 = np.percentile(train, [25.0, 50.0, 75.0], axis=0, method="linear")
    return ScalerParams(med, q3 - q1)


def apply_scaler(matrix: np.ndarray, params: ScalerParams) -> np.ndarray:
    """(x - median) / IQR, with zero-IQR columns mapped to 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != params.width:
        raise ShapeError(f"matrix width {matrix.shape[-1]} != scaler width {params.width}")
    safe = np.where(params.iqr > 0, params.iqr, 1.0)
    scaled = (matrix - params.median) / safe
    return np.where(params.iqr > 0, scaled, 0.0)
