"""Error metrics for comparing numerical and fabricated solutions."""

from __future__ import annotations

import numpy as np


def relative_error(exact: float, numeric: float) -> float:
    """|exact - numeric| / |exact|; falls back to the absolute error when
    exact == 0 (see :func:`relative_error_info` for the fallback flag)."""
    return relative_error_info(exact, numeric)[0]


def relative_error_info(exact: float, numeric: float) -> tuple[float, bool]:
    """(error, used_absolute_fallback); the flag marks exact == 0 points."""
    if exact == 0:
        return abs(numeric), True
    return abs((exact - numeric) / exact), False


def l2_relative_error(exact: np.ndarray, numeric: np.ndarray) -> float:
    """||exact - numeric||_2 / ||exact||_2 over the test nodes."""
    exact = np.asarray(exact, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    if exact.size == 0 or exact.size != numeric.size:
        raise ValueError(f"length mismatch: {exact.size} vs {numeric.size}")
    denom = np.linalg.norm(exact)
    if denom == 0:
        raise ValueError("exact vector has zero norm; relative error undefined")
    return float(np.linalg.norm(exact - numeric) / denom)
