"""Utility helpers.

Small, side-effect-free numeric helpers used across the toolkit.
"""

from __future__ import annotations

import math
from typing import Any, Union

import numpy as np
from scipy import special


ArrayLike = Union[float, np.ndarray]


def gamma_ratio(num: ArrayLike, den: ArrayLike) -> ArrayLike:
    """Signed Gamma(num) / Gamma(den) without overflow.

    Args:
        num: Numerator argument(s).
        den: Denominator argument(s).

    Returns:
        The ratio, evaluated as sign * exp(lgamma(num) - lgamma(den)).
        Non-finite when either argument is a pole.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    sign = special.gammasgn(num) * special.gammasgn(den)
    out = sign * np.exp(special.gammaln(num) - special.gammaln(den))
    return out if out.ndim else float(out)


def round_sig(x: float, digits: int = 3) -> float:
    """Round to a number of significant figures."""
    if x == 0.0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


def format_float(x: float, digits: int = 17) -> str:
    """Format with `digits` significant digits."""
    return f"{x:.{digits}g}"


def clean_for_json(obj: Any, digits: int = 17) -> Any:
    """Recursively convert numpy scalars/arrays to JSON-safe Python values.

    Floats are rounded to `digits` significant figures; non-finite floats
    become None.
    """
    if isinstance(obj, dict):
        return {str(k): clean_for_json(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_for_json(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean_for_json(v, digits) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return float(format_float(value, digits))
    return obj


__all__ = ["gamma_ratio", "round_sig", "format_float", "clean_for_json"]
