"""
Extended-real helpers. Values live in (-inf, +inf] as numpy floats;
-inf never enters and inf - inf is refused.
"""
import numpy as np

from .errors import ExtendedRealError

INF = float("inf")


def ext_add(*terms):
    """Saturating sum of extended reals; works elementwise on arrays."""
    arrays = [np.asarray(t, dtype=float) for t in terms]
    plus = np.zeros(np.broadcast(*arrays).shape, dtype=bool)
    minus = np.zeros_like(plus)
    for a in arrays:
        plus |= np.isposinf(a)
        minus |= np.isneginf(a)
    if np.any(plus & minus):
        raise ExtendedRealError("inf - inf is undefined")
    with np.errstate(invalid="ignore"):
        total = np.sum(np.broadcast_arrays(*arrays), axis=0)
    total = np.where(plus, np.inf, total)
    total = np.where(minus, -np.inf, total)
    return float(total) if total.ndim == 0 else total


def format_ext(value):
    """Serialize an extended real, numpy scalar or nested container for JSON."""
    if isinstance(value, dict):
        return {str(k): format_ext(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [format_ext(v) for v in value]
    if isinstance(value, np.ndarray):
        return format_ext(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isposinf(v):
            return "inf"
        if np.isneginf(v):
            return "-inf"
        return v
    return value
