"""Small input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numpy as np

from .errors import InvalidInputError


def check_vector(x, name="x", size=None, positive=False):
    """Return ``x`` as a finite 1-D float array, raising InvalidInputError otherwise."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if size is not None and arr.size != size:
        raise InvalidInputError(f"{name} must have length {size}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf: {arr}")
    if positive and np.any(arr <= 0):
        raise InvalidInputError(f"{name} must be strictly positive, got {arr}")
    return arr


def check_points(x, dim, name="x"):
    """Coerce to an array of shape (..., dim) of finite floats."""
    arr = np.asarray(x, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != dim:
        raise InvalidInputError(f"{name} must have trailing dimension {dim}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def check_positive_scalar(v, name):
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name} must be a real number") from exc
    if not np.isfinite(v) or v <= 0:
        raise InvalidInputError(f"{name} must be a positive finite number, got {v}")
    return v


def check_multi_index(m, dim):
    m = tuple(int(v) for v in np.atleast_1d(m))
    if len(m) != dim or any(v < 0 for v in m):
        raise InvalidInputError(f"multi-index must have {dim} non-negative entries, got {m}")
    return m
