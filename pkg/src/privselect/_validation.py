"""Input validation helpers shared by every stage of the pipeline."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class PrivSelectError(ValueError):
    """Base class for contract violations raised by this package."""


class DatasetError(PrivSelectError):
    pass


class PerturbationError(PrivSelectError):
    pass


class AttackError(PrivSelectError):
    """Raised when a reconstruction attack cannot run.

    ``attack`` names the failing pool member when the error comes out of
    :func:`privselect.attacks.run_attack_pool`.
    """

    def __init__(self, message, attack=None):
        super().__init__(message)
        self.attack = attack


class FISConfigError(PrivSelectError):
    """Invalid fuzzy model document. ``path`` locates the offending entry."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class PrivSelectWarning(UserWarning):
    pass


class DegenerateOutputWarning(PrivSelectWarning):
    """No rule fired, or a scaling pool had nothing to scale by."""


def as_matrix(obj, name="X", min_rows=1, min_cols=1):
    """Return a finite float64 2-D array from an array or anything with ``features``."""
    data = getattr(obj, "features", obj)
    arr = check_array(
        data,
        dtype=np.float64,
        ensure_all_finite=True,
        ensure_min_samples=min_rows,
        ensure_min_features=min_cols,
        input_name=name,
    )
    return arr


def as_vector(x, name="x", min_len=1):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise PrivSelectError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise PrivSelectError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise PrivSelectError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, names=("original", "perturbed")):
    if a.shape != b.shape:
        raise PrivSelectError(
            f"shape mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}"
        )


def check_seed(seed):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, numbers.Integral):
        raise PrivSelectError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if seed < 0:
        raise PrivSelectError(f"seed must be non-negative, got {seed}")
    return seed


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise PrivSelectError(f"{name} must be a finite real > 0, got {value!r}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise PrivSelectError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_bin_width(bw):
    if not isinstance(bw, numbers.Real) or not (0 < bw <= 1):
        raise PrivSelectError(f"bin width must lie in (0, 1], got {bw!r}")
    return float(bw)
