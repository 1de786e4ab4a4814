"""Histogram-entropy privacy metric for perturbed attributes.

Entropies are discrete Shannon entropies (bits) of equal-width bin
probabilities over values min-max normalized to [0, 1]. No ``log2(bw)``
differential correction is applied; that term would cancel anyway once pool
values are divided by the pool maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._validation import (
    PrivSelectError,
    as_matrix,
    as_vector,
    check_bin_width,
    check_same_shape,
)
from .dataset import minmax_to_unit

DEFAULT_BIN_WIDTH = 0.01


@dataclass(frozen=True)
class EntropyEstimate:
    h: float
    bin_width: float
    n_bins: int
    n_samples: int


@dataclass(frozen=True)
class PrivacyGuarantee:
    """Per-attribute residual privacy ``2**h(X) * (1 - P(X|Xp))`` and its minimum.

    ``scaled_minimum`` stays ``None`` until the pool is scaled with
    :func:`scale_privacy`.
    """

    per_attribute: np.ndarray
    minimum: float
    h_original: np.ndarray
    h_perturbed: np.ndarray
    h_noise: np.ndarray
    loss: np.ndarray
    bin_width: float
    scaled_minimum: float | None = None

    def with_scaled(self, value):
        return replace(self, scaled_minimum=float(value))

    def to_dict(self):
        return {
            "per_attribute": self.per_attribute.tolist(),
            "minimum": self.minimum,
            "scaled_minimum": self.scaled_minimum,
            "h_original": self.h_original.tolist(),
            "h_perturbed": self.h_perturbed.tolist(),
            "h_noise": self.h_noise.tolist(),
            "privacy_loss": self.loss.tolist(),
            "bin_width": self.bin_width,
        }


def n_bins_for(bw):
    # guard against 1/bw landing a hair above an integer
    return max(1, math.ceil(1.0 / bw - 1e-9))


def bin_counts(x, bw=DEFAULT_BIN_WIDTH):
    """Counts of min-max normalized ``x`` in bins ``[k*bw, (k+1)*bw)``; 1.0 goes to the last bin."""
    bw = check_bin_width(bw)
    n_bins = n_bins_for(bw)
    u = minmax_to_unit(x)
    idx = np.minimum(np.floor(u / bw).astype(np.int64), n_bins - 1)
    return np.bincount(idx, minlength=n_bins)


def inherent_uncertainty(x, bw=DEFAULT_BIN_WIDTH):
    """Entropy in bits of the binned distribution of ``x``."""
    x = as_vector(x, "x")
    counts = bin_counts(x, bw)
    p = counts[counts > 0] / x.size
    h = float(-(p * np.log2(p)).sum())
    # a single occupied bin gives -0.0
    return EntropyEstimate(h=h if h > 0 else 0.0, bin_width=float(bw), n_bins=counts.size, n_samples=x.size)


def _entropy(x, bw):
    return inherent_uncertainty(x, bw).h


def mutual_information(x, xp, bw=DEFAULT_BIN_WIDTH):
    """``h(xp) - h(xp - x)``: information the perturbed attribute carries about ``x``,
    treating the difference as independent additive noise."""
    x = as_vector(x, "x")
    xp = as_vector(xp, "xp")
    if x.shape != xp.shape:
        raise PrivSelectError(f"length mismatch: {x.size} vs {xp.size}")
    return _entropy(xp, bw) - _entropy(xp - x, bw)


def privacy_loss(x, xp, bw=DEFAULT_BIN_WIDTH):
    """Fraction of the privacy of ``x`` lost by releasing ``xp``, in [0, 1].

    Negative empirical mutual information is a finite-sample artifact and is
    clamped to zero loss.
    """
    info = mutual_information(x, xp, bw)
    return float(min(max(1.0 - 2.0 ** (-info), 0.0), 1.0))


def min_privacy_guarantee(d, p, bw=DEFAULT_BIN_WIDTH):
    """Residual privacy of every attribute after release, and the weakest one.

    ``d`` and ``p`` are Datasets/PerturbedInstances or plain matrices of the
    same shape.
    """
    bw = check_bin_width(bw)
    X = as_matrix(d, "original")
    Xp = as_matrix(p, "perturbed")
    check_same_shape(X, Xp)
    n_attrs = X.shape[1]
    h_x = np.empty(n_attrs)
    h_xp = np.empty(n_attrs)
    h_n = np.empty(n_attrs)
    for i in range(n_attrs):
        h_x[i] = _entropy(X[:, i], bw)
        h_xp[i] = _entropy(Xp[:, i], bw)
        h_n[i] = _entropy(Xp[:, i] - X[:, i], bw)
    info = h_xp - h_n
    loss = np.clip(1.0 - np.exp2(-info), 0.0, 1.0)
    per_attribute = np.exp2(h_x) * (1.0 - loss)
    return PrivacyGuarantee(
        per_attribute=per_attribute,
        minimum=float(per_attribute.min()),
        h_original=h_x,
        h_perturbed=h_xp,
        h_noise=h_n,
        loss=loss,
        bin_width=bw,
    )


def scale_privacy(pool_minimums):
    """Divide each pool member's minimum guarantee by the pool maximum."""
    v = np.asarray(pool_minimums, dtype=np.float64).ravel()
    if v.size == 0:
        raise PrivSelectError("cannot scale an empty pool")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise PrivSelectError(f"privacy guarantees must be finite and > 0, got {v}")
    return v / v.max()
