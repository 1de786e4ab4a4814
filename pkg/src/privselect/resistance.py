"""Minimum attack-resistance guarantee from reconstruction results."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._validation import (
    DegenerateOutputWarning,
    PrivSelectError,
    as_matrix,
    as_vector,
    check_same_shape,
)


@dataclass(frozen=True)
class ResistanceGuarantee:
    """Worst-case reconstruction error of one perturbed instance.

    ``per_attack_var`` keeps the full attack x attribute matrix of ``Var(P)``
    for audit; ``per_attack_min_std`` is the square root of each attack's
    minimum over attributes.
    """

    attacks: tuple
    per_attack_var: np.ndarray
    per_attack_min_std: dict
    overall_min_std: float
    scaled: float | None = None

    def with_scaled(self, value):
        return replace(self, scaled=float(value))

    def to_dict(self):
        return {
            "attacks": list(self.attacks),
            "var_p": {a: row.tolist() for a, row in zip(self.attacks, self.per_attack_var)},
            "per_attack_min_std": dict(self.per_attack_min_std),
            "overall_min_std": self.overall_min_std,
            "scaled": self.scaled,
        }


def var_p(x, xr):
    """Population variance of the reconstruction error ``xr - x``."""
    x = as_vector(x, "x", min_len=2)
    xr = as_vector(xr, "xr", min_len=2)
    if x.shape != xr.shape:
        raise PrivSelectError(f"length mismatch: {x.size} vs {xr.size}")
    p = xr - x
    return float(np.mean((p - p.mean()) ** 2))


def var_p_per_attribute(d, r):
    X = as_matrix(d, "original", min_rows=2)
    R = as_matrix(getattr(r, "reconstructed", r), "reconstructed", min_rows=2)
    check_same_shape(X, R, ("original", "reconstructed"))
    P = R - X
    return np.mean((P - P.mean(axis=0)) ** 2, axis=0)


def min_var_over_attributes(d, r):
    """``Var(P)`` of the best-reconstructed (most vulnerable) attribute."""
    return float(var_p_per_attribute(d, r).min())


def min_var_over_attacks(per_attack):
    v = np.asarray(per_attack, dtype=np.float64).ravel()
    if v.size == 0:
        raise PrivSelectError("no attack results to take a minimum over")
    return float(v.min())


def resistance_guarantee(d, results):
    """Combine a pool of :class:`~privselect.attacks.ReconstructionResult` into one guarantee."""
    results = list(results)
    if not results:
        raise PrivSelectError("no attack results to take a minimum over")
    var = np.vstack([var_p_per_attribute(d, r) for r in results])
    min_std = {r.attack: float(np.sqrt(v.min())) for r, v in zip(results, var)}
    overall = float(np.sqrt(min_var_over_attacks(var.min(axis=1))))
    return ResistanceGuarantee(
        attacks=tuple(r.attack for r in results),
        per_attack_var=var,
        per_attack_min_std=min_std,
        overall_min_std=overall,
    )


def scale_resistance(pool_min_stds):
    """Divide each member's ``sqrt(Var(P)_min)`` by the pool maximum.

    An all-zero pool has nothing to scale by: zeros are returned with a
    :class:`DegenerateOutputWarning`.
    """
    v = np.asarray(pool_min_stds, dtype=np.float64).ravel()
    if v.size == 0:
        raise PrivSelectError("cannot scale an empty pool")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise PrivSelectError(f"standard deviations must be finite and >= 0, got {v}")
    top = v.max()
    if top == 0:
        warnings.warn("every pool member has zero attack resistance", DegenerateOutputWarning,
                      stacklevel=2)
        return np.zeros_like(v)
    return v / top
