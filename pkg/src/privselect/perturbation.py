"""Pool of input-perturbation algorithms.

Each algorithm is a scikit-learn transformer. ``fit`` chooses any random
structure (rotation, translation, column scales) and ``transform`` applies it
plus fresh noise drawn from the same seeded stream, so transforming the
training matrix reproduces the fitted instance exactly.

The functional forms (:func:`additive_noise`, :func:`rotation_perturb`, ...)
take a z-scored :class:`~privselect.dataset.Dataset` and return a
:class:`PerturbedInstance` carrying full provenance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import (
    PerturbationError,
    PrivSelectError,
    check_positive,
    check_positive_int,
    check_seed,
)
from .dataset import ZSCORED, write_csv
from .privacy import DEFAULT_BIN_WIDTH, min_privacy_guarantee

ALGORITHMS = ("additive_noise", "rotation", "geometric", "laplace_ldp")
LAPLACE_SENSITIVITY = 2.0
# recorded in provenance but computed, not chosen
DERIVED_PARAMS = ("seed_offset", "sensitivity", "scale")


@dataclass(frozen=True, eq=False)
class PerturbedInstance:
    """A perturbed copy of a dataset plus everything needed to regenerate it.

    ``rotation`` and ``translation`` hold the structural transform for the
    rotation and geometric members; they exist for audits and tests, attacks
    never read them.
    """

    features: np.ndarray
    source_id: str
    algorithm: str
    params: dict
    seed: int
    rotation: np.ndarray | None = field(default=None, repr=False)
    translation: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(X)):
            raise PerturbationError(f"{self.algorithm} produced non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)

    @property
    def shape(self):
        return self.features.shape

    def provenance(self):
        return {
            "algorithm": self.algorithm,
            "params": dict(self.params),
            "seed": self.seed,
            "source_id": self.source_id,
        }


def random_orthogonal(d, seed):
    """Haar-distributed ``d x d`` orthogonal matrix, deterministic per seed."""
    d = check_positive_int(d, "d")
    return _haar_orthogonal(np.random.default_rng(check_seed(seed)), d)


def _haar_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    # sign fix makes the distribution Haar and the output unique per draw
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


class _SeededPerturber(TransformerMixin, BaseEstimator):
    def _check_common(self):
        self.seed_ = check_seed(self.seed)

    def _stream(self, offset=0):
        return np.random.default_rng(self.seed_ + offset)


class AdditiveNoisePerturber(_SeededPerturber):
    """Adds i.i.d. Gaussian noise ``N(0, sigma**2)`` to every cell."""

    def __init__(self, sigma=0.3, seed=0):
        self.sigma = sigma
        self.seed = seed

    def fit(self, X, y=None):
        self._check_common()
        check_positive(self.sigma, "sigma")
        validate_data(self, X, dtype=np.float64)
        return self

    def transform(self, X):
        check_is_fitted(self, "seed_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X + self._stream().normal(0.0, self.sigma, size=X.shape)


class _BestOfRotations(_SeededPerturber):
    """Shared candidate search for the rotation and geometric members.

    Candidate ``k`` is drawn from the stream seeded with ``seed + k``; the
    candidate with the largest minimum privacy guarantee wins (first on ties).
    """

    def _candidate(self, X, offset):
        raise NotImplementedError

    def fit(self, X, y=None):
        self._check_common()
        iterations = check_positive_int(self.iterations, "iterations")
        X = validate_data(self, X, dtype=np.float64)
        if X.shape[1] < 2:
            raise PerturbationError("rotation-based perturbation needs at least 2 attributes")
        best = None
        scores = []
        for k in range(iterations):
            Y, state = self._candidate(X, k)
            score = min_privacy_guarantee(X, Y, self.bin_width).minimum
            scores.append(score)
            if best is None or score > best[0]:
                best = (score, k, state)
        self.candidate_scores_ = np.array(scores)
        self.seed_offset_ = best[1]
        self.rotation_ = best[2]["rotation"]
        self.translation_ = best[2]["translation"]
        return self


class RotationPerturber(_BestOfRotations):
    """Random rotation ``y = R x`` of every record, best of ``iterations`` draws."""

    def __init__(self, iterations=10, seed=0, bin_width=DEFAULT_BIN_WIDTH):
        self.iterations = iterations
        self.seed = seed
        self.bin_width = bin_width

    def _candidate(self, X, offset):
        R = _haar_orthogonal(self._stream(offset), X.shape[1])
        return X @ R.T, {"rotation": R, "translation": None}

    def transform(self, X):
        check_is_fitted(self, "rotation_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.rotation_.T


class GeometricPerturber(_BestOfRotations):
    """Rotation, translation by a random vector in ``[-1, 1]^d``, then Gaussian noise."""

    def __init__(self, iterations=10, sigma=0.3, seed=0, translate=True,
                 bin_width=DEFAULT_BIN_WIDTH):
        self.iterations = iterations
        self.sigma = sigma
        self.seed = seed
        self.translate = translate
        self.bin_width = bin_width

    def _draw(self, rng, X):
        d = X.shape[1]
        R = _haar_orthogonal(rng, d)
        psi = rng.uniform(-1.0, 1.0, size=d)
        if not self.translate:
            psi = np.zeros(d)
        noise = rng.normal(0.0, self.sigma, size=X.shape)
        return R, psi, noise

    def _candidate(self, X, offset):
        check_positive(self.sigma, "sigma")
        R, psi, noise = self._draw(self._stream(offset), X)
        return X @ R.T + psi + noise, {"rotation": R, "translation": psi}

    def transform(self, X):
        check_is_fitted(self, "rotation_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        _, _, noise = self._draw(self._stream(self.seed_offset_), X)
        return X @ self.rotation_.T + self.translation_ + noise


class LaplacePerturber(_SeededPerturber):
    """Per-cell Laplace mechanism on columns rescaled into ``[-1, 1]``.

    Each column is divided by its maximum absolute value (learned in ``fit``)
    and clipped, so a cell's range width, 2, is the sensitivity and the noise
    scale is ``2 / epsilon``.
    """

    def __init__(self, epsilon=1.0, seed=0):
        self.epsilon = epsilon
        self.seed = seed

    @property
    def scale(self):
        return LAPLACE_SENSITIVITY / self.epsilon

    def fit(self, X, y=None):
        self._check_common()
        check_positive(self.epsilon, "epsilon")
        X = validate_data(self, X, dtype=np.float64)
        max_abs = np.abs(X).max(axis=0)
        self.max_abs_ = np.where(max_abs > 0, max_abs, 1.0)
        return self

    def clamp(self, X):
        return np.clip(X / self.max_abs_, -1.0, 1.0)

    def transform(self, X):
        check_is_fitted(self, "max_abs_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.clamp(X) + self._stream().laplace(0.0, self.scale, size=X.shape)


def _require_zscored(d):
    if getattr(d, "normalization_state", None) != ZSCORED:
        raise PerturbationError("perturbation expects a z-scored Dataset")


def _instance(d, algorithm, params, seed, Y, rotation=None, translation=None):
    return PerturbedInstance(
        features=Y,
        source_id=d.name,
        algorithm=algorithm,
        params=params,
        seed=seed,
        rotation=rotation,
        translation=translation,
    )


def additive_noise(d, sigma=0.3, seed=0):
    _require_zscored(d)
    est = AdditiveNoisePerturber(sigma=sigma, seed=seed)
    Y = est.fit_transform(d.features)
    return _instance(d, "additive_noise", {"sigma": float(sigma)}, est.seed_, Y)


def rotation_perturb(d, iterations=10, seed=0, bin_width=DEFAULT_BIN_WIDTH):
    _require_zscored(d)
    est = RotationPerturber(iterations=iterations, seed=seed, bin_width=bin_width)
    Y = est.fit_transform(d.features)
    params = {"iterations": int(iterations), "seed_offset": est.seed_offset_,
              "bin_width": float(bin_width)}
    return _instance(d, "rotation", params, est.seed_, Y, rotation=est.rotation_)


def geometric_perturb(d, iterations=10, sigma=0.3, seed=0, translate=True,
                      bin_width=DEFAULT_BIN_WIDTH):
    _require_zscored(d)
    est = GeometricPerturber(iterations=iterations, sigma=sigma, seed=seed,
                             translate=translate, bin_width=bin_width)
    Y = est.fit_transform(d.features)
    params = {"iterations": int(iterations), "sigma": float(sigma),
              "seed_offset": est.seed_offset_, "bin_width": float(bin_width)}
    if not translate:
        params["translate"] = False
    return _instance(d, "geometric", params, est.seed_, Y,
                     rotation=est.rotation_, translation=est.translation_)


def laplace_perturb(d, epsilon=1.0, seed=0):
    _require_zscored(d)
    est = LaplacePerturber(epsilon=epsilon, seed=seed)
    Y = est.fit_transform(d.features)
    params = {"epsilon": float(epsilon), "sensitivity": LAPLACE_SENSITIVITY,
              "scale": est.scale}
    return _instance(d, "laplace_ldp", params, est.seed_, Y)


def perturb(d, algorithm, seed, **params):
    """Dispatch to a pool member by name. Unknown parameter names are an error."""
    funcs = {
        "additive_noise": (additive_noise, {"sigma"}),
        "rotation": (rotation_perturb, {"iterations", "bin_width"}),
        "geometric": (geometric_perturb, {"iterations", "sigma", "translate", "bin_width"}),
        "laplace_ldp": (laplace_perturb, {"epsilon"}),
    }
    if algorithm not in funcs:
        raise PrivSelectError(f"unknown perturbation algorithm {algorithm!r}; choose from {ALGORITHMS}")
    func, allowed = funcs[algorithm]
    extra = set(params) - allowed
    if extra:
        raise PrivSelectError(f"{algorithm} does not accept parameters {sorted(extra)}")
    return func(d, seed=seed, **params)


def replay(d, provenance):
    """Regenerate an instance from its provenance record and source dataset.

    Parameters the algorithm derives itself (the winning rotation offset, the
    Laplace scale) are recomputed and checked against the record.
    """
    params = dict(provenance["params"])
    derived = {k: params.pop(k) for k in DERIVED_PARAMS if k in params}
    inst = perturb(d, provenance["algorithm"], provenance["seed"], **params)
    for key, value in derived.items():
        if inst.params.get(key) != value:
            raise PerturbationError(
                f"replayed {key}={inst.params.get(key)!r} differs from recorded {value!r}"
            )
    return inst


def make_perturber(algorithm, seed=0, **params):
    """Unfitted transformer for a pool member, for use in pipelines."""
    classes = {
        "additive_noise": AdditiveNoisePerturber,
        "rotation": RotationPerturber,
        "geometric": GeometricPerturber,
        "laplace_ldp": LaplacePerturber,
    }
    if algorithm not in classes:
        raise PrivSelectError(f"unknown perturbation algorithm {algorithm!r}")
    return classes[algorithm](seed=seed, **params)


def save_instance(instance, path, labels=None, attr_names=None, label_name="label"):
    """Write the perturbed matrix as CSV and its provenance as ``<path>.provenance.json``."""
    path = Path(path)
    write_csv(instance, path, labels=labels, attr_names=attr_names, label_name=label_name)
    sidecar = provenance_path(path)
    sidecar.write_text(json.dumps(instance.provenance(), indent=2, sort_keys=True) + "\n")
    return path, sidecar


def provenance_path(path):
    path = Path(path)
    return path.with_name(path.name + ".provenance.json")
