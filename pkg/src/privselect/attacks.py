"""Data-reconstruction attacks run against perturbed instances.

Attacks only see what their threat model grants them: the naive attack sees
the perturbed matrix alone, the known input/output attack sees the perturbed
matrix plus a sample of matched original rows, and the ICA attack sees the
perturbed matrix and uses the originals only to undo ICA's permutation, sign
and scale ambiguity (a best case for the attacker).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import (
    AttackError,
    PrivSelectError,
    as_matrix,
    check_positive,
    check_positive_int,
    check_same_shape,
    check_seed,
)

ATTACKS = ("naive", "known_io", "ica")
DEFAULT_KNOWN_FRACTION = 0.10
DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    reconstructed: np.ndarray
    attack: str
    assumptions: dict = field(default_factory=dict)

    def __post_init__(self):
        R = np.array(self.reconstructed, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(R)):
            raise AttackError(f"{self.attack} produced non-finite values", attack=self.attack)
        R.setflags(write=False)
        object.__setattr__(self, "reconstructed", R)


def _standardize(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = (X.max(axis=0) == X.min(axis=0)) | (std == 0)
    return np.where(constant, 0.0, (X - mean) / np.where(constant, 1.0, std))


def naive_estimation(p):
    """Take the perturbed matrix, re-standardized per column, as the estimate."""
    Y = as_matrix(p, "perturbed")
    return ReconstructionResult(_standardize(Y), "naive", {"knowledge": "perturbed data only"})


class KnownIOAttack(RegressorMixin, BaseEstimator):
    """Affine map from perturbed rows to original rows, fit on known pairs.

    Solves ``min_M,b sum ||M y_i + b - x_i||^2 + ridge ||M||^2`` in closed form;
    the intercept is not penalized.
    """

    def __init__(self, ridge=DEFAULT_RIDGE):
        self.ridge = ridge

    def fit(self, Y, X):
        Y, X = validate_data(self, Y, X, dtype=np.float64, multi_output=True, y_numeric=True)
        X = X.reshape(len(X), -1)
        if self.ridge < 0:
            raise AttackError(f"ridge must be >= 0, got {self.ridge}", attack="known_io")
        n, d = Y.shape
        if n < d:
            raise AttackError(
                f"{n} known pairs cannot determine a map on {d} attributes", attack="known_io"
            )
        y_mean = Y.mean(axis=0)
        x_mean = X.mean(axis=0)
        Yc = Y - y_mean
        gram = Yc.T @ Yc + self.ridge * np.eye(d)
        if self.ridge == 0 and np.linalg.matrix_rank(gram) < d:
            raise AttackError("singular normal equations; use ridge > 0", attack="known_io")
        try:
            coef = np.linalg.solve(gram, Yc.T @ (X - x_mean))
        except np.linalg.LinAlgError as exc:
            raise AttackError(f"normal equations not solvable: {exc}", attack="known_io") from exc
        self.coef_ = coef.T
        self.intercept_ = x_mean - y_mean @ coef
        return self

    def predict(self, Y):
        check_is_fitted(self, "coef_")
        Y = validate_data(self, Y, dtype=np.float64, reset=False)
        return Y @ self.coef_.T + self.intercept_


def sample_known_pairs(n_records, fraction, seed):
    """Indices of the records the attacker is assumed to know."""
    if not 0 < fraction <= 1:
        raise AttackError(f"known fraction must lie in (0, 1], got {fraction}", attack="known_io")
    k = max(1, int(round(fraction * n_records)))
    rng = np.random.default_rng(check_seed(seed))
    return np.sort(rng.choice(n_records, size=k, replace=False))


def known_io_attack(p, known_idx, known_rows, ridge=DEFAULT_RIDGE):
    """Reconstruct all records from the affine map fitted on ``known_idx``.

    ``known_rows`` are the original records at ``known_idx``, nothing more.
    """
    Y = as_matrix(p, "perturbed")
    known_idx = np.asarray(known_idx, dtype=np.int64)
    known_rows = np.atleast_2d(np.asarray(known_rows, dtype=np.float64))
    if known_rows.shape != (known_idx.size, Y.shape[1]):
        raise AttackError(
            f"known rows shape {known_rows.shape} does not match "
            f"{known_idx.size} indices x {Y.shape[1]} attributes",
            attack="known_io",
        )
    model = KnownIOAttack(ridge=ridge).fit(Y[known_idx], known_rows)
    return ReconstructionResult(
        model.predict(Y),
        "known_io",
        {
            "n_known": int(known_idx.size),
            "known_fraction": known_idx.size / Y.shape[0],
            "ridge": float(ridge),
        },
    )


class SymmetricFastICA(TransformerMixin, BaseEstimator):
    """Symmetric FastICA with the ``tanh`` contrast.

    Data are whitened with the symmetric (ZCA) whitening matrix and the
    unmixing matrix starts at the identity, which makes the result
    equivariant under column permutations of the input.
    """

    def __init__(self, max_iter=200, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        max_iter = check_positive_int(self.max_iter, "max_iter")
        check_positive(self.tol, "tol")
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        n, d = X.shape
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        cov = Xc.T @ Xc / n
        evals, evecs = np.linalg.eigh(cov)
        floor = max(evals.max(), 1.0) * 1e-12
        evals = np.maximum(evals, floor)
        self.whitening_ = (evecs / np.sqrt(evals)) @ evecs.T
        Z = Xc @ self.whitening_.T

        W = np.eye(d)
        converged = False
        lim = np.inf
        for it in range(1, max_iter + 1):  # noqa: B007, read after the loop
            S = Z @ W.T
            G = np.tanh(S)
            g_prime = 1.0 - G**2
            W_new = (G.T @ Z) / n - g_prime.mean(axis=0)[:, None] * W
            W_new = _sym_decorrelation(W_new)
            lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
            W = W_new
            if lim < self.tol:
                converged = True
                break
        self.unmixing_ = W
        self.n_iter_ = it
        self.converged_ = converged
        self.final_change_ = float(lim)
        return self

    def transform(self, X):
        check_is_fitted(self, "unmixing_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) @ self.whitening_.T @ self.unmixing_.T


def _sym_decorrelation(W):
    evals, evecs = np.linalg.eigh(W @ W.T)
    evals = np.maximum(evals, np.finfo(float).tiny)
    return (evecs / np.sqrt(evals)) @ evecs.T @ W


def _abs_correlation(A, B):
    Ac = _standardize(A)
    Bc = _standardize(B)
    return Ac.T @ Bc / A.shape[0]


def align_components(S, X):
    """Match each original attribute to one component and rescale it.

    Pairs are picked greedily by largest absolute Pearson correlation. The
    matched component takes the correlation's sign and the attribute's mean
    and standard deviation. Returns the aligned matrix and the component index
    used for each attribute.
    """
    corr = _abs_correlation(S, X)  # components x attributes
    abs_corr = np.abs(corr)
    d = X.shape[1]
    assignment = np.full(d, -1)
    free_comp = np.ones(S.shape[1], dtype=bool)
    free_attr = np.ones(d, dtype=bool)
    for _ in range(d):
        masked = np.where(free_comp[:, None] & free_attr[None, :], abs_corr, -1.0)
        c, a = np.unravel_index(np.argmax(masked), masked.shape)
        assignment[a] = c
        free_comp[c] = False
        free_attr[a] = False
    Sn = _standardize(S)
    sign = np.sign(corr[assignment, np.arange(d)])
    sign[sign == 0] = 1.0
    aligned = X.mean(axis=0) + X.std(axis=0) * Sn[:, assignment] * sign
    return aligned, assignment


def ica_attack(p, original_for_alignment, max_iter=200, tol=1e-6):
    """Blind source separation of the perturbed matrix, aligned to the originals."""
    Y = as_matrix(p, "perturbed")
    X = as_matrix(original_for_alignment, "original")
    check_same_shape(X, Y)
    n, d = Y.shape
    if d < 2:
        raise AttackError("ICA needs at least 2 attributes", attack="ica")
    if n <= d:
        raise AttackError(f"ICA needs more records than attributes, got {n}x{d}", attack="ica")
    ica = SymmetricFastICA(max_iter=max_iter, tol=tol).fit(Y)
    S = ica.transform(Y)
    aligned, assignment = align_components(S, X)
    return ReconstructionResult(
        aligned,
        "ica",
        {
            "alignment": "greedy max |correlation| against originals",
            "converged": bool(ica.converged_),
            "n_iter": int(ica.n_iter_),
            "component_for_attribute": assignment.tolist(),
        },
    )


def run_attack_pool(p, original, attacks=ATTACKS, known_fraction=DEFAULT_KNOWN_FRACTION,
                    seed=0, ridge=DEFAULT_RIDGE, ica_max_iter=200, ica_tol=1e-6):
    """One reconstruction per attack in ``attacks``, in order.

    ``attacks`` entries are names or ``(name, params)`` pairs; params override
    the keyword defaults for that attack only.
    """
    attacks = list(attacks)
    if not attacks:
        raise AttackError("attack pool is empty")
    X = as_matrix(original, "original")
    Y = as_matrix(p, "perturbed")
    check_same_shape(X, Y)
    results = []
    for entry in attacks:
        name, params = (entry, {}) if isinstance(entry, str) else (entry[0], dict(entry[1]))
        try:
            if name == "naive":
                _no_params(name, params)
                results.append(naive_estimation(Y))
            elif name == "known_io":
                fraction = params.pop("known_fraction", known_fraction)
                r = params.pop("ridge", ridge)
                _no_params(name, params)
                idx = sample_known_pairs(X.shape[0], fraction, seed)
                results.append(known_io_attack(Y, idx, X[idx], ridge=r))
            elif name == "ica":
                mi = params.pop("max_iter", ica_max_iter)
                tol = params.pop("tol", ica_tol)
                _no_params(name, params)
                results.append(ica_attack(Y, X, max_iter=mi, tol=tol))
            else:
                raise AttackError(f"unknown attack {name!r}; choose from {ATTACKS}")
        except PrivSelectError as exc:
            raise AttackError(f"attack {name!r} failed: {exc}", attack=name) from exc
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise AttackError(f"attack {name!r} failed: {exc}", attack=name) from exc
    return results


def _no_params(name, params):
    if params:
        raise AttackError(f"{name} does not accept parameters {sorted(params)}", attack=name)
