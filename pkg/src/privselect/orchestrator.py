"""Rank a pool of perturbations by fuzzy index and release the best one.

One round perturbs the dataset with every pool member, scores each instance
(privacy, attack resistance, utility), scales privacy and resistance across
the round's instances and feeds the three values to the fuzzy model. Rounds
repeat with fresh seeds and a noise ladder until the best fuzzy index reaches
the threshold or the round budget runs out. Candidates accumulate across
rounds; the best one seen so far is the winner.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import sklearn
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from . import __version__
from ._validation import (
    DegenerateOutputWarning,
    PrivSelectError,
    check_bin_width,
    check_positive_int,
    check_seed,
)
from .attacks import ATTACKS, DEFAULT_KNOWN_FRACTION, run_attack_pool
from .dataset import (
    RAW,
    ZSCORED,
    Dataset,
    format_float,
    stratified_folds,
    zscore_normalize,
)
from .fis import FISModel, default_model, fuzzy_index, load_fis_config
from .perturbation import ALGORITHMS, make_perturber, perturb, save_instance
from .privacy import DEFAULT_BIN_WIDTH, min_privacy_guarantee, scale_privacy
from .resistance import resistance_guarantee, scale_resistance
from .utility import Classifier, default_classifiers, min_utility_guarantee

log = logging.getLogger(__name__)

DEFAULT_PERTURBATORS = (
    ("additive_noise", {"sigma": 0.3}),
    ("rotation", {"iterations": 10}),
    ("geometric", {"iterations": 10, "sigma": 0.3}),
    ("laplace_ldp", {"epsilon": 1.0}),
)
DEFAULT_ATTACKS = tuple((name, {}) for name in ATTACKS)
DEFAULT_LADDER = (1.0, 0.75, 1.25)


def _entry(item, kind):
    if isinstance(item, str):
        return (item, {})
    if isinstance(item, dict):
        item = dict(item)
        if "name" not in item:
            raise PrivSelectError(f"{kind} entry {item} needs a 'name'")
        name = item.pop("name")
        return (name, dict(item.pop("params", {}), **item))
    name, params = item
    return (str(name), dict(params or {}))


def _classifier(item):
    if isinstance(item, Classifier):
        return item
    if isinstance(item, str):
        return Classifier(item)
    if isinstance(item, dict):
        item = dict(item)
        return Classifier(item.pop("kind"), dict(item.pop("hyperparams", {}), **item))
    kind, hp = item
    return Classifier(kind, dict(hp or {}))


@dataclass(frozen=True)
class PoolConfig:
    """Everything one selection run depends on.

    ``utility_target`` of ``None`` scores utility as the minimum accuracy over
    the classifier pool; naming a classifier kind scores that application
    alone. ``noise_ladder[r % len]`` multiplies every ``sigma`` (and divides
    every ``epsilon``) in round ``r``.
    """

    perturbators: tuple = DEFAULT_PERTURBATORS
    attacks: tuple = DEFAULT_ATTACKS
    classifiers: tuple = field(default_factory=lambda: tuple(default_classifiers()))
    fis: FISModel = field(default_factory=default_model)
    fi_threshold: float = 0.0
    max_rounds: int = 1
    seed: int = 0
    bin_width: float = DEFAULT_BIN_WIDTH
    known_fraction: float = DEFAULT_KNOWN_FRACTION
    n_folds: int = 5
    utility_target: str | None = None
    noise_ladder: tuple = DEFAULT_LADDER

    def __post_init__(self):
        perturbators = tuple(_entry(p, "perturbator") for p in self.perturbators)
        attacks = tuple(_entry(a, "attack") for a in self.attacks)
        classifiers = tuple(_classifier(c) for c in self.classifiers)
        if not perturbators or not attacks or not classifiers:
            raise PrivSelectError("perturbator, attack and classifier pools must be nonempty")
        for name, _ in perturbators:
            if name not in ALGORITHMS:
                raise PrivSelectError(f"unknown perturbation algorithm {name!r}; choose from {ALGORITHMS}")
        for name, _ in attacks:
            if name not in ATTACKS:
                raise PrivSelectError(f"unknown attack {name!r}; choose from {ATTACKS}")
        if not isinstance(self.fis, FISModel):
            raise PrivSelectError("fis must be a FISModel")
        threshold = float(self.fi_threshold)
        if not np.isfinite(threshold) or threshold < 0:
            raise PrivSelectError(f"fi_threshold must be >= 0, got {self.fi_threshold}")
        check_positive_int(self.max_rounds, "max_rounds")
        check_seed(self.seed)
        check_bin_width(self.bin_width)
        if not 0 < self.known_fraction <= 1:
            raise PrivSelectError(f"known_fraction must lie in (0, 1], got {self.known_fraction}")
        check_positive_int(self.n_folds, "n_folds", minimum=2)
        if self.utility_target is not None and self.utility_target not in [c.kind for c in classifiers]:
            raise PrivSelectError(f"utility_target {self.utility_target!r} is not in the classifier pool")
        ladder = tuple(float(f) for f in self.noise_ladder)
        if not ladder or any(not np.isfinite(f) or f <= 0 for f in ladder):
            raise PrivSelectError("noise_ladder needs positive factors")
        object.__setattr__(self, "perturbators", perturbators)
        object.__setattr__(self, "attacks", attacks)
        object.__setattr__(self, "classifiers", classifiers)
        object.__setattr__(self, "fi_threshold", threshold)
        object.__setattr__(self, "noise_ladder", ladder)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc or {})
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise PrivSelectError(f"unknown configuration keys {sorted(unknown)}")
        if "fis" in doc and not isinstance(doc["fis"], FISModel):
            doc["fis"] = load_fis_config(doc["fis"])
        for key in ("perturbators", "attacks", "classifiers", "noise_ladder"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_dict(self):
        return {
            "perturbators": [{"name": n, "params": p} for n, p in self.perturbators],
            "attacks": [{"name": n, "params": p} for n, p in self.attacks],
            "classifiers": [{"kind": c.kind, "hyperparams": c.hyperparams} for c in self.classifiers],
            "fis": self.fis.to_dict(),
            "fi_threshold": self.fi_threshold,
            "max_rounds": self.max_rounds,
            "seed": self.seed,
            "bin_width": self.bin_width,
            "known_fraction": self.known_fraction,
            "n_folds": self.n_folds,
            "utility_target": self.utility_target,
            "noise_ladder": list(self.noise_ladder),
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()


def run_provenance(seed, config_sha256=None):
    """Library versions, seed and config hash: enough to replay a run exactly."""
    return {
        "privselect": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "python": platform.python_version(),
        "seed": seed,
        "config_sha256": config_sha256,
    }


def derive_seed(base, index):
    """Independent 64-bit seed for pool member ``index`` of a round seeded with ``base``."""
    state = np.random.SeedSequence([check_seed(base), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def round_params(algorithm, params, factor):
    """Apply the noise ladder factor: more noise for factor > 1."""
    params = dict(params)
    if factor != 1.0:
        if "sigma" in params:
            params["sigma"] = params["sigma"] * factor
        if "epsilon" in params:
            params["epsilon"] = params["epsilon"] / factor
    return params


@dataclass
class InstanceResult:
    round: int
    pool_index: int
    algorithm: str
    params: dict
    seed: int
    instance: object = field(default=None, repr=False)
    privacy: object = None
    resistance: object = None
    utility: object = None
    utility_input: float | None = None
    fi: float | None = None
    fi_per_classifier: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    error: dict | None = None

    @property
    def ok(self):
        return self.error is None and self.fi is not None

    def to_dict(self):
        return {
            "round": self.round,
            "pool_index": self.pool_index,
            "provenance": self.instance.provenance() if self.instance is not None else {
                "algorithm": self.algorithm, "params": self.params, "seed": self.seed,
            },
            "noise_factor": self.params.get("noise_factor", 1.0),
            "privacy": self.privacy.to_dict() if self.privacy is not None else None,
            "resistance": self.resistance.to_dict() if self.resistance is not None else None,
            "utility": self.utility.to_dict() if self.utility is not None else None,
            "utility_input": self.utility_input,
            "fi": self.fi,
            "fi_per_classifier": dict(self.fi_per_classifier),
            "flags": list(self.flags),
            "error": self.error,
        }


@dataclass
class EvaluationReport:
    instances: list
    winner: int | None
    rounds_used: int
    released: bool
    fi_threshold: float
    config: PoolConfig = field(repr=False, default=None)
    dataset_name: str = "dataset"

    @property
    def fi_values(self):
        return [r.fi for r in self.instances]

    @property
    def fi_opt(self):
        return None if self.winner is None else self.instances[self.winner].fi

    @property
    def winner_result(self):
        return None if self.winner is None else self.instances[self.winner]

    @property
    def n_reconstructions(self):
        return sum(len(r.resistance.attacks) for r in self.instances if r.resistance is not None)

    def round_results(self, r):
        return [x for x in self.instances if x.round == r]

    def to_dict(self):
        cfg = self.config
        return {
            "dataset": self.dataset_name,
            "fi_threshold": self.fi_threshold,
            "fi_opt": self.fi_opt,
            "released": self.released,
            "rounds_used": self.rounds_used,
            "winner": self.winner,
            "n_reconstructions": self.n_reconstructions,
            "per_instance": [r.to_dict() for r in self.instances],
            "config": cfg.to_dict() if cfg is not None else None,
            "provenance": run_provenance(
                cfg.seed if cfg is not None else None,
                cfg.config_hash() if cfg is not None else None,
            ),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    def rank_rows(self):
        """Instances ordered by FI (descending, pool order on ties); failures last."""
        order = sorted(
            range(len(self.instances)),
            key=lambda i: (not self.instances[i].ok, -(self.instances[i].fi or 0.0), i),
        )
        rows = []
        for rank, i in enumerate(order, start=1):
            r = self.instances[i]
            rows.append({
                "rank": rank if r.ok else "",
                "round": r.round,
                "pool_index": r.pool_index,
                "algorithm": r.algorithm,
                "privacy": _fmt(r.privacy.scaled_minimum if r.privacy else None),
                "resistance": _fmt(r.resistance.scaled if r.resistance else None),
                "utility": _fmt(r.utility_input),
                "fi": _fmt(r.fi),
                "winner": "*" if i == self.winner else "",
            })
        return rows

    def rank_table_csv(self):
        rows = self.rank_rows()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()

    def rank_table_text(self):
        rows = self.rank_rows()
        cols = list(rows[0])
        widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
        lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
        lines += ["  ".join(str(r[c]).ljust(widths[c]) for c in cols) for r in rows]
        return "\n".join(line.rstrip() for line in lines) + "\n"


def _fmt(v):
    return "" if v is None else f"{v:.4f}"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _check_dataset(d):
    if not isinstance(d, Dataset):
        raise PrivSelectError("expected a Dataset")
    if d.normalization_state != ZSCORED:
        raise PrivSelectError("the pool is evaluated on a z-scored Dataset")


def _score_instance(d, cfg, plan, res):
    """Run the perturb/privacy/attack/utility stages, recording the failing stage."""
    stage = "perturb"
    try:
        res.instance = perturb(d, res.algorithm, res.seed,
                               **{k: v for k, v in res.params.items() if k != "noise_factor"})
        stage = "privacy"
        res.privacy = min_privacy_guarantee(d, res.instance, cfg.bin_width)
        stage = "attack"
        recon = run_attack_pool(res.instance, d, cfg.attacks, known_fraction=cfg.known_fraction,
                                seed=res.seed)
        for r in recon:
            if r.attack == "ica" and not r.assumptions.get("converged", True):
                res.flags.append("ica_not_converged")
        res.resistance = resistance_guarantee(d, recon)
        stage = "utility"
        res.utility = min_utility_guarantee(res.instance.features, d.labels, cfg.classifiers, plan)
    except Exception as exc:  # isolate the failure to this instance
        log.warning("instance %d (%s) failed at %s: %s", res.pool_index, res.algorithm, stage, exc)
        res.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}


def _fuzzy(cfg, res, privacy, resistance):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        acc = res.utility.per_classifier_accuracy
        target = cfg.utility_target
        res.utility_input = res.utility.minimum if target is None else acc[target]
        res.fi = fuzzy_index(privacy, resistance, res.utility_input, cfg.fis)
        res.fi_per_classifier = {
            k: fuzzy_index(privacy, resistance, a, cfg.fis) for k, a in acc.items()
        }
    if any(issubclass(w.category, DegenerateOutputWarning) for w in caught):
        res.flags.append("no_rule_fired")


def evaluate_round(d, cfg, round_index=0):
    """Score every pool member once with the seeds and noise factor of ``round_index``."""
    _check_dataset(d)
    plan = stratified_folds(d, cfg.n_folds, cfg.seed)
    base = cfg.seed + round_index
    factor = cfg.noise_ladder[round_index % len(cfg.noise_ladder)]
    results = []
    for i, (algorithm, params) in enumerate(cfg.perturbators):
        params = round_params(algorithm, params, factor)
        if algorithm in ("rotation", "geometric"):
            params.setdefault("bin_width", cfg.bin_width)
        params["noise_factor"] = factor
        res = InstanceResult(round=round_index, pool_index=i, algorithm=algorithm,
                             params=params, seed=derive_seed(base, i))
        _score_instance(d, cfg, plan, res)
        results.append(res)

    ok = [r for r in results if r.error is None]
    if ok:
        priv = scale_privacy([r.privacy.minimum for r in ok])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            resist = scale_resistance([r.resistance.overall_min_std for r in ok])
        degenerate = any(issubclass(w.category, DegenerateOutputWarning) for w in caught)
        for r, p, s in zip(ok, priv, resist):
            r.privacy = r.privacy.with_scaled(p)
            r.resistance = r.resistance.with_scaled(s)
            if degenerate:
                r.flags.append("resistance_pool_all_zero")
            _fuzzy(cfg, r, float(p), float(s))
    return results


def select_best(report):
    """Index of the highest fuzzy index; the earliest wins ties. Failed entries (None) are skipped."""
    fis = report.fi_values if isinstance(report, EvaluationReport) else list(report)
    if not fis:
        raise PrivSelectError("cannot select from an empty report")
    best = None
    for i, v in enumerate(fis):
        if v is not None and (best is None or v > fis[best]):
            best = i
    if best is None:
        raise PrivSelectError("every pool member failed; nothing to select")
    return best


def _report(d, cfg, instances, rounds_used, released):
    winner = select_best([r.fi for r in instances]) if any(r.ok for r in instances) else None
    return EvaluationReport(
        instances=instances,
        winner=winner,
        rounds_used=rounds_used,
        released=released,
        fi_threshold=cfg.fi_threshold,
        config=cfg,
        dataset_name=d.name,
    )


def evaluate_pool(d, cfg=None):
    """One round of evaluation for every pool member, with the winner marked."""
    cfg = cfg or PoolConfig()
    instances = evaluate_round(d, cfg, 0)
    report = _report(d, cfg, instances, 1, False)
    report.released = report.fi_opt is not None and report.fi_opt >= cfg.fi_threshold
    return report


def release_loop(d, cfg=None):
    """Repeat rounds until the best fuzzy index reaches ``cfg.fi_threshold``.

    Returns ``(report, released_instance)``; the instance is ``None`` when the
    round budget ran out first. The report then still names the best
    candidate found.
    """
    cfg = cfg or PoolConfig()
    instances = []
    report = None
    for r in range(cfg.max_rounds):
        instances.extend(evaluate_round(d, cfg, r))
        report = _report(d, cfg, instances, r + 1, False)
        fi_opt = report.fi_opt
        log.info("round %d: FI_opt=%s threshold=%s", r, fi_opt, cfg.fi_threshold)
        if fi_opt is not None and fi_opt >= cfg.fi_threshold:
            report.released = True
            return report, report.winner_result.instance
    return report, None


def released_csv_text(d, instance):
    """Serialized form of a released instance: perturbed features plus labels."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(d.attr_names) + [d.label_name])
    for row, label in zip(instance.features, d.labels):
        writer.writerow([format_float(v) for v in row] + [label])
    return buf.getvalue()


def write_outputs(report, d, released, out_dir):
    """Write ``report.json`` and the rank tables always; ``released.csv`` only on release."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "rank_table": out / "rank_table.csv"}
    paths["report"].write_text(report.to_json())
    paths["rank_table"].write_text(report.rank_table_csv())
    (out / "rank_table.txt").write_text(report.rank_table_text())
    released_path = out / "released.csv"
    if released is not None:
        save_instance(released, released_path, labels=d.labels, attr_names=d.attr_names,
                      label_name=d.label_name)
        paths["released"] = released_path
    return paths


class PerturbationSelector(TransformerMixin, BaseEstimator):
    """Pick and apply the pool perturbation with the best fuzzy index.

    ``fit(X, y)`` z-scores ``X``, runs the release loop and keeps the winning
    perturbation; ``transform`` z-scores new data with the fitted statistics
    and applies the winner with its recorded seed and parameters. On the
    training matrix that reproduces the released instance exactly.

    Parameters mirror :class:`PoolConfig`; ``None`` pools mean the defaults.
    """

    def __init__(self, perturbators=None, attacks=None, classifiers=None, fis=None,
                 fi_threshold=0.0, max_rounds=1, seed=0, bin_width=DEFAULT_BIN_WIDTH,
                 known_fraction=DEFAULT_KNOWN_FRACTION, n_folds=5, utility_target=None):
        self.perturbators = perturbators
        self.attacks = attacks
        self.classifiers = classifiers
        self.fis = fis
        self.fi_threshold = fi_threshold
        self.max_rounds = max_rounds
        self.seed = seed
        self.bin_width = bin_width
        self.known_fraction = known_fraction
        self.n_folds = n_folds
        self.utility_target = utility_target

    def _config(self):
        doc = {k: v for k, v in self.get_params().items() if v is not None}
        return PoolConfig.from_dict(doc)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, ensure_min_samples=2)
        cfg = self._config()
        raw = Dataset(features=X, labels=np.asarray(y).astype(str),
                      attr_names=tuple(f"x{j}" for j in range(X.shape[1])),
                      normalization_state=RAW)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.constant_ = (X.max(axis=0) == X.min(axis=0)) | (std == 0)
        self.scale_ = np.where(self.constant_, 1.0, std)
        d = zscore_normalize(raw)
        self.report_, released = release_loop(d, cfg)
        self.released_ = released is not None
        win = self.report_.winner_result
        if win is None:
            raise PrivSelectError("every pool member failed; see report_")
        self.winner_ = win.instance.provenance()
        self.fi_ = win.fi
        est = make_perturber(win.algorithm, seed=win.seed)
        accepted = est.get_params()
        est.set_params(**{k: v for k, v in win.instance.params.items() if k in accepted})
        self.perturber_ = est.fit(d.features)
        return self

    def _standardize(self, X):
        return np.where(self.constant_, 0.0, (X - self.mean_) / self.scale_)

    def transform(self, X):
        check_is_fitted(self, "perturber_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.perturber_.transform(self._standardize(X))
