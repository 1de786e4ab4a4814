"""Mamdani fuzzy inference producing the fuzzy index (FI).

Inputs are the scaled privacy guarantee, the scaled attack-resistance
guarantee and the utility, each in [0, 1]. Inference is max-min: AND is
``min`` over antecedents, rule outputs clip their consequent set, clipped
sets are aggregated with ``max`` and the result is defuzzified by its
centre of gravity on a uniform grid over [0, 1].
"""
from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._validation import DegenerateOutputWarning, FISConfigError, PrivSelectWarning

LEVELS = ("LOW", "MEDIUM", "HIGH")
INPUTS = ("privacy", "attack_resistance", "utility")
OUTPUT = "fi"
SHAPES = {"gaussian": 2, "triangular": 3, "trapezoidal": 4}
DEFAULT_SIGMA = 0.15
DEFAULT_CENTERS = {"LOW": 0.0, "MEDIUM": 0.5, "HIGH": 1.0}
DEFAULT_RESOLUTION = 1001
MIN_RESOLUTION = 101
DEGENERATE_FI = 0.5


@dataclass(frozen=True)
class MembershipFunction:
    shape: str
    params: tuple

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise FISConfigError(f"unknown shape {self.shape!r}; choose from {sorted(SHAPES)}")
        params = tuple(float(v) for v in self.params)
        if len(params) != SHAPES[self.shape]:
            raise FISConfigError(f"{self.shape} takes {SHAPES[self.shape]} parameters, got {len(params)}")
        if not all(np.isfinite(params)):
            raise FISConfigError("membership parameters must be finite")
        if self.shape == "gaussian" and params[1] <= 0:
            raise FISConfigError(f"gaussian sigma must be > 0, got {params[1]}")
        if self.shape != "gaussian" and list(params) != sorted(params):
            raise FISConfigError(f"{self.shape} parameters must be non-decreasing, got {params}")
        object.__setattr__(self, "params", params)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.shape == "gaussian":
            return np.exp(-((x - p[0]) ** 2) / (2.0 * p[1] ** 2))
        if self.shape == "triangular":
            a, b, c = p
            p = (a, b, b, c)
        a, b, c, d = p
        rise = np.ones_like(x) if b == a else (x - a) / (b - a)
        fall = np.ones_like(x) if d == c else (d - x) / (d - c)
        # a zero-width edge is a vertical step that includes its endpoint
        rise = np.where(x < a, 0.0, np.where(x >= b, 1.0, rise))
        fall = np.where(x > d, 0.0, np.where(x <= c, 1.0, fall))
        return np.clip(np.minimum(rise, fall), 0.0, 1.0)

    def to_dict(self):
        return {"shape": self.shape, "params": list(self.params)}


@dataclass(frozen=True)
class Rule:
    antecedents: tuple  # ((variable, level), ...)
    consequent: str

    def __str__(self):
        cond = " AND ".join(f"{v} = {lvl}" for v, lvl in self.antecedents)
        return f"IF ({cond}) THEN (fi = {self.consequent})"


@dataclass(frozen=True)
class RuleBase:
    rules: tuple

    def __post_init__(self):
        if not self.rules:
            raise FISConfigError("rule base is empty")
        object.__setattr__(self, "rules", tuple(self.rules))


def _r(consequent, **ante):
    return Rule(tuple(ante.items()), consequent)


DEFAULT_RULES = (
    _r("LOW", privacy="LOW"),
    _r("LOW", attack_resistance="LOW"),
    _r("LOW", utility="LOW"),
    _r("MEDIUM", privacy="MEDIUM", attack_resistance="MEDIUM", utility="MEDIUM"),
    _r("MEDIUM", privacy="MEDIUM", attack_resistance="MEDIUM", utility="HIGH"),
    _r("MEDIUM", privacy="MEDIUM", attack_resistance="HIGH", utility="MEDIUM"),
    _r("HIGH", privacy="MEDIUM", attack_resistance="HIGH", utility="HIGH"),
    _r("MEDIUM", privacy="HIGH", attack_resistance="MEDIUM", utility="MEDIUM"),
    _r("HIGH", privacy="HIGH", attack_resistance="MEDIUM", utility="HIGH"),
    _r("HIGH", privacy="HIGH", attack_resistance="HIGH", utility="MEDIUM"),
    _r("HIGH", privacy="HIGH", attack_resistance="HIGH", utility="HIGH"),
)


def default_memberships():
    return {lvl: MembershipFunction("gaussian", (c, DEFAULT_SIGMA)) for lvl, c in DEFAULT_CENTERS.items()}


@dataclass(frozen=True)
class FISModel:
    inputs: dict  # variable -> {level: MembershipFunction}
    output: dict  # level -> MembershipFunction
    rulebase: RuleBase
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if set(self.inputs) != set(INPUTS):
            raise FISConfigError(f"input variables must be {INPUTS}, got {sorted(self.inputs)}")
        for var, mfs in self.inputs.items():
            _check_levels(mfs, f"variables.{var}")
        _check_levels(self.output, f"variables.{OUTPUT}")
        for i, rule in enumerate(self.rulebase.rules):
            for var, lvl in rule.antecedents:
                if var not in self.inputs:
                    raise FISConfigError(f"undefined variable {var!r}", f"rules[{i}]")
                if lvl not in self.inputs[var]:
                    raise FISConfigError(f"undefined level {lvl!r} for {var}", f"rules[{i}]")
            if rule.consequent not in self.output:
                raise FISConfigError(f"undefined output level {rule.consequent!r}", f"rules[{i}]")
        if isinstance(self.resolution, bool) or not isinstance(self.resolution, int) \
                or self.resolution < MIN_RESOLUTION:
            raise FISConfigError(f"resolution must be an integer >= {MIN_RESOLUTION}", "resolution")

    def __call__(self, privacy, resistance, utility):
        return fuzzy_index(privacy, resistance, utility, self)

    def predict(self, X):
        """FI for every row of an ``(n, 3)`` array of (privacy, resistance, utility)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != 3:
            raise FISConfigError(f"expected 3 input columns, got {X.shape[1]}")
        return np.array([fuzzy_index(*row, self) for row in X])

    def to_dict(self):
        return {
            "resolution": self.resolution,
            "variables": {
                **{v: {lvl: mf.to_dict() for lvl, mf in mfs.items()} for v, mfs in self.inputs.items()},
                OUTPUT: {lvl: mf.to_dict() for lvl, mf in self.output.items()},
            },
            "rules": [
                {"if": dict(r.antecedents), "then": r.consequent} for r in self.rulebase.rules
            ],
        }


def _check_levels(mfs, path):
    bad = set(mfs) - set(LEVELS)
    if bad:
        raise FISConfigError(f"unknown levels {sorted(bad)}; allowed {LEVELS}", path)
    for lvl, mf in mfs.items():
        if not isinstance(mf, MembershipFunction):
            raise FISConfigError("not a membership function", f"{path}.{lvl}")


def default_model(resolution=DEFAULT_RESOLUTION):
    return FISModel(
        inputs={v: default_memberships() for v in INPUTS},
        output=default_memberships(),
        rulebase=RuleBase(DEFAULT_RULES),
        resolution=resolution,
    )


def fuzzify(x, mfs):
    """Membership degree of a crisp input in every level of one variable.

    Inputs outside [0, 1] are clamped with a warning.
    """
    x = float(x)
    if not np.isfinite(x):
        raise FISConfigError(f"cannot fuzzify non-finite input {x}")
    if not 0.0 <= x <= 1.0:
        warnings.warn(f"input {x} outside [0, 1]; clamped", PrivSelectWarning, stacklevel=2)
        x = min(max(x, 0.0), 1.0)
    return {lvl: float(mf(x)) for lvl, mf in mfs.items()}


def evaluate_rules(degrees, rb):
    """Clipping height of every output level: max over rules of min over antecedents."""
    heights = {lvl: 0.0 for lvl in LEVELS}
    for i, rule in enumerate(rb.rules):
        try:
            strength = min(degrees[var][lvl] for var, lvl in rule.antecedents)
        except KeyError as exc:
            raise FISConfigError(f"rule references undefined {exc.args[0]!r}", f"rules[{i}]") from None
        heights[rule.consequent] = max(heights.get(rule.consequent, 0.0), strength)
    return heights


def aggregate(heights, output_mfs, grid):
    """Max of the clipped output sets, sampled on ``grid``."""
    mu = np.zeros_like(grid)
    for lvl, h in heights.items():
        if h > 0:
            mu = np.maximum(mu, np.minimum(h, output_mfs[lvl](grid)))
    return mu


def defuzzify_cog(heights, output_mfs, resolution=DEFAULT_RESOLUTION):
    """Centre of gravity of the aggregated output on ``resolution`` grid points.

    Both sums use trapezoid weights (half weight at 0 and 1), which makes the
    ratio converge quadratically in the grid spacing.

    When nothing fired the aggregate is empty; 0.5 is returned with a
    :class:`DegenerateOutputWarning`.
    """
    grid = np.linspace(0.0, 1.0, int(resolution))
    w = np.ones_like(grid)
    w[[0, -1]] = 0.5
    mu = aggregate(heights, output_mfs, grid) * w
    total = mu.sum()
    if total <= 0:
        warnings.warn("no rule fired; fuzzy index defaults to 0.5", DegenerateOutputWarning,
                      stacklevel=2)
        return DEGENERATE_FI
    return float(np.dot(mu, grid) / total)


def fuzzy_index(privacy, resistance, utility, model=None):
    model = model or default_model()
    crisp = dict(zip(INPUTS, (privacy, resistance, utility)))
    degrees = {v: fuzzify(crisp[v], model.inputs[v]) for v in INPUTS}
    heights = evaluate_rules(degrees, model.rulebase)
    return defuzzify_cog(heights, model.output, model.resolution)


def _mf_from_doc(doc, path):
    if not isinstance(doc, dict):
        raise FISConfigError("expected a mapping with 'shape' and 'params'", path)
    unknown = set(doc) - {"shape", "params"}
    if unknown:
        raise FISConfigError(f"unknown keys {sorted(unknown)}", path)
    try:
        return MembershipFunction(doc.get("shape", "gaussian"), tuple(doc.get("params", ())))
    except FISConfigError as exc:
        raise FISConfigError(str(exc), path) from None
    except (TypeError, ValueError) as exc:
        raise FISConfigError(f"bad parameters: {exc}", path) from None


def _rules_from_doc(doc):
    if not isinstance(doc, list) or not doc:
        raise FISConfigError("expected a non-empty list of rules", "rules")
    rules = []
    for i, entry in enumerate(doc):
        path = f"rules[{i}]"
        if not isinstance(entry, dict) or set(entry) != {"if", "then"}:
            raise FISConfigError("each rule needs exactly 'if' and 'then'", path)
        ante = entry["if"]
        if not isinstance(ante, dict) or not ante:
            raise FISConfigError("'if' must map variables to levels", f"{path}.if")
        for var, lvl in ante.items():
            if var not in INPUTS:
                raise FISConfigError(f"unknown variable {var!r}", f"{path}.if.{var}")
            if lvl not in LEVELS:
                raise FISConfigError(f"unknown level {lvl!r}", f"{path}.if.{var}")
        if entry["then"] not in LEVELS:
            raise FISConfigError(f"unknown level {entry['then']!r}", f"{path}.then")
        rules.append(Rule(tuple(ante.items()), entry["then"]))
    return RuleBase(tuple(rules))


def load_fis_config(document=None):
    """Build a validated :class:`FISModel` from a mapping, YAML/JSON text or file path.

    Anything omitted falls back to the defaults: three gaussians per variable
    (centres 0, 0.5, 1; sigma 0.15), the standard eleven rules and 1001 grid
    points. Membership overrides are per level, so a document can replace one
    set and keep the rest.
    """
    if document is None:
        doc = {}
    elif isinstance(document, dict):
        doc = copy.deepcopy(document)
    elif isinstance(document, Path) or (isinstance(document, str) and "\n" not in document
                                        and Path(document).is_file()):
        doc = yaml.safe_load(Path(document).read_text(encoding="utf-8")) or {}
    elif isinstance(document, str):
        doc = yaml.safe_load(document) or {}
    else:
        raise FISConfigError(f"cannot read a fuzzy model from {type(document).__name__}")
    if not isinstance(doc, dict):
        raise FISConfigError("top level must be a mapping")
    unknown = set(doc) - {"variables", "rules", "resolution"}
    if unknown:
        raise FISConfigError(f"unknown keys {sorted(unknown)}")

    variables = doc.get("variables") or {}
    if not isinstance(variables, dict):
        raise FISConfigError("expected a mapping", "variables")
    unknown = set(variables) - set(INPUTS) - {OUTPUT}
    if unknown:
        raise FISConfigError(f"unknown variables {sorted(unknown)}", "variables")
    sets = {}
    for var in (*INPUTS, OUTPUT):
        mfs = default_memberships()
        overrides = variables.get(var) or {}
        if not isinstance(overrides, dict):
            raise FISConfigError("expected a mapping of levels", f"variables.{var}")
        for lvl, mf_doc in overrides.items():
            if lvl not in LEVELS:
                raise FISConfigError(f"unknown level {lvl!r}; allowed {LEVELS}", f"variables.{var}.{lvl}")
            mfs[lvl] = _mf_from_doc(mf_doc, f"variables.{var}.{lvl}")
        sets[var] = mfs

    rulebase = _rules_from_doc(doc["rules"]) if "rules" in doc else RuleBase(DEFAULT_RULES)
    resolution = doc.get("resolution", DEFAULT_RESOLUTION)
    return FISModel(
        inputs={v: sets[v] for v in INPUTS},
        output=sets[OUTPUT],
        rulebase=rulebase,
        resolution=resolution,
    )
