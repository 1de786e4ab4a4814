"""Command-line interface.

Exit codes: 0 success (dataset released), 2 threshold not met, 1 error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from ._validation import PrivSelectError
from .attacks import ATTACKS, DEFAULT_KNOWN_FRACTION, run_attack_pool
from .dataset import load_csv, write_csv, zscore_normalize
from .fis import fuzzy_index, load_fis_config
from .orchestrator import (
    DEFAULT_PERTURBATORS,
    PoolConfig,
    release_loop,
    run_provenance,
    write_outputs,
)
from .perturbation import ALGORITHMS, perturb, save_instance
from .privacy import DEFAULT_BIN_WIDTH
from .resistance import resistance_guarantee, var_p_per_attribute
from .utility import CLASSIFIERS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD_MISS = 2
OUT_DIR_ENV = "PRIVSELECT_OUT_DIR"
DEFAULT_OUT_DIR = "privselect_out"

log = logging.getLogger("privselect")


def _comma_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _read_config(path):
    if path is None:
        return {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise PrivSelectError(f"{path}: top level must be a mapping")
    return doc


def _default_out_dir():
    return os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR)


def _require_seed(args):
    if args.seed is None and os.environ.get("CI"):
        raise PrivSelectError("--seed is mandatory when CI is set")


def build_run_config(args):
    """Merge the config file with command-line flags; flags win."""
    doc = _read_config(args.config)
    run = {
        "input": doc.pop("input", None),
        "label": doc.pop("label", None),
        "out_dir": doc.pop("out_dir", None),
    }
    doc.pop("verbosity", None)
    if args.input is not None:
        run["input"] = args.input
    if args.label is not None:
        run["label"] = args.label
    if args.out_dir is not None:
        run["out_dir"] = args.out_dir
    run["out_dir"] = run["out_dir"] or _default_out_dir()
    if run["input"] is None or run["label"] is None:
        raise PrivSelectError("--input and --label are required (flag or config file)")
    if not Path(run["input"]).is_file():
        raise FileNotFoundError(f"input file not found: {run['input']}")

    overrides = {
        "fi_threshold": args.fi_threshold,
        "max_rounds": args.max_rounds,
        "seed": args.seed,
        "bin_width": args.bin_width,
        "known_fraction": args.known_fraction,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.pool:
        defaults = dict(DEFAULT_PERTURBATORS)
        doc["perturbators"] = [(n, defaults.get(n, {})) for n in _comma_list(args.pool)]
    if args.attacks:
        doc["attacks"] = _comma_list(args.attacks)
    if args.classifiers:
        doc["classifiers"] = _comma_list(args.classifiers)
    run["pool"] = PoolConfig.from_dict(doc)
    return run


def cmd_evaluate(args):
    _require_seed(args)
    run = build_run_config(args)
    d = zscore_normalize(load_csv(run["input"], _label(run["label"])))
    cfg = run["pool"]
    report, released = release_loop(d, cfg)
    paths = write_outputs(report, d, released, run["out_dir"])
    sys.stdout.write(report.rank_table_text())
    if released is not None:
        print(f"released {report.winner_result.algorithm} (FI {report.fi_opt:.4f}) -> {paths['released']}")
        return EXIT_OK
    fi_opt = "n/a" if report.fi_opt is None else f"{report.fi_opt:.4f}"
    print(f"FI threshold {cfg.fi_threshold} not met after {report.rounds_used} round(s); "
          f"best FI {fi_opt}; report at {paths['report']}")
    return EXIT_THRESHOLD_MISS


def _label(label):
    return int(label) if isinstance(label, str) and label.lstrip("-").isdigit() else label


def cmd_perturb(args):
    _require_seed(args)
    d = zscore_normalize(load_csv(args.input, _label(args.label)))
    params = {}
    if args.algo in ("additive_noise", "geometric"):
        params["sigma"] = args.sigma
    if args.algo in ("rotation", "geometric"):
        params["iterations"] = args.iterations
        params["bin_width"] = args.bin_width
    if args.algo == "laplace_ldp":
        params["epsilon"] = args.epsilon
    seed = 0 if args.seed is None else args.seed
    inst = perturb(d, args.algo, seed, **params)
    out = Path(args.out) if args.out else Path(args.out_dir or _default_out_dir()) / f"perturbed_{args.algo}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, sidecar = save_instance(inst, out, labels=d.labels, attr_names=d.attr_names,
                                      label_name=d.label_name)
    print(f"wrote {csv_path} and {sidecar}")
    return EXIT_OK


def cmd_attack(args):
    _require_seed(args)
    label = _label(args.label)
    original = zscore_normalize(load_csv(args.original, label))
    perturbed = load_csv(args.perturbed, label)
    if perturbed.features.shape != original.features.shape:
        raise PrivSelectError(
            f"perturbed shape {perturbed.features.shape} != original {original.features.shape}"
        )
    attacks = _comma_list(args.attack)
    seed = 0 if args.seed is None else args.seed
    results = run_attack_pool(perturbed.features, original, attacks,
                              known_fraction=args.known_fraction, seed=seed)
    guarantee = resistance_guarantee(original, results)
    settings = {"attacks": attacks, "known_fraction": args.known_fraction, "seed": seed}
    digest = hashlib.sha256(json.dumps(settings, sort_keys=True).encode()).hexdigest()
    stats = {"attacks": {}, "overall_min_std": guarantee.overall_min_std,
             "settings": settings, "provenance": run_provenance(seed, digest)}
    for r in results:
        var = var_p_per_attribute(original, r)
        stats["attacks"][r.attack] = {
            "var_p": dict(zip(original.attr_names, var.tolist())),
            "var_p_min": float(var.min()),
            "sqrt_var_p_min": float(np.sqrt(var.min())),
            "assumptions": r.assumptions,
        }
        print(f"{r.attack}: Var(P)_min = {var.min():.6e}  sqrt = {np.sqrt(var.min()):.6f}")
    print(f"overall sqrt(Var(P)_min) = {guarantee.overall_min_std:.6f}")
    out = Path(args.out_dir or _default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    (out / "attack_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    for r in results:
        write_csv(r.reconstructed, out / f"reconstructed_{r.attack}.csv", labels=original.labels,
                  attr_names=original.attr_names, label_name=original.label_name)
    return EXIT_OK


def cmd_fis(args):
    model = load_fis_config(args.config) if args.config else load_fis_config()
    fi = fuzzy_index(args.privacy, args.resistance, args.utility, model)
    print(f"{fi:.6f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="privselect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="rank the perturbation pool and release the best instance")
    ev.add_argument("--input")
    ev.add_argument("--label")
    ev.add_argument("--config", help="YAML/JSON run configuration; flags override it")
    ev.add_argument("--out-dir")
    ev.add_argument("--fi-threshold", type=float)
    ev.add_argument("--max-rounds", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--pool", help=f"comma list from {','.join(ALGORITHMS)}")
    ev.add_argument("--attacks", help=f"comma list from {','.join(ATTACKS)}")
    ev.add_argument("--classifiers", help=f"comma list from {','.join(CLASSIFIERS)}")
    ev.add_argument("--bin-width", type=float, help=f"default {DEFAULT_BIN_WIDTH}")
    ev.add_argument("--known-fraction", type=float, help=f"default {DEFAULT_KNOWN_FRACTION}")
    ev.set_defaults(func=cmd_evaluate)

    pt = sub.add_parser("perturb", help="apply one perturbation algorithm")
    pt.add_argument("--input", required=True)
    pt.add_argument("--label", required=True)
    pt.add_argument("--algo", required=True, choices=ALGORITHMS)
    pt.add_argument("--seed", type=int)
    pt.add_argument("--sigma", type=float, default=0.3)
    pt.add_argument("--epsilon", type=float, default=1.0)
    pt.add_argument("--iterations", type=int, default=10)
    pt.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    pt.add_argument("--out", help="output CSV path")
    pt.add_argument("--out-dir")
    pt.set_defaults(func=cmd_perturb)

    at = sub.add_parser("attack", help="run reconstruction attacks and print Var(P)")
    at.add_argument("--original", required=True, help="raw original CSV (z-scored internally)")
    at.add_argument("--perturbed", required=True, help="CSV written by the perturb command")
    at.add_argument("--label", required=True)
    at.add_argument("--attack", default=",".join(ATTACKS), help="comma list of attacks")
    at.add_argument("--known-fraction", type=float, default=DEFAULT_KNOWN_FRACTION)
    at.add_argument("--seed", type=int)
    at.add_argument("--out-dir", help="where reconstructions and attack_stats.json go")
    at.set_defaults(func=cmd_attack)

    fz = sub.add_parser("fis", help="evaluate the fuzzy index for one input triple")
    fz.add_argument("privacy", type=float)
    fz.add_argument("resistance", type=float)
    fz.add_argument("utility", type=float)
    fz.add_argument("--config", help="fuzzy model document (YAML/JSON)")
    fz.set_defaults(func=cmd_fis)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PrivSelectError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
