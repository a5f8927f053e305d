"""Command-line entry points wiring the pipeline into reproducible runs.

Commands: synth (generate a raw CSV trio), unify (link raw CSVs into
profiles.csv), sweep (oversampling-ratio evaluation sweep), train
(single fit to model.json), report (render report.json as a table).

Exit codes are a stable contract: 0 success, 2 usage/input problems,
3 I/O failures, 4 computation failures. Option values resolve as
flags > config file > defaults, with READMIT_SEED as a seed fallback.
JSON artifacts embed the tool version and the fully resolved
configuration; re-running with the same inputs is byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import cohort as cohort_mod
from . import evaluate as eval_mod
from . import models as models_mod
from . import synthgen
from .errors import (
    EmptyKeyPart,
    InfeasibleSpec,
    MalformedCsv,
    ReadmitError,
    UnmappableFamilyType,
)
from .features import FeatureSchema, encode, standardize
from .resample import ORIGINAL, SmoteConfig, smote
from .seeding import derive_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_COMPUTE = 4

DEFAULTS = {
    "seed": 0,
    "folds": 5,
    "model": "gbm",
    "k": 5,
    "ratios": "original,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
    "ratio": "original",
    "include_income": False,
    "n_trees": 100,
    "learning_rate": 0.1,
    "max_depth": 3,
    "min_samples_leaf": 1,
    "ridge": 1e-6,
}


class UsageError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    return payload


def _resolve(args, cfg: dict, key: str):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    if key == "seed":
        env = os.environ.get("READMIT_SEED")
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise UsageError(
                    f"READMIT_SEED must be an integer, got {env!r}"
                ) from None
    return DEFAULTS[key]


def parse_ratio_token(token: str) -> float | str:
    token = token.strip()
    if token.lower() == ORIGINAL:
        return ORIGINAL
    try:
        value = float(token)
    except ValueError:
        raise UsageError(
            f"bad ratio {token!r}: expected 'original' or a number in (0, 1]"
        ) from None
    if not (0.0 < value <= 1.0):
        raise UsageError(f"ratio {token!r} outside (0, 1]")
    return value


def parse_ratios(tokens: str) -> list[float | str]:
    parts = [t for t in tokens.split(",") if t.strip()]
    if not parts:
        raise UsageError("empty ratio list")
    return [parse_ratio_token(t) for t in parts]


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _train_config(resolved: dict) -> models_mod.TrainConfig:
    try:
        return models_mod.TrainConfig(
            gbm=models_mod.GbmParams(
                n_trees=int(resolved["n_trees"]),
                learning_rate=float(resolved["learning_rate"]),
                max_depth=int(resolved["max_depth"]),
                min_samples_leaf=int(resolved["min_samples_leaf"]),
            ),
            logistic=models_mod.LogisticParams(ridge=float(resolved["ridge"])),
            seed=int(resolved["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --- commands ------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _load_config_file(args.config)
    spec_path = args.spec or cfg.get("spec")
    if spec_path is None:
        spec_path = synthgen.default_spec_path()
    elif not Path(spec_path).exists():
        raise UsageError(f"spec file not found: {spec_path}")
    try:
        spec = synthgen.load_spec(spec_path)
    except (json.JSONDecodeError, InfeasibleSpec, TypeError) as exc:
        raise UsageError(f"bad spec {spec_path}: {exc}") from None

    seed_flag = getattr(args, "seed", None)
    if seed_flag is None and "seed" not in cfg \
            and os.environ.get("READMIT_SEED") is None:
        seed = spec.seed
    else:
        seed = int(_resolve(args, cfg, "seed"))
    spec = dataclasses.replace(spec, seed=seed)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cohort = synthgen.generate(spec)
    except InfeasibleSpec as exc:
        raise UsageError(f"bad spec {spec_path}: {exc}") from None
    synthgen.emit_raw_files(cohort, out_dir)

    spec_dict = spec.to_json_dict()
    spec_blob = json.dumps(spec_dict, sort_keys=True).encode("utf-8")
    manifest = {
        "version": __version__,
        "seed": seed,
        "spec": spec_dict,
        "spec_sha256": hashlib.sha256(spec_blob).hexdigest(),
        "n_profiles": len(cohort),
        "n_positive": sum(p.readmit for p in cohort),
        "files": ["demographics.csv", "exits.csv", "incidents.csv"],
    }
    _dump_json(manifest, out_dir / "cohort_manifest.json")
    print(f"cohort: {len(cohort)} profiles "
          f"({manifest['n_positive']} readmitted) -> {out_dir}")
    return EXIT_OK


def cmd_unify(args) -> int:
    demo = cohort_mod.read_demographics(args.demographics)
    exits = cohort_mod.read_exits(args.exits)
    incidents = cohort_mod.read_incidents(args.incidents)
    if not exits:
        print("warning: no exit records; every episode will be open",
              file=sys.stderr)

    result = cohort_mod.unify(demo, exits, incidents)
    out_path = Path(args.out)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True, exist_ok=True)
    cohort_mod.write_profiles(result.profiles, out_path)

    warnings_path = out_path.with_name(out_path.name + ".warnings.log")
    with open(warnings_path, "w", encoding="utf-8") as fh:
        for warning in result.warnings:
            fh.write(str(warning) + "\n")

    print(f"profiles: {len(result.profiles)}")
    print(f"removed: {result.removed_not_admitted}")
    print(f"warnings: {len(result.warnings)} -> {warnings_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config_file(args.config)
    resolved = {key: _resolve(args, cfg, key) for key in (
        "seed", "folds", "model", "k", "ratios", "include_income",
        "n_trees", "learning_rate", "max_depth", "min_samples_leaf", "ridge",
    )}
    ratios = parse_ratios(str(resolved["ratios"]))
    if resolved["model"] not in eval_mod.MODEL_KINDS:
        raise UsageError(f"unknown model {resolved['model']!r}")

    profiles = cohort_mod.read_profiles(args.profiles)
    dropped = 0
    if resolved["include_income"]:
        n_before = len(profiles)
        profiles = [p for p in profiles if p.income is not None]
        dropped = n_before - len(profiles)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = eval_mod.sweep(
        profiles,
        ratios,
        model_kind=str(resolved["model"]),
        k=int(resolved["k"]),
        train_config=_train_config(resolved),
        n_folds=int(resolved["folds"]),
        seed=int(resolved["seed"]),
        include_income=bool(resolved["include_income"]),
    )

    resolved["ratios"] = [eval_mod.ratio_label(r) for r in ratios]
    payload = {
        "version": __version__,
        "config": resolved,
        "dropped_missing_income": dropped,
        "rows": [row.to_dict() for row in report.rows],
    }
    _dump_json(payload, out_dir / "report.json")
    FeatureSchema(include_income=bool(resolved["include_income"])).write(
        out_dir / "schema.json"
    )
    for label, curve in report.curves.items():
        eval_mod.write_roc_csv(curve, out_dir / f"roc_{label}.csv")
    print(f"report: {out_dir / 'report.json'} ({len(report.rows)} rows)")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config_file(args.config)
    resolved = {key: _resolve(args, cfg, key) for key in (
        "seed", "model", "k", "ratio", "include_income",
        "n_trees", "learning_rate", "max_depth", "min_samples_leaf", "ridge",
    )}
    ratio = parse_ratio_token(str(resolved["ratio"]))
    if resolved["model"] not in eval_mod.MODEL_KINDS:
        raise UsageError(f"unknown model {resolved['model']!r}")

    profiles = cohort_mod.read_profiles(args.profiles)
    if resolved["include_income"]:
        profiles = [p for p in profiles if p.income is not None]

    schema = FeatureSchema(include_income=bool(resolved["include_income"]))
    seed = int(resolved["seed"])
    enc = encode(profiles, schema)
    std, _stats = standardize(enc.dataset)
    train_data = smote(
        std,
        SmoteConfig(ratio=ratio, k=int(resolved["k"]),
                    seed=derive_seed(seed, "smote")),
    )
    train_config = _train_config(resolved)
    if resolved["model"] == "logistic":
        model = models_mod.fit_logistic(train_data, train_config)
    else:
        model = models_mod.fit_gbm(train_data, train_config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved["ratio"] = eval_mod.ratio_label(ratio)
    models_mod.save_model(
        model,
        out_dir / "model.json",
        extra={"version": __version__, "config": resolved,
               "columns": schema.columns},
    )
    schema.write(out_dir / "schema.json")
    print(f"model: {out_dir / 'model.json'}")
    return EXIT_OK


_REPORT_METRICS = (
    ("Accuracy", "accuracy", "{:.3f}"),
    ("True Positives", "tp", "{:d}"),
    ("False Negatives", "fn", "{:d}"),
    ("False Positives", "fp", "{:d}"),
    ("True Negatives", "tn", "{:d}"),
    ("AUC", "auc", "{:.3f}"),
    ("Sensitivity", "sensitivity", "{:.3f}"),
)


def cmd_report(args) -> int:
    path = Path(args.report)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        rows = payload["rows"]
        labels = [row["ratio"] for row in rows]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"bad report file {path}: {exc}") from None

    header = ["Ratio"] + labels
    table = [header]
    for title, key, fmt in _REPORT_METRICS:
        try:
            table.append([title] + [fmt.format(row[key]) for row in rows])
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"bad report file {path}: {exc}") from None

    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    for i, row in enumerate(table):
        line = "  ".join(
            cell.ljust(widths[c]) if c == 0 else cell.rjust(widths[c])
            for c, cell in enumerate(row)
        )
        print(line.rstrip())
        if i == 0:
            print("  ".join("-" * w for w in widths))
    return EXIT_OK


# --- wiring --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readmit",
        description="Shelter readmission pipeline: synthesize, link, "
                    "train, and evaluate.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None,
                       help="JSON file supplying option defaults")

    p_synth = sub.add_parser("synth", help="generate a synthetic raw CSV trio")
    add_common(p_synth)
    p_synth.add_argument("--spec", default=None,
                         help="cohort spec JSON (defaults to the bundled one)")
    p_synth.add_argument("-o", "--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_unify = sub.add_parser("unify",
                             help="link raw CSVs into profiles.csv")
    p_unify.add_argument("demographics")
    p_unify.add_argument("exits")
    p_unify.add_argument("incidents")
    p_unify.add_argument("-o", "--out", required=True,
                         help="output profiles.csv path")
    p_unify.set_defaults(func=cmd_unify)

    def add_model_opts(p):
        p.add_argument("--model", choices=list(eval_mod.MODEL_KINDS),
                       default=None)
        p.add_argument("--k", type=int, default=None,
                       help="oversampling neighbor count")
        p.add_argument("--include-income", dest="include_income",
                       action="store_true", default=None)
        p.add_argument("--n-trees", dest="n_trees", type=int, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float,
                       default=None)
        p.add_argument("--max-depth", dest="max_depth", type=int, default=None)
        p.add_argument("--min-samples-leaf", dest="min_samples_leaf",
                       type=int, default=None)
        p.add_argument("--ridge", type=float, default=None)

    p_sweep = sub.add_parser("sweep",
                             help="evaluate across oversampling ratios")
    add_common(p_sweep)
    add_model_opts(p_sweep)
    p_sweep.add_argument("--profiles", required=True)
    p_sweep.add_argument("--ratios", default=None,
                         help="comma list, e.g. original,0.3,1.0")
    p_sweep.add_argument("--folds", type=int, default=None)
    p_sweep.add_argument("-o", "--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_train = sub.add_parser("train", help="fit one model to model.json")
    add_common(p_train)
    add_model_opts(p_train)
    p_train.add_argument("--profiles", required=True)
    p_train.add_argument("--ratio", default=None,
                         help="single oversampling ratio or 'original'")
    p_train.add_argument("-o", "--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_report = sub.add_parser("report",
                              help="render report.json as an aligned table")
    p_report.add_argument("--report", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


_INPUT_ERRORS = (MalformedCsv, EmptyKeyPart, UnmappableFamilyType)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ReadmitError, ValueError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
