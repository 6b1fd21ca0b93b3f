"""Batch command-line interface.

Subcommands: eda, fit, evaluate, simulate, smote. Each run reads an optional
JSON config file (--config), applies command-line overrides (flags win),
validates that no unknown keys are present, and writes its artifacts plus a
manifest.json (resolved config, config hash, seed, library versions) into
--outdir. Runs are deterministic: the same config and seed produce
byte-identical outputs.

Exit codes: 0 success (including a fit that did not converge, which is data,
not a tool failure), 2 usage or config errors, 3 data or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import zlib

import numpy as np

from . import __version__
from .baseline import LogisticConfig, LogisticModel, fit_logistic, fuse, predict_logistic
from .errors import ConfigError, DataError
from .estimation import OptimizerConfig, fit_mark_model
from .events import MarkModelParams, UnmarkedHawkesParams
from .imbalance import random_oversample, random_undersample, smote
from .ingest import (
    CsvSchema,
    FeatureStats,
    MINUTES_PER_DAY,
    SplitSpec,
    build_event_sequence,
    build_feature_matrix,
    eda_class_balance,
    eda_contingency,
    eda_grouped_log_histogram,
    eda_interarrival_series,
    eda_window_counts,
    mi_difference_matrix,
    parse_csv,
    time_split,
)
from .markmodel import score_sequence
from .metrics import confusion, curve_points, f_beta, pr_auc, roc_auc
from .simulation import SimConfig, simulate_hawkes_unmarked, simulate_marked_hawkes, simulate_poisson

SCHEMA_DEFAULTS = {
    "time": "TransactionDT",
    "label": "isFraud",
    "amount": "TransactionAmt",
    "product": "ProductCD",
    "days_since_last": None,
    "extra_categoricals": [],
}

SHARED_DEFAULTS = {
    "input": None,
    "outdir": "out",
    "seed": 0,
    "time_unit": "seconds",
    "schema": SCHEMA_DEFAULTS,
}

DEFAULTS = {
    "eda": {
        "hist_bins": 30,
        "mi_bins": 10,
        "window_minutes": 30,
        "hist_columns": ["amount"],
        "contingency_columns": ["product"],
    },
    "fit": {
        "train_days": 14,
        "test_days": 14,
        "fit_lr": True,
        "l2": 1e-4,
        "lr_max_iter": 1000,
        "restarts": 3,
        "max_iter": 500,
    },
    "evaluate": {
        "mark_model": None,
        "lr_model": None,
        "train_days": 14,
        "test_days": 14,
        "timeline_n": 100,
        "threshold": 0.5,
    },
    "simulate": {
        "kind": "marked",
        "horizon": 1440.0,
        "rate": 1.0,
        "mu": 0.5,
        "alpha": 0.5,
        "beta": 1.0,
        "delta": [[0.9, 0.1]],
        "gamma": [[[0.9, 0.1], [0.5, 0.5]]],
        "covariate_probs": None,
        "filename": "events.csv",
    },
    "smote": {
        "method": "smote",
        "k": 5,
        "target_ratio": 1.0,
        "filename": "resampled.csv",
    },
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def component_seed(master_seed: int, component: str) -> int:
    """Stable per-component substream of the master seed."""
    tag = zlib.crc32(component.encode("utf-8"))
    return int(np.random.SeedSequence([master_seed, tag]).generate_state(1)[0])


def resolve_config(subcommand: str, args) -> dict:
    merged = dict(SHARED_DEFAULTS)
    merged["schema"] = dict(SCHEMA_DEFAULTS)
    merged.update(DEFAULTS[subcommand])
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as handle:
                loaded = json.load(handle)
        except FileNotFoundError as err:
            raise ConfigError(f"config file not found: {args.config}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from err
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key == "schema":
                if not isinstance(value, dict):
                    raise ConfigError("schema must be an object")
                for skey in value:
                    if skey not in SCHEMA_DEFAULTS:
                        raise ConfigError(f"unknown schema key {skey!r}")
                merged["schema"].update(value)
            elif key in merged:
                merged[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r} for {subcommand}")
    for flag in ("input", "outdir", "seed"):
        value = getattr(args, flag)
        if value is not None:
            merged[flag] = value
    if args.time_unit is not None:
        merged["time_unit"] = args.time_unit
    if merged["time_unit"] not in ("seconds", "minutes"):
        raise ConfigError("time-unit must be 'seconds' or 'minutes'")
    if not isinstance(merged["seed"], int):
        raise ConfigError("seed must be an integer")
    if subcommand != "simulate" and not merged["input"]:
        raise ConfigError("an input CSV is required (--input or config key)")
    return merged


def schema_from_config(config: dict) -> CsvSchema:
    s = config["schema"]
    return CsvSchema(
        time=s["time"],
        label=s["label"],
        amount=s["amount"],
        product=s["product"],
        days_since_last=s["days_since_last"] or None,
        extra_categoricals=tuple(s["extra_categoricals"]),
        time_unit=config["time_unit"],
    )


def _config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def write_manifest(outdir: str, subcommand: str, config: dict) -> None:
    import numba
    import scipy

    manifest = {
        "subcommand": subcommand,
        "config": config,
        "config_hash": _config_hash(config),
        "seed": config["seed"],
        "versions": {
            "rarevent": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    write_json(os.path.join(outdir, "manifest.json"), manifest)


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _open_csv(path: str):
    handle = open(path, "w", newline="", encoding="utf-8")
    return handle, csv.writer(handle, lineterminator="\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_eda(config: dict) -> int:
    schema = schema_from_config(config)
    parsed = parse_csv(config["input"], schema)
    if not parsed.records:
        raise DataError("input contains no usable rows")
    outdir = config["outdir"]
    sequence, _ = build_event_sequence(parsed.records)
    ordered = sorted(parsed.records, key=lambda r: r.time_seconds)

    balance = eda_class_balance(parsed.records)
    handle, writer = _open_csv(os.path.join(outdir, "class_balance.csv"))
    with handle:
        writer.writerow(["class", "count", "share"])
        total = balance["normal"] + balance["fraud"]
        writer.writerow(["normal", balance["normal"], balance["normal"] / total])
        writer.writerow(["fraud", balance["fraud"], balance["fraud_share"]])
        writer.writerow(["skipped_rows", parsed.skipped, ""])

    for column in config["hist_columns"]:
        hist = eda_grouped_log_histogram(parsed.records, column, config["hist_bins"])
        handle, writer = _open_csv(os.path.join(outdir, f"log_histogram_{column}.csv"))
        with handle:
            writer.writerow(["bin_left", "bin_right", "density_normal", "density_fraud"])
            for i in range(len(hist.density_normal)):
                writer.writerow(
                    [hist.edges[i], hist.edges[i + 1], hist.density_normal[i], hist.density_fraud[i]]
                )

    for column in config["contingency_columns"]:
        rows = eda_contingency(parsed.records, column)
        handle, writer = _open_csv(os.path.join(outdir, f"contingency_{column}.csv"))
        with handle:
            writer.writerow(["category", "normal", "fraud", "fraud_proportion"])
            writer.writerows(rows)

    handle, writer = _open_csv(os.path.join(outdir, "interarrivals.csv"))
    with handle:
        writer.writerow(["time_minutes", "gap_minutes"])
        writer.writerows(eda_interarrival_series(sequence))

    wc = eda_window_counts(sequence, config["window_minutes"])
    handle, writer = _open_csv(os.path.join(outdir, "window_counts.csv"))
    with handle:
        writer.writerow(["row"] + [f"w{w}" for w in range(wc.counts.shape[1])])
        for d in range(wc.counts.shape[0]):
            writer.writerow([f"day{d}"] + wc.counts[d].tolist())
        for i, label in enumerate(["min", "q1", "median", "q3", "max"]):
            writer.writerow([label] + wc.summaries[:, i].tolist())

    matrix, stats = build_feature_matrix(ordered, schema)
    keep = [i for i, name in enumerate(stats.names) if name != "intercept"]
    cls0 = matrix.values[matrix.labels == 0][:, keep]
    cls1 = matrix.values[matrix.labels == 1][:, keep]
    if len(cls0) == 0 or len(cls1) == 0:
        raise DataError("mutual-information difference needs rows of both classes")
    mi = mi_difference_matrix(cls0, cls1, config["mi_bins"])
    feature_names = [stats.names[i] for i in keep]
    handle, writer = _open_csv(os.path.join(outdir, "mi_difference.csv"))
    with handle:
        writer.writerow(["feature"] + feature_names)
        for name, row in zip(feature_names, mi):
            writer.writerow([name] + row.tolist())

    write_manifest(outdir, "eda", config)
    return 0


def mark_model_to_dict(fit, covariate_mapping: dict, config: dict) -> dict:
    params = fit.params
    return {
        "alpha_star": params.alpha_star,
        "beta": params.beta,
        "delta": params.delta.tolist(),
        "gamma": params.gamma.tolist(),
        "mark_count": params.mark_count,
        "covariate_count": params.covariate_count,
        "ci95": {name: list(bounds) for name, bounds in fit.ci95.items()},
        "boundary_parameters": list(fit.boundary_parameters),
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "covariance_is_pseudo_inverse": fit.covariance_is_pseudo_inverse,
        "n_events": fit.n_events,
        "seed": fit.seed,
        "covariate_mapping": covariate_mapping,
        "train_days": config["train_days"],
    }


def mark_model_from_dict(payload: dict):
    params = MarkModelParams(
        alpha_star=float(payload["alpha_star"]),
        beta=float(payload["beta"]),
        delta=np.asarray(payload["delta"], dtype=float),
        gamma=np.asarray(payload["gamma"], dtype=float),
    )
    return params, dict(payload["covariate_mapping"])


def cmd_fit(config: dict) -> int:
    schema = schema_from_config(config)
    parsed = parse_csv(config["input"], schema)
    if not parsed.records:
        raise DataError("input contains no usable rows")
    sequence, mapping = build_event_sequence(parsed.records)
    spec = SplitSpec(config["train_days"], config["test_days"])
    train, _ = time_split(sequence, spec)
    opt = OptimizerConfig(
        max_iter=config["max_iter"],
        restarts=config["restarts"],
        seed=component_seed(config["seed"], "fit-mark"),
    )
    fit = fit_mark_model(train, opt)
    outdir = config["outdir"]
    write_json(os.path.join(outdir, "mark_model.json"), mark_model_to_dict(fit, mapping, config))

    if config["fit_lr"]:
        ordered = sorted(parsed.records, key=lambda r: r.time_seconds)
        cut = config["train_days"] * MINUTES_PER_DAY
        train_records = [r for r, t in zip(ordered, sequence.times) if t < cut]
        matrix, stats = build_feature_matrix(train_records, schema)
        lr_config = LogisticConfig(l2=config["l2"], max_iter=config["lr_max_iter"])
        model = fit_logistic(matrix.values, matrix.labels, lr_config, matrix.names)
        payload = model.to_dict()
        payload["feature_stats"] = stats.to_dict()
        write_json(os.path.join(outdir, "lr_model.json"), payload)

    write_manifest(outdir, "fit", config)
    return 0


def _safe_metrics(scores: np.ndarray, labels: np.ndarray, threshold: float) -> dict:
    out = {"n": len(scores), "positives": int(np.sum(labels))}
    try:
        out["roc_auc"] = roc_auc(scores, labels)
    except ValueError as err:
        out["roc_auc"] = None
        out["roc_auc_note"] = str(err)
    try:
        out["pr_auc"] = pr_auc(scores, labels)
    except ValueError as err:
        out["pr_auc"] = None
        out["pr_auc_note"] = str(err)
    conf = confusion(scores, labels, threshold)
    out.update(
        {
            "threshold": threshold,
            "tp": conf.tp,
            "fp": conf.fp,
            "tn": conf.tn,
            "fn": conf.fn,
            "accuracy": conf.accuracy,
            "precision": conf.precision,
            "recall": conf.recall,
            "precision_undefined": conf.precision_undefined,
            "f1": f_beta(conf.precision, conf.recall, 1.0),
            "f2": f_beta(conf.precision, conf.recall, 2.0),
            "f0.5": f_beta(conf.precision, conf.recall, 0.5),
        }
    )
    return out


def _write_curves(outdir: str, tag: str, scores: np.ndarray, labels: np.ndarray) -> None:
    for kind in ("roc", "pr"):
        try:
            points = curve_points(scores, labels, kind)
        except ValueError:
            continue
        handle, writer = _open_csv(os.path.join(outdir, f"curve_{tag}_{kind}.csv"))
        with handle:
            if kind == "roc":
                writer.writerow(["threshold", "false_positive_rate", "true_positive_rate"])
            else:
                writer.writerow(["threshold", "recall", "precision"])
            for t, x, y in zip(points.thresholds, points.xs, points.ys):
                writer.writerow([t, x, y])


def cmd_evaluate(config: dict) -> int:
    if not config["mark_model"]:
        raise ConfigError("evaluate needs the mark_model JSON path (config key 'mark_model')")
    with open(config["mark_model"], encoding="utf-8") as handle:
        params, mapping = mark_model_from_dict(json.load(handle))

    schema = schema_from_config(config)
    parsed = parse_csv(config["input"], schema)
    if not parsed.records:
        raise DataError("input contains no usable rows")
    ordered = sorted(parsed.records, key=lambda r: r.time_seconds)
    sequence, _ = build_event_sequence(ordered, covariate_mapping=mapping)

    cut = config["train_days"] * MINUTES_PER_DAY
    end = cut + config["test_days"] * MINUTES_PER_DAY
    test_mask = (sequence.times >= cut) & (sequence.times < end)
    if not np.any(test_mask):
        raise DataError("no events fall inside the test window")

    scored_all = score_sequence(sequence, params)
    p_mark = np.array([s.score for s in scored_all])[test_mask]
    labels = (sequence.marks == 2).astype(np.int64)[test_mask]

    models = {"mark_model": p_mark}
    if config["lr_model"]:
        with open(config["lr_model"], encoding="utf-8") as handle:
            payload = json.load(handle)
        lr_model = LogisticModel.from_dict(payload)
        stats = FeatureStats.from_dict(payload["feature_stats"])
        matrix, _ = build_feature_matrix(ordered, schema, stats)
        p_lr = predict_logistic(lr_model, matrix.values)[test_mask]
        models["logistic"] = p_lr
        models["fusion"] = fuse(p_mark, p_lr)

    outdir = config["outdir"]
    metrics = {name: _safe_metrics(scores, labels, config["threshold"]) for name, scores in models.items()}
    write_json(os.path.join(outdir, "metrics.json"), metrics)
    for name, scores in models.items():
        _write_curves(outdir, name, scores, labels)

    idx = np.flatnonzero(test_mask)[: config["timeline_n"]]
    handle, writer = _open_csv(os.path.join(outdir, "timeline.csv"))
    with handle:
        header = ["event_index", "time_minutes", "covariate", "true_mark"]
        header += [f"p_{name}" for name in models]
        writer.writerow(header)
        for j, i in enumerate(int(g) for g in idx):
            row = [i, sequence.times[i], int(sequence.covariates[i]), int(sequence.marks[i])]
            row += [float(models[name][j]) for name in models]
            writer.writerow(row)

    write_manifest(outdir, "evaluate", config)
    return 0


def cmd_simulate(config: dict) -> int:
    kind = config["kind"]
    if kind not in ("poisson", "hawkes", "marked"):
        raise ConfigError(f"unknown simulation kind {kind!r}")
    if config["horizon"] <= 0:
        raise ConfigError("horizon must be > 0")
    seed = component_seed(config["seed"], f"simulate-{kind}")
    if kind == "poisson":
        if config["rate"] < 0:
            raise ConfigError("rate must be >= 0")
        times = simulate_poisson(config["rate"], config["horizon"], seed)
        marks = np.ones(len(times), dtype=np.int64)
        covs = np.ones(len(times), dtype=np.int64)
    elif kind == "hawkes":
        ground = _ground_params(config)
        times = simulate_hawkes_unmarked(ground, config["horizon"], seed)
        marks = np.ones(len(times), dtype=np.int64)
        covs = np.ones(len(times), dtype=np.int64)
    else:
        ground = _ground_params(config)
        sim = SimConfig(
            horizon=config["horizon"],
            seed=seed,
            mu=ground.mu,
            alpha=ground.alpha,
            beta=ground.beta,
            delta=np.asarray(config["delta"], dtype=float),
            gamma=np.asarray(config["gamma"], dtype=float),
            covariate_probs=None
            if config["covariate_probs"] is None
            else np.asarray(config["covariate_probs"], dtype=float),
        )
        sequence = simulate_marked_hawkes(sim)
        times, marks, covs = sequence.times, sequence.marks, sequence.covariates

    outdir = config["outdir"]
    handle, writer = _open_csv(os.path.join(outdir, config["filename"]))
    with handle:
        writer.writerow(["TransactionDT", "isFraud", "TransactionAmt", "ProductCD"])
        for t, m, z in zip(times, marks, covs):
            writer.writerow([float(t) * 60.0, int(m) - 1, 1.0, str(int(z))])
    write_manifest(outdir, "simulate", config)
    return 0


def _ground_params(config: dict) -> UnmarkedHawkesParams:
    try:
        return UnmarkedHawkesParams(config["mu"], config["alpha"], config["beta"])
    except ValueError as err:
        raise ConfigError(str(err)) from err


def cmd_smote(config: dict) -> int:
    schema = schema_from_config(config)
    parsed = parse_csv(config["input"], schema)
    if not parsed.records:
        raise DataError("input contains no usable rows")
    ordered = sorted(parsed.records, key=lambda r: r.time_seconds)
    matrix, stats = build_feature_matrix(ordered, schema)
    keep = [i for i, name in enumerate(stats.names) if name != "intercept"]
    features = matrix.values[:, keep]
    names = [stats.names[i] for i in keep]

    method = config["method"]
    seed = component_seed(config["seed"], f"resample-{method}")
    if method == "smote":
        result = smote(features, matrix.labels, config["k"], config["target_ratio"], seed)
    elif method == "oversample":
        result = random_oversample(features, matrix.labels, config["target_ratio"], seed)
    elif method == "undersample":
        result = random_undersample(features, matrix.labels, config["target_ratio"], seed)
    else:
        raise ConfigError(f"unknown resampling method {method!r}")

    outdir = config["outdir"]
    handle, writer = _open_csv(os.path.join(outdir, config["filename"]))
    with handle:
        writer.writerow(names + ["label", "synthetic", "base_index", "neighbor_index", "u"])
        syn_iter = iter(result.provenance)
        for i in range(len(result.labels)):
            row = [float(v) for v in result.features[i]]
            row += [int(result.labels[i]), int(result.synthetic[i])]
            if result.synthetic[i]:
                base, neighbor, u = next(syn_iter)
                row += [base, neighbor, u]
            else:
                row += ["", "", ""]
            writer.writerow(row)
    write_manifest(outdir, "smote", config)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rarevent",
        description="Rare-event transaction stream analysis: EDA, fitting, scoring, simulation, resampling.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, blurb in (
        ("eda", "write exploratory aggregations for a transaction CSV"),
        ("fit", "fit the mark model (and optionally logistic regression) on the train split"),
        ("evaluate", "score the test split with fitted models and write metrics/curves"),
        ("simulate", "generate a synthetic event stream in the ingest CSV schema"),
        ("smote", "rebalance classes and write the resampled feature matrix"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--input", help="input CSV path (overrides config)")
        p.add_argument("--outdir", help="output directory (overrides config)")
        p.add_argument(
            "--time-unit",
            dest="time_unit",
            choices=("seconds", "minutes"),
            help="unit of the input time column",
        )
    return parser


COMMANDS = {
    "eda": cmd_eda,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "smote": cmd_smote,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args.subcommand, args)
        os.makedirs(config["outdir"], exist_ok=True)
        return COMMANDS[args.subcommand](config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (DataError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
