"""Command-line entry points, one subcommand per pipeline stage plus the
end-to-end runner and the ablation runner.

Every subcommand works standalone on persisted artifacts: delimited files
(with a schema JSON) or binary ``.rlt`` table caches.  Exit code 0 on
success; stage-tagged diagnostics on stderr and a nonzero exit otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import advval, denoise as denoise_mod, encoders as enc_mod, metrics, pipeline
from .gbdt import GbdtParams, feature_importance, fit as gbdt_fit, predict as gbdt_predict, save_model
from .report import (
    write_adversarial_csv,
    write_bar_chart_svg,
    write_curve_csv,
    write_importance_csv,
    write_predictions_csv,
)
from .tabular import (
    Schema,
    SplitPlan,
    Table,
    ingest_csv,
    ingest_csv_group,
    load_binary,
    save_binary,
    split as temporal_split,
)


def _load_schema(path: str) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        return Schema.from_json(json.load(fh))


def _load_table(path: str, schema_path: str | None) -> Table:
    if path.endswith(".rlt"):
        return load_binary(path)
    if schema_path is None:
        raise SystemExit(f"error: {path} is not a .rlt cache; pass --schema")
    return ingest_csv(path, _load_schema(schema_path))


def _cmd_synth(args) -> int:
    files = pipeline.emit_synthetic(args.seed, args.out_dir, args.rows_per_day)
    for kind, path in files.items():
        print(f"{kind}: {path}")
    return 0


def _cmd_ingest(args) -> int:
    schema = _load_schema(args.schema)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = ingest_csv_group(list(args.inputs), schema)
    for src, table in zip(args.inputs, tables):
        dest = out_dir / (Path(src).stem + ".rlt")
        save_binary(table, dest)
        print(f"{src} -> {dest} ({table.n_rows} rows)")
    return 0


def _cmd_adversarial(args) -> int:
    train = _load_table(args.train, args.schema)
    test = _load_table(args.test, args.schema)
    cfg = advval.AdvConfig(
        auc_threshold=args.threshold,
        holdout_fraction=args.holdout_fraction,
        seed=args.seed,
        subsample_per_side=args.subsample_per_side,
    )
    report = advval.audit(train, test, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    advval.save_report(report, out_dir / "adversarial_report.json")
    write_adversarial_csv(report, out_dir / "adversarial_auc.csv")
    entries = [e for e in report.entries if e.auc is not None]
    write_bar_chart_svg(
        [e.name for e in entries],
        [e.auc for e in entries],
        out_dir / "adversarial_auc.svg",
        title="Adversarial validation AUC by feature",
    )
    for e in report.entries:
        score = "-" if e.auc is None else f"{e.auc:.4f}"
        print(f"{e.name}\t{score}\t{e.verdict}")
    return 0


def _cmd_denoise(args) -> int:
    table = _load_table(args.table, args.schema)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    estimates = denoise_mod.detect_all(table, tol_rel=args.tol_rel)
    groups = denoise_mod.group_deltas(estimates)
    denoise_mod.save_estimates(estimates, out_dir / "delta_estimates.json", groups)
    tables = [table] + [_load_table(p, args.schema) for p in args.apply_to]
    transformed = denoise_mod.apply_denoise_group(
        tables, estimates,
        as_categorical=not args.as_continuous,
        origin=args.origin,
    )
    save_binary(transformed[0], out_dir / "denoised.rlt")
    for src, t in zip(args.apply_to, transformed[1:]):
        dest = out_dir / f"denoised_{Path(src).stem}.rlt"
        save_binary(t, dest)
        print(f"also transformed {src} -> {dest}")
    for e in estimates:
        if e.detected:
            print(f"{e.feature}: delta={e.delta:.6g} uniques={e.n_unique}")
        else:
            print(f"{e.feature}: no lattice")
    return 0


def _cmd_correlate(args) -> int:
    table = _load_table(args.table, args.schema)
    matrix, features = denoise_mod.correlation_matrix(table)
    denoise_mod.save_correlation_csv(matrix, features, args.out)
    print(f"wrote {len(features)}x{len(features)} matrix to {args.out}")
    return 0


def _cmd_encode(args) -> int:
    table = _load_table(args.table, args.schema)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.state:
        states = enc_mod.load_states(args.state)
    else:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
        states = []
        for entry in spec:
            if entry["kind"] == "frequency":
                states.append(
                    enc_mod.fit_frequency(
                        table, entry["feature"],
                        enc_mod.FreqWindow(entry.get("window", "prev_week")),
                    )
                )
            else:
                states.append(
                    enc_mod.fit_target(
                        table, entry["feature"], entry["target"],
                        float(entry.get("smoothing", 1.0)),
                    )
                )
        enc_mod.save_states(states, out_dir / "encoders.json")
    encoded = enc_mod.apply_encoders(states, table)
    save_binary(encoded, out_dir / "encoded.rlt")
    print(f"appended {len(states)} columns -> {out_dir / 'encoded.rlt'}")
    return 0


def _cmd_train(args) -> int:
    table = _load_table(args.table, args.schema)
    params_doc = {}
    if args.params:
        with open(args.params, "r", encoding="utf-8") as fh:
            params_doc = json.load(fh)
    params = GbdtParams(**params_doc)
    if args.train_days:
        lo, hi = args.train_days.split("-")
        train_days = frozenset(range(int(lo), int(hi) + 1))
    else:
        days = np.unique(table.day_values)
        train_days = frozenset(int(d) for d in days if d < args.valid_day)
    parts = temporal_split(table, SplitPlan(train_days, args.valid_day))
    model = gbdt_fit(params, parts.train, parts.valid, n_threads=args.threads)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, out_dir / "model.json")
    importance = feature_importance(model)
    write_importance_csv(importance, out_dir / "feature_importance.csv")
    write_curve_csv(model.train_curve, model.valid_curve, out_dir / "training_curve.csv")
    valid_probs = gbdt_predict(model, parts.valid)
    ids = pipeline._row_ids(parts.valid)
    write_predictions_csv(ids, valid_probs, out_dir / "valid_predictions.csv")
    if args.predict:
        target_table = _load_table(args.predict, args.schema)
        probs = gbdt_predict(model, target_table)
        write_predictions_csv(
            pipeline._row_ids(target_table), probs, out_dir / "predictions.csv"
        )
    print(
        f"trees={model.n_trees} best_iteration={model.best_iteration} "
        f"final_valid_logloss={model.valid_curve[model.best_iteration - 1]:.6f}"
        if model.n_trees
        else "trees=0 (no splittable signal)"
    )
    return 0


def _cmd_evaluate(args) -> int:
    table = _load_table(args.table, args.schema)
    preds: dict[str, float] = {}
    with open(args.predictions, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rid, _, prob = line.partition(",")
            if not prob:
                raise SystemExit(
                    f"error: predictions line {line_no} is not 'row_id,probability'"
                )
            preds[rid] = float(prob)
    ids = pipeline._row_ids(table)
    missing = [rid for rid in ids if rid not in preds]
    if missing:
        raise SystemExit(
            f"error: predictions missing {len(missing)} row ids (first: {missing[0]})"
        )
    probs = np.asarray([preds[rid] for rid in ids])
    install = table.schema.require_install()
    section = pipeline._metrics_dict(table.col(install), probs)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(section, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(json.dumps(section, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    config = pipeline.load_config(args.config)
    if args.out_dir:
        config.output_dir = args.out_dir
    report = pipeline.run(config)
    if "metrics" in report.sections:
        m = report.sections["metrics"]["valid"]
        print(
            f"valid logloss={m['logloss']:.6f} auc={m['auc']:.6f} nce={m['nce']:.6f}"
        )
    print(f"artifacts under {config.output_dir}")
    return 0


def _cmd_ablate(args) -> int:
    config = pipeline.load_config(args.config)
    if args.out_dir:
        config.output_dir = args.out_dir
    stages = args.stages.split(",") if args.stages else None
    rows = pipeline.ablate(config, stages)
    for row in rows:
        extras = (
            f" test_logloss={row['test_logloss']:.6f}" if "test_logloss" in row else ""
        )
        print(
            f"{row['variant']}: valid_logloss={row['valid_logloss']:.6f} "
            f"valid_nce={row['valid_nce']:.6f}{extras}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resplite",
        description="Lightweight user-response-prediction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows-per-day", type=int, default=4348)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="parse delimited files into .rlt caches")
    p.add_argument("--schema", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("adversarial", help="per-feature train-vs-test audit")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--schema")
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--holdout-fraction", type=float, default=0.2)
    p.add_argument("--subsample-per-side", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_adversarial)

    p = sub.add_parser("denoise", help="detect arithmetic lattices and quantize")
    p.add_argument("--table", required=True)
    p.add_argument("--schema")
    p.add_argument("--tol-rel", type=float, default=denoise_mod.DEFAULT_TOL_REL)
    p.add_argument("--origin", choices=("zero", "vmin"), default="zero")
    p.add_argument(
        "--as-continuous",
        action="store_true",
        help="keep quantized columns continuous instead of categorical",
    )
    p.add_argument(
        "--apply-to", nargs="*", default=[],
        help="additional tables to transform with shared code dictionaries",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("correlate", help="pairwise correlation matrix CSV")
    p.add_argument("--table", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("encode", help="fit/apply frequency and target encoders")
    p.add_argument("--table", required=True)
    p.add_argument("--schema")
    p.add_argument("--spec", help="JSON list of encoder specs (fit mode)")
    p.add_argument("--state", help="existing encoders.json to re-apply")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("train", help="fit the GBDT with a temporal split")
    p.add_argument("--table", required=True)
    p.add_argument("--schema")
    p.add_argument("--valid-day", type=int, required=True)
    p.add_argument("--train-days", help="inclusive range, e.g. 45-65")
    p.add_argument("--params", help="JSON file of GBDT parameter overrides")
    p.add_argument("--predict", help="table to score after training")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a predictions CSV against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="execute the full pipeline from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate", help="cumulative stage ablation from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--stages", help="comma list, e.g. frequency,denoise,target_encoding")
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except pipeline.PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
