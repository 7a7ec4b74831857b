"""Config-driven orchestration of the full pipeline and the cumulative
ablation runner.

A run executes ingest -> split -> adversarial audit/filter -> denoise ->
encode -> train -> evaluate, honoring per-stage toggles, and writes every
artifact under the configured output directory.  Given the same config,
seed, and inputs, two runs produce byte-identical prediction files and
reports (wall-clock timings are segregated into ``timings.json``).
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import advval, denoise as denoise_mod, encoders as enc_mod, metrics
from .gbdt import GbdtParams, feature_importance, fit as gbdt_fit, predict as gbdt_predict, save_model
from .report import (
    RunReport,
    report_export,
    save_report_json,
    write_predictions_csv,
)
from .synth import default_spec, generate, split_train_test, write_csv
from .tabular import (
    ColumnRole,
    Schema,
    SplitPlan,
    Table,
    TabularError,
    ingest_csv_group,
    load_binary,
    save_binary,
    split as temporal_split,
)

ENV_PREFIX = "RLT_"
STAGE_NAMES = ("adversarial", "denoise", "frequency", "target_encoding", "train")
ALL_CATEGORICAL = "all_categorical"


class PipelineError(RuntimeError):
    """A stage failure, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")


@dataclass
class PipelineConfig:
    train_path: str
    test_path: str
    output_dir: str
    schema: Schema
    split_plan: SplitPlan
    stages: dict[str, bool]
    adversarial: advval.AdvConfig
    re_audit_encoded: bool
    denoise_tol_rel: float
    denoise_as_categorical: bool
    denoise_origin: str
    freq_features: list[str] | str
    freq_window: enc_mod.FreqWindow
    te_features: list[str] | str
    te_targets: list[str]
    te_smoothing: float
    keep_originals: bool
    gbdt: GbdtParams
    seed: int
    n_threads: int
    raw: dict = field(default_factory=dict)


def _apply_env_overrides(doc: dict, env: dict[str, str]) -> dict:
    """Apply RLT_<SECTION>_<KEY> overrides; values are parsed as JSON with a
    plain-string fallback.  Section RUN addresses top-level keys."""
    pattern = re.compile(rf"^{ENV_PREFIX}([A-Z]+)_(.+)$")
    for name, value in sorted(env.items()):
        m = pattern.match(name)
        if not m:
            continue
        section, key = m.group(1).lower(), m.group(2).lower()
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        if section == "run":
            doc[key] = parsed
        elif section in ("paths", "split", "stages", "adversarial", "denoise",
                         "encoders", "gbdt"):
            doc.setdefault(section, {})[key] = parsed
    return doc


def load_config(source: str | Path | dict, env: dict[str, str] | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a JSON file or dict plus env overrides."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        base_dir = Path(source).parent
    else:
        doc = json.loads(json.dumps(source))  # private copy
        base_dir = Path(".")
    doc = _apply_env_overrides(doc, dict(env if env is not None else os.environ))

    paths = doc.get("paths", {})
    for required in ("train", "test", "output_dir"):
        if required not in paths:
            raise PipelineError("config", f"paths.{required} is required")

    if "schema" in doc:
        schema = Schema.from_json(doc["schema"])
    elif "schema_path" in doc:
        with open(base_dir / doc["schema_path"], "r", encoding="utf-8") as fh:
            schema = Schema.from_json(json.load(fh))
    else:
        schema = None  # allowed when both inputs are binary caches

    split_doc = doc.get("split", {})
    if "valid_day" not in split_doc:
        raise PipelineError("config", "split.valid_day is required")
    plan = SplitPlan(
        train_days=frozenset(int(d) for d in split_doc.get("train_days", [])),
        valid_day=int(split_doc["valid_day"]),
        test_day=None,
    )

    stages = {name: True for name in STAGE_NAMES}
    stages.update({k: bool(v) for k, v in doc.get("stages", {}).items()})

    seed = int(doc.get("seed", 0))
    adv_doc = doc.get("adversarial", {})
    adv_cfg = advval.AdvConfig(
        auc_threshold=float(adv_doc.get("auc_threshold", 0.75)),
        holdout_fraction=float(adv_doc.get("holdout_fraction", 0.2)),
        seed=int(adv_doc.get("seed", seed)),
        subsample_per_side=adv_doc.get("subsample_per_side", 200_000),
    )
    den_doc = doc.get("denoise", {})
    enc_doc = doc.get("encoders", {})
    freq_doc = enc_doc.get("frequency", {})
    te_doc = enc_doc.get("target", {})
    gbdt_doc = dict(doc.get("gbdt", {}))
    gbdt_doc.setdefault("seed", seed)
    try:
        params = GbdtParams(**gbdt_doc)
    except (TypeError, ValueError) as exc:
        raise PipelineError("config", f"bad gbdt params: {exc}") from exc

    return PipelineConfig(
        train_path=str(paths["train"]),
        test_path=str(paths["test"]),
        output_dir=str(paths["output_dir"]),
        schema=schema,
        split_plan=plan,
        stages=stages,
        adversarial=adv_cfg,
        re_audit_encoded=bool(adv_doc.get("re_audit_encoded", False)),
        denoise_tol_rel=float(den_doc.get("tol_rel", denoise_mod.DEFAULT_TOL_REL)),
        denoise_as_categorical=bool(den_doc.get("as_categorical", True)),
        denoise_origin=str(den_doc.get("origin", "zero")),
        freq_features=freq_doc.get("features", ALL_CATEGORICAL),
        freq_window=enc_mod.FreqWindow(freq_doc.get("window", "prev_week")),
        te_features=te_doc.get("features", ALL_CATEGORICAL),
        te_targets=list(te_doc.get("targets", ["click", "install"])),
        te_smoothing=float(te_doc.get("smoothing", 1.0)),
        keep_originals=bool(enc_doc.get("keep_originals", True)),
        gbdt=params,
        seed=seed,
        n_threads=int(doc.get("n_threads", 1)),
        raw=doc,
    )


def _load_table_pair(config: PipelineConfig) -> tuple[Table, Table]:
    train_p, test_p = config.train_path, config.test_path
    if train_p.endswith(".rlt") and test_p.endswith(".rlt"):
        return load_binary(train_p), load_binary(test_p)
    if config.schema is None:
        raise TabularError("a schema is required to ingest delimited files")
    train, test = ingest_csv_group([train_p, test_p], config.schema)
    return train, test


def _resolve_cat_features(spec: list[str] | str, table: Table) -> list[str]:
    cats = [
        name for name, role in table.schema.columns
        if role is ColumnRole.CATEGORICAL
    ]
    if spec == ALL_CATEGORICAL:
        return cats
    present = set(cats)
    return [name for name in spec if name in present]


@dataclass
class _Prepared:
    """Ingested input pair, reusable across ablation variants."""

    train_file: Table
    test_file: Table


def _timed(report: RunReport, stage: str, fn):
    t0 = time.perf_counter()
    try:
        result = fn()
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    report.timings[stage] = time.perf_counter() - t0
    return result


def _metrics_dict(labels: np.ndarray, probs: np.ndarray) -> dict:
    batch = metrics.EvalBatch(labels, probs)
    r = metrics.nce(batch)
    return {
        "logloss": r.mean_logloss,
        "auc": metrics.auc(batch),
        "nce": r.nce,
        "background_rate": r.background_rate,
    }


def _row_ids(table: Table) -> list[str]:
    name = table.schema.row_id_column
    if name is not None:
        return [str(v) for v in table.col(name)]
    return [str(i) for i in range(table.n_rows)]


def run(config: PipelineConfig, prepared: _Prepared | None = None) -> RunReport:
    """Execute the pipeline per the config and return the run report.

    Artifacts from completed stages are kept even when a later stage fails;
    the raised PipelineError carries the failing stage's name.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = RunReport(config_echo=config.raw, stages=dict(config.stages))

    # ingest
    if prepared is None:
        train_file, test_file = _timed(report, "ingest", lambda: _load_table_pair(config))
        cache_dir = out_dir / "cache"
        cache_dir.mkdir(exist_ok=True)
        save_binary(train_file, cache_dir / "train.rlt")
        save_binary(test_file, cache_dir / "test.rlt")
    else:
        train_file, test_file = prepared.train_file, prepared.test_file
        report.timings["ingest"] = 0.0
    report.sections["ingest"] = {
        "train_rows": train_file.n_rows,
        "test_rows": test_file.n_rows,
        "n_columns": len(train_file.schema.names),
    }

    # split: validate the plan up front; the row partition happens after the
    # column transforms (which are all order-preserving)
    def check_plan():
        days = set(int(d) for d in np.unique(train_file.day_values))
        if config.split_plan.valid_day not in days:
            raise TabularError(
                f"valid_day {config.split_plan.valid_day} selects zero rows"
            )
        return days

    present_days = _timed(report, "split", check_plan)
    plan = config.split_plan
    if not plan.train_days:
        plan = SplitPlan(
            frozenset(d for d in present_days if d < plan.valid_day),
            plan.valid_day,
        )
    report.sections["split"] = {
        "train_days": sorted(plan.train_days),
        "valid_day": plan.valid_day,
    }

    # adversarial audit + filter
    if config.stages.get("adversarial", True):
        def do_audit():
            rep = advval.audit(train_file, test_file, config.adversarial)
            advval.save_report(rep, out_dir / "adversarial_report.json")
            return rep

        adv_report = _timed(report, "adversarial", do_audit)
        report.adversarial = adv_report
        train_file = advval.filter_features(adv_report, train_file)
        test_file = advval.filter_features(adv_report, test_file)
        report.sections["adversarial"] = {
            "dropped": adv_report.dropped(),
            "features": adv_report.to_json_dict()["features"],
        }

    # denoise + correlation analysis
    if config.stages.get("denoise", True):
        def do_denoise():
            estimates = denoise_mod.detect_all(
                train_file, tol_rel=config.denoise_tol_rel
            )
            groups = denoise_mod.group_deltas(estimates)
            denoise_mod.save_estimates(
                estimates, out_dir / "delta_estimates.json", groups
            )
            cont = [
                name for name, role in train_file.schema.columns
                if role is ColumnRole.CONTINUOUS
            ]
            correlation = None
            if len(cont) >= 2:
                correlation = denoise_mod.correlation_matrix(train_file, cont)
            return estimates, groups, correlation

        estimates, groups, correlation = _timed(report, "denoise", do_denoise)
        report.correlation = correlation
        # quantized trains and tests must share one code dictionary
        train_file, test_file = denoise_mod.apply_denoise_group(
            [train_file, test_file], estimates,
            as_categorical=config.denoise_as_categorical,
            origin=config.denoise_origin,
        )
        report.sections["denoise"] = {
            "estimates": [e.to_json_dict() for e in estimates],
            "groups": groups,
            "detected": [e.feature for e in estimates if e.detected],
        }

    # encoders
    do_freq = config.stages.get("frequency", True)
    do_te = config.stages.get("target_encoding", True)
    if do_freq or do_te:
        def do_encode():
            states: list[enc_mod.EncoderState] = []
            if do_freq:
                for name in _resolve_cat_features(config.freq_features, train_file):
                    states.append(
                        enc_mod.fit_frequency(train_file, name, config.freq_window)
                    )
            if do_te:
                for name in _resolve_cat_features(config.te_features, train_file):
                    for target in config.te_targets:
                        if target == "click" and train_file.schema.click_column is None:
                            continue
                        states.append(
                            enc_mod.fit_target(
                                train_file, name, target, config.te_smoothing
                            )
                        )
            enc_mod.save_states(states, out_dir / "encoders.json")
            return states

        states = _timed(report, "encode", do_encode)
        train_file = enc_mod.apply_encoders(states, train_file)
        test_file = enc_mod.apply_encoders(states, test_file)
        if not config.keep_originals:
            encoded = {s.feature for s in states}
            train_file = train_file.drop_columns(encoded)
            test_file = test_file.drop_columns(encoded)
        report.sections["encoding"] = {
            "columns": [s.column_name for s in states],
            "keep_originals": config.keep_originals,
        }
        if config.re_audit_encoded and config.stages.get("adversarial", True):
            def do_re_audit():
                sub_train = train_file.drop_columns(
                    set(train_file.schema.feature_columns())
                    - {s.column_name for s in states}
                )
                sub_test = test_file.drop_columns(
                    set(test_file.schema.feature_columns())
                    - {s.column_name for s in states}
                )
                rep = advval.audit(sub_train, sub_test, config.adversarial)
                advval.save_report(rep, out_dir / "adversarial_encoded.json")
                return rep

            re_report = _timed(report, "re_audit", do_re_audit)
            train_file = advval.filter_features(re_report, train_file)
            test_file = advval.filter_features(re_report, test_file)
            report.sections["encoding"]["re_audit_dropped"] = re_report.dropped()

    # train + evaluate
    if config.stages.get("train", True):
        def do_train():
            parts = temporal_split(train_file, plan)
            features = list(train_file.schema.feature_columns())
            model = gbdt_fit(
                config.gbdt,
                parts.train,
                parts.valid,
                features,
                n_threads=config.n_threads,
            )
            save_model(model, out_dir / "model.json")
            return parts, model

        parts, model = _timed(report, "train", do_train)
        importance = feature_importance(model)
        report.importance = importance
        report.train_curve = model.train_curve
        report.valid_curve = model.valid_curve
        report.sections["training"] = {
            "features": list(model.feature_names),
            "best_iteration": model.best_iteration,
            "trees": model.n_trees,
            "train_rows": parts.train.n_rows,
            "valid_rows": parts.valid.n_rows,
            "importance": [[name, count] for name, count in importance],
        }

        def do_evaluate():
            valid_probs = gbdt_predict(model, parts.valid)
            write_predictions_csv(
                _row_ids(parts.valid), valid_probs, out_dir / "valid_predictions.csv"
            )
            install = parts.valid.schema.require_install()
            section = {"valid": _metrics_dict(parts.valid.col(install), valid_probs)}
            if test_file.n_rows:
                test_probs = gbdt_predict(model, test_file)
                write_predictions_csv(
                    _row_ids(test_file), test_probs, out_dir / "test_predictions.csv"
                )
                if test_file.schema.install_column is not None:
                    section["test_proxy"] = _metrics_dict(
                        test_file.col(install), test_probs
                    )
            with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
                json.dump(section, fh, sort_keys=True, indent=2)
                fh.write("\n")
            return section

        report.sections["metrics"] = _timed(report, "evaluate", do_evaluate)

    _timed(report, "export", lambda: report_export(report, out_dir, "all"))
    save_report_json(report, out_dir)
    return report


# ---------------------------------------------------------------------------
# Cumulative ablation


def _variant_config(config: PipelineConfig, enabled: list[str], out_dir: Path) -> PipelineConfig:
    stages = dict(config.stages)
    for stage in ("adversarial", "denoise", "frequency", "target_encoding"):
        stages[stage] = stage in enabled
    return replace(config, stages=stages, output_dir=str(out_dir))


def ablate(config: PipelineConfig, stages: list[str] | None = None) -> list[dict]:
    """Run the pipeline with the listed stages enabled cumulatively, starting
    from none of them, and emit a summary table.

    Ingest is shared across variants.  Returns one row per variant with the
    validation (and, when test labels exist, pseudo-test) metrics.
    """
    if stages is None:
        stages = ["frequency", "denoise", "target_encoding"]
    for stage in stages:
        if stage not in ("adversarial", "denoise", "frequency", "target_encoding"):
            raise PipelineError("ablate", f"unknown ablation stage {stage!r}")
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prep_report = RunReport(config_echo=config.raw, stages={})
    train_file, test_file = _timed(prep_report, "ingest", lambda: _load_table_pair(config))
    prepared = _Prepared(train_file, test_file)

    rows: list[dict] = []
    enabled: list[str] = []
    variants = [("vanilla", [])] + [
        ("+" + stage, stages[: i + 1]) for i, stage in enumerate(stages)
    ]
    for name, enabled in variants:
        vdir = out_dir / "ablation" / name.lstrip("+")
        vcfg = _variant_config(config, enabled, vdir)
        vcfg.stages["train"] = True
        rep = run(vcfg, prepared=prepared)
        m = rep.sections["metrics"]
        row = {
            "variant": name,
            "valid_logloss": m["valid"]["logloss"],
            "valid_nce": m["valid"]["nce"],
        }
        if "test_proxy" in m:
            row["test_logloss"] = m["test_proxy"]["logloss"]
            row["test_nce"] = m["test_proxy"]["nce"]
        rows.append(row)

    with open(out_dir / "ablation.csv", "w", encoding="utf-8", newline="\n") as fh:
        cols = list(rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c])
                    for c in cols
                )
                + "\n"
            )
    return rows


# ---------------------------------------------------------------------------
# Synthetic data emission (CLI `synth` backend)


def emit_synthetic(seed: int, out_dir: str | Path, n_rows_per_day: int = 4348) -> dict:
    """Generate the benchmark dataset: train.csv, test.csv, truth.json, and
    schema.json under ``out_dir``; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = default_spec(seed=seed, n_rows_per_day=n_rows_per_day)
    table, truth = generate(spec)
    train_file, test_file = split_train_test(table)
    write_csv(train_file, out / "train.csv")
    write_csv(test_file, out / "test.csv")
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth.to_json_dict(), fh, sort_keys=True)
        fh.write("\n")
    with open(out / "schema.json", "w", encoding="utf-8") as fh:
        # no sort_keys: the column mapping order is the on-disk column order
        json.dump(table.schema.to_json(), fh, indent=2)
        fh.write("\n")
    return {
        "train": str(out / "train.csv"),
        "test": str(out / "test.csv"),
        "truth": str(out / "truth.json"),
        "schema": str(out / "schema.json"),
    }
