"""Pipeline orchestration: ingest, evaluate members, run ensembles, report.

All commands are deterministic given (corpus, seed, member files,
config): sub-seeds derive from the root seed by CRC-32 hashing of the
stage name, files are written with fixed 4-decimal formatting, and
rows are sorted by QWK descending with ties broken by label.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from .ensemble import (
    SOURCE_TAGS,
    EnsembleError,
    EnsembleOutput,
    EnsembleSpec,
    PredictionSet,
    StackingEnsemble,
    STRATEGIES,
    STRATEGY_LABELS,
    finalize,
)
from .metrics import EVAL_REPORT_HEADER, EvalReport, UndefinedMetricError

__all__ = [
    "DataError",
    "RunConfig",
    "derive_seed",
    "cmd_ingest",
    "cmd_evaluate",
    "cmd_ensemble",
    "cmd_report",
    "read_member_manifest",
    "read_predictions",
    "write_member_predictions",
    "MEMBER_TABLE_TAGS",
    "ENSEMBLE_FILTERS",
]

MEMBER_TABLE_TAGS = ("essay", "rationale-A", "rationale-B")

# Caption tag -> member source_tag filter for the four ensemble tables.
ENSEMBLE_FILTERS = {
    "ens-essay": ("essay",),
    "ens-essay+A": ("essay", "rationale-A"),
    "ens-essay+B": ("essay", "rationale-B"),
    "ens-all": SOURCE_TAGS,
}

TABLE_CAPTIONS = {
    "essay": "Essay-Based Models",
    "rationale-A": "Rationale-Based Models (generator A)",
    "rationale-B": "Rationale-Based Models (generator B)",
    "ens-essay": "Ensemble Models with Essays only",
    "ens-essay+A": "Ensemble Models with Essays and Rationales A",
    "ens-essay+B": "Ensemble Models with Essays and Rationales B",
    "ens-all": "Ensemble Models with Essays and both Rationales",
}


class DataError(ValueError):
    """Input data is missing, inconsistent, or incomplete."""


@dataclass(frozen=True)
class RunConfig:
    """Paths, seed, and ensemble parameter overrides for one run."""

    corpus_path: Path
    out_dir: Path
    prompt_id: int = 6
    seed: int = 42
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20)
    manifest_path: Path | None = None
    members_path: Path | None = None
    ensemble_overrides: Mapping[str, object] | None = None
    correlation_stat: str = "spearman"

    def manifest(self) -> Path:
        return self.manifest_path or self.out_dir / "split_manifest.csv"


def derive_seed(root_seed: int, stage: str) -> int:
    """Stage sub-seed: CRC-32 of 'stage:root', stable across platforms."""
    return zlib.crc32(f"{stage}:{root_seed}".encode())


def _fmt(value: float | None) -> str:
    return "NA" if value is None else f"{value:.4f}"


def _sort_rows(rows: list[EvalReport]) -> list[EvalReport]:
    return sorted(
        rows,
        key=lambda r: (r.qwk is None, -(r.qwk if r.qwk is not None else 0.0), r.model_id),
    )


def _write_table(rows: list[EvalReport], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(EVAL_REPORT_HEADER + "\n")
        for row in _sort_rows(rows):
            fh.write(row.csv_row() + "\n")


def _score_predictions(
    truth: Sequence[int], continuous: Sequence[float]
) -> tuple[float | None, float | None, tuple[float, ...]]:
    """(qwk, spearman, per-class f1) of rounded predictions vs truth.

    QWK uses finalized integer scores; Spearman uses the continuous
    values. Undefined metrics surface as None (flagged, never silent 0).
    """
    final = [finalize(p) for p in continuous]
    cm = metrics_mod.confusion(truth, final, corpus_mod.SCORE_RANGE)
    f1s = tuple(f1 for _, _, f1 in metrics_mod.per_class_prf(cm))
    try:
        if len(set(final)) < 2:
            # Constant predictions mean degenerate agreement; flag the
            # row instead of reporting the vacuous kappa.
            raise UndefinedMetricError("constant predictions")
        kappa = metrics_mod.qwk(truth, final, corpus_mod.SCORE_RANGE)
    except UndefinedMetricError:
        kappa = None
    try:
        rho = metrics_mod.spearman(continuous, truth)
    except UndefinedMetricError:
        rho = None
    return kappa, rho, f1s


# ---------------------------------------------------------------------------
# member prediction files


def read_member_manifest(path: str | Path) -> list[tuple[str, str, Path]]:
    """Read `model_id,source_tag,path` rows; paths resolve relative to
    the manifest's own directory."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"member manifest not found: {path}")
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["model_id", "source_tag", "path"]:
            raise DataError(f"{path}: expected header model_id,source_tag,path")
        for row in reader:
            if row["source_tag"] not in SOURCE_TAGS:
                raise DataError(f"{path}: unknown source_tag {row['source_tag']!r}")
            member_path = Path(row["path"])
            if not member_path.is_absolute():
                member_path = path.parent / member_path
            out.append((row["model_id"], row["source_tag"], member_path))
    if not out:
        raise DataError(f"{path}: no members listed")
    return out


def read_predictions(path: str | Path) -> dict[int, float]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"prediction file not found: {path}")
    out: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["essay_id", "prediction"]:
            raise DataError(f"{path}: expected header essay_id,prediction")
        for row in reader:
            out[int(row["essay_id"])] = float(row["prediction"])
    if not out:
        raise DataError(f"{path}: no predictions")
    return out


def write_member_predictions(predictions: Mapping[int, float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("essay_id,prediction\n")
        for essay_id in sorted(predictions):
            fh.write(f"{essay_id},{predictions[essay_id]:.4f}\n")


def _load_members(
    config: RunConfig,
    truth: Mapping[int, int],
    val_ids: Sequence[int],
    with_val_stats: bool,
) -> list[PredictionSet]:
    if config.members_path is None:
        raise DataError("no member manifest configured (--members)")
    members = []
    for model_id, source_tag, path in read_member_manifest(config.members_path):
        preds = read_predictions(path)
        member = PredictionSet(model_id=model_id, source_tag=source_tag,
                               predictions=preds)
        if with_val_stats:
            missing = [e for e in val_ids if e not in preds]
            if missing:
                raise DataError(
                    f"member {model_id} ({source_tag}) missing validation "
                    f"predictions for essays {missing[:10]}"
                )
            y_val = [truth[e] for e in val_ids]
            continuous = member.vector(val_ids)
            try:
                val_qwk = metrics_mod.qwk(
                    y_val, [finalize(p) for p in continuous], corpus_mod.SCORE_RANGE
                )
                if config.correlation_stat == "pearson":
                    val_corr = float(np.corrcoef(continuous, y_val)[0, 1])
                else:
                    val_corr = metrics_mod.spearman(continuous, y_val)
            except UndefinedMetricError as exc:
                raise DataError(
                    f"member {model_id} ({source_tag}) has degenerate "
                    f"validation predictions: {exc}"
                ) from exc
            member = replace(member, val_qwk=val_qwk, val_spearman=val_corr)
        members.append(member)
    return members


def _load_truth_and_split(config: RunConfig) -> tuple[dict[int, int], dict[str, list[int]]]:
    records = corpus_mod.load_corpus(config.corpus_path, config.prompt_id)
    truth = {r.essay_id: r.resolution_score for r in records}
    assignment = corpus_mod.read_split_manifest(config.manifest())
    unknown = sorted(set(assignment) - set(truth))
    if unknown:
        raise DataError(f"manifest names unknown essay ids: {unknown[:10]}")
    by_split = {name: sorted(e for e, s in assignment.items() if s == name)
                for name in corpus_mod.SPLIT_NAMES}
    return truth, by_split


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(config: RunConfig) -> dict:
    """Load the corpus, write the split manifest, and summarize it."""
    records = corpus_mod.load_corpus(config.corpus_path, config.prompt_id)
    assignment = corpus_mod.split(
        records, seed=derive_seed(config.seed, "split"), ratios=config.ratios
    )
    config.out_dir.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_split_manifest(assignment, config.manifest())

    histogram = corpus_mod.score_distribution(records)
    lo, hi, mean = corpus_mod.length_stats(records)
    summary = {
        "n_essays": len(records),
        "prompt_id": config.prompt_id,
        "score_counts": list(histogram.counts),
        "score_percents": [round(p, 1) for p in histogram.percents],
        "length_min": lo,
        "length_max": hi,
        "length_mean": round(mean, 1),
        "split_sizes": dict(zip(corpus_mod.SPLIT_NAMES, assignment.sizes())),
        "seed": config.seed,
    }
    with open(config.out_dir / "corpus_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def cmd_evaluate(config: RunConfig) -> dict[str, list[EvalReport]]:
    """Score every member on the test split; one table per source tag."""
    truth, by_split = _load_truth_and_split(config)
    test_ids = by_split["test"]
    if not test_ids:
        raise DataError("manifest has no test essays")
    members = _load_members(config, truth, by_split["val"], with_val_stats=False)

    tables: dict[str, list[EvalReport]] = {tag: [] for tag in MEMBER_TABLE_TAGS}
    y_test = [truth[e] for e in test_ids]
    for member in members:
        missing = [e for e in test_ids if e not in member.predictions]
        if missing:
            raise DataError(
                f"member {member.model_id} ({member.source_tag}) missing test "
                f"predictions for essays {missing[:10]}"
            )
        kappa, rho, f1s = _score_predictions(y_test, member.vector(test_ids))
        tables[member.source_tag].append(
            EvalReport(member.model_id, member.source_tag, kappa, rho, f1s)
        )

    config.out_dir.mkdir(parents=True, exist_ok=True)
    for tag, rows in tables.items():
        if rows:
            _write_table(rows, config.out_dir / f"table_{tag}.csv")
    return tables


def _fit_strategy(name: str, spec: EnsembleSpec, members, y_val, val_ids):
    strategy = spec.build()
    if isinstance(strategy, StackingEnsemble):
        return strategy.fit(members, y_val, val_ids)
    return strategy.fit(members)


def cmd_ensemble(config: RunConfig) -> dict[str, list[EvalReport]]:
    """Fit all 7 strategies on validation, evaluate on test, per filter."""
    truth, by_split = _load_truth_and_split(config)
    val_ids, test_ids = by_split["val"], by_split["test"]
    if not val_ids or not test_ids:
        raise DataError("manifest needs non-empty val and test splits")
    members = _load_members(config, truth, val_ids, with_val_stats=True)
    y_val = [truth[e] for e in val_ids]
    y_test = [truth[e] for e in test_ids]

    overrides = dict(config.ensemble_overrides or {})
    allowed_keys = {
        "elite_threshold", "confidence_threshold", "tier_low", "tier_high",
        "tier_delta", "alpha_grid", "k_folds", "seed",
    }
    unknown = sorted(set(overrides) - allowed_keys)
    if unknown:
        raise DataError(f"unknown ensemble override keys: {unknown}")
    if "alpha_grid" in overrides:
        overrides["alpha_grid"] = tuple(overrides["alpha_grid"])
    overrides.setdefault("seed", derive_seed(config.seed, "stacking-cv"))
    config.out_dir.mkdir(parents=True, exist_ok=True)

    tables: dict[str, list[EvalReport]] = {}
    for tag, allowed in ENSEMBLE_FILTERS.items():
        subset = [m for m in members if m.source_tag in allowed]
        if not subset:
            raise DataError(f"no members left for filter {tag!r}")
        rows = []
        for name in STRATEGIES:
            spec = EnsembleSpec(strategy=name, source_tags=allowed, **overrides)
            label = STRATEGY_LABELS[name]
            try:
                fitted = _fit_strategy(name, spec, subset, y_val, val_ids)
                output: EnsembleOutput = fitted.predict(test_ids)
            except EnsembleError as exc:
                rows.append(EvalReport(label, tag, None, None, (0.0,) * 5))
                _write_audit(config.out_dir, tag, name, {"error": str(exc)})
                continue
            blend = [output.blend[e] for e in test_ids]
            kappa, rho, f1s = _score_predictions(y_test, blend)
            rows.append(EvalReport(label, tag, kappa, rho, f1s))
            _write_ensemble_output(config.out_dir, tag, name, test_ids, output)
            _write_audit(config.out_dir, tag, name, output.audit)
        tables[tag] = rows
        _write_table(rows, config.out_dir / f"table_{tag}.csv")
    return tables


def _ensemble_stem(tag: str, name: str) -> str:
    return f"ensemble_{tag}_{name}"


def _write_ensemble_output(out_dir: Path, tag: str, name: str,
                           test_ids: Sequence[int], output: EnsembleOutput) -> None:
    with open(out_dir / f"{_ensemble_stem(tag, name)}.csv", "w", newline="") as fh:
        fh.write("essay_id,blend,final\n")
        for essay_id in test_ids:
            fh.write(f"{essay_id},{output.blend[essay_id]:.6f},"
                     f"{output.final[essay_id]}\n")


def _write_audit(out_dir: Path, tag: str, name: str, audit: dict) -> None:
    with open(out_dir / f"{_ensemble_stem(tag, name)}.audit.json", "w") as fh:
        json.dump(audit, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _markdown_table(path: Path) -> list[str]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    lines = ["| # | " + " | ".join(rows[0]) + " |",
             "|---|" + "---|" * len(rows[0])]
    for i, row in enumerate(rows[1:], start=1):
        lines.append(f"| {i} | " + " | ".join(row) + " |")
    return lines


def cmd_report(config: RunConfig) -> Path:
    """Assemble one markdown report from the emitted table files."""
    out = config.out_dir
    lines = ["# Scoring Report", ""]

    summary_path = out / "corpus_summary.json"
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)
        lines += ["## Corpus", "",
                  f"- essays: {summary['n_essays']} (prompt {summary['prompt_id']})",
                  f"- score counts: {summary['score_counts']}",
                  f"- score percents: {summary['score_percents']}",
                  f"- essay length (words): min {summary['length_min']}, "
                  f"max {summary['length_max']}, mean {summary['length_mean']}",
                  f"- split sizes: {summary['split_sizes']}",
                  ""]

    lines += ["Note: QWK and F1 use rounded integer scores; Spearman uses "
              "continuous predictions where available.", ""]
    for tag in (*MEMBER_TABLE_TAGS, *ENSEMBLE_FILTERS):
        lines.append(f"## {TABLE_CAPTIONS[tag]}")
        lines.append("")
        table_path = out / f"table_{tag}.csv"
        if table_path.exists():
            lines += _markdown_table(table_path)
        else:
            lines.append("*not run*")
        lines.append("")

    report_path = out / "report.md"
    with open(report_path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
    return report_path
