from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from rationale_aes.cli import main
from rationale_aes.harness import (
    ENSEMBLE_FILTERS,
    RunConfig,
    cmd_ensemble,
    cmd_evaluate,
    cmd_ingest,
    cmd_report,
    derive_seed,
    read_predictions,
    write_member_predictions,
)
from rationale_aes.corpus import load_corpus, read_split_manifest

from conftest import noisy_predictions, write_corpus_file


def build_members(tmp_path: Path, corpus_path: Path, seed: int = 0,
                  per_tag: int = 3) -> Path:
    """Write noisy member files for each source tag plus a manifest."""
    records = load_corpus(corpus_path)
    truth = {r.essay_id: r.resolution_score for r in records}
    rng = np.random.default_rng(seed)
    members_dir = tmp_path / "members"
    members_dir.mkdir(exist_ok=True)
    rows = ["model_id,source_tag,path"]
    names = ["electra-large", "deberta-v3-large", "bert-base", "roberta-base",
             "deberta-base", "distilbert-base", "roberta-large"]
    for tag in ("essay", "rationale-A", "rationale-B"):
        for i in range(per_tag):
            model_id = names[i % len(names)]
            sigma = 0.3 + 0.15 * i
            path = members_dir / f"{tag}_{model_id}.csv"
            write_member_predictions(noisy_predictions(truth, sigma, rng), path)
            rows.append(f"{model_id},{tag},{path.name}")
    manifest = members_dir / "members.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


@pytest.fixture
def pipeline(tmp_path):
    corpus_path = write_corpus_file(tmp_path / "corpus.tsv", 300, seed=11)
    members = build_members(tmp_path, corpus_path, seed=1)
    out = tmp_path / "out"
    config = RunConfig(corpus_path=corpus_path, out_dir=out, seed=42,
                       members_path=members)
    return config


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(42, "split") == derive_seed(42, "split")

    def test_stage_separation(self):
        assert derive_seed(42, "split") != derive_seed(42, "stacking-cv")


class TestIngest:
    def test_summary_and_manifest(self, pipeline):
        summary = cmd_ingest(pipeline)
        assert summary["n_essays"] == 300
        assert sum(summary["score_counts"]) == 300
        assert summary["split_sizes"] == {"train": 210, "val": 30, "test": 60}
        manifest = read_split_manifest(pipeline.manifest())
        assert len(manifest) == 300

    def test_rerun_identical_bytes(self, pipeline):
        cmd_ingest(pipeline)
        first = pipeline.manifest().read_bytes()
        cmd_ingest(pipeline)
        assert pipeline.manifest().read_bytes() == first


class TestEvaluate:
    def test_tables_per_source(self, pipeline):
        cmd_ingest(pipeline)
        tables = cmd_evaluate(pipeline)
        assert set(tables) == {"essay", "rationale-A", "rationale-B"}
        for rows in tables.values():
            assert len(rows) == 3
        assert (pipeline.out_dir / "table_essay.csv").exists()

    def test_rows_sorted_by_qwk(self, pipeline):
        cmd_ingest(pipeline)
        cmd_evaluate(pipeline)
        with open(pipeline.out_dir / "table_essay.csv") as fh:
            rows = list(csv.DictReader(fh))
        qwks = [float(r["qwk"]) for r in rows]
        assert qwks == sorted(qwks, reverse=True)

    def test_truth_member_scores_one(self, pipeline, tmp_path):
        cmd_ingest(pipeline)
        records = load_corpus(pipeline.corpus_path)
        truth = {r.essay_id: float(r.resolution_score) for r in records}
        path = tmp_path / "members" / "oracle.csv"
        write_member_predictions(truth, path)
        manifest = tmp_path / "members" / "members.csv"
        manifest.write_text("model_id,source_tag,path\noracle,essay,oracle.csv\n")
        from dataclasses import replace
        tables = cmd_evaluate(replace(pipeline, members_path=manifest))
        assert tables["essay"][0].qwk == pytest.approx(1.0)

    def test_constant_member_flagged_not_zero(self, pipeline, tmp_path):
        cmd_ingest(pipeline)
        records = load_corpus(pipeline.corpus_path)
        path = tmp_path / "members" / "const.csv"
        write_member_predictions({r.essay_id: 3.0 for r in records}, path)
        manifest = tmp_path / "members" / "members.csv"
        manifest.write_text("model_id,source_tag,path\nconst,essay,const.csv\n")
        from dataclasses import replace
        tables = cmd_evaluate(replace(pipeline, members_path=manifest))
        row = tables["essay"][0]
        assert row.qwk is None
        assert "NA" in row.csv_row()

    def test_missing_test_predictions_listed(self, pipeline, tmp_path):
        cmd_ingest(pipeline)
        preds = read_predictions(tmp_path / "members" / "essay_electra-large.csv")
        manifest = read_split_manifest(pipeline.manifest())
        essay_id = max(e for e, s in manifest.items() if s == "test")
        del preds[essay_id]
        write_member_predictions(preds, tmp_path / "members" / "essay_electra-large.csv")
        from rationale_aes.harness import DataError
        with pytest.raises(DataError, match="missing"):
            cmd_evaluate(pipeline)


class TestEnsembleCommand:
    def test_all_filters_and_strategies(self, pipeline):
        cmd_ingest(pipeline)
        tables = cmd_ensemble(pipeline)
        assert set(tables) == set(ENSEMBLE_FILTERS)
        for tag, rows in tables.items():
            assert len(rows) == 7
            assert (pipeline.out_dir / f"table_{tag}.csv").exists()

    def test_audit_sidecars_written(self, pipeline):
        cmd_ingest(pipeline)
        cmd_ensemble(pipeline)
        audit_path = pipeline.out_dir / "ensemble_ens-all_stacking.audit.json"
        audit = json.loads(audit_path.read_text())
        assert audit["alpha"] in (0.01, 0.1, 1.0, 10.0, 100.0)
        assert len(audit["weights"]) == 9
        assert audit["member_order"] == sorted(audit["member_order"])

    def test_per_essay_outputs_cover_test_split(self, pipeline):
        cmd_ingest(pipeline)
        cmd_ensemble(pipeline)
        manifest = read_split_manifest(pipeline.manifest())
        test_ids = sorted(e for e, s in manifest.items() if s == "test")
        with open(pipeline.out_dir / "ensemble_ens-essay_elite.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["essay_id"]) for r in rows] == test_ids
        for r in rows:
            assert r["final"] == str(int(np.floor(min(max(float(r["blend"]), 0), 4) + 0.5)))

    def test_deterministic_outputs(self, tmp_path):
        corpus_path = write_corpus_file(tmp_path / "corpus.tsv", 250, seed=3)
        members = build_members(tmp_path, corpus_path, seed=5)
        outputs = []
        for name in ("run1", "run2"):
            out = tmp_path / name
            config = RunConfig(corpus_path=corpus_path, out_dir=out, seed=7,
                               members_path=members)
            cmd_ingest(config)
            cmd_ensemble(config)
            cmd_report(config)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1]

    def test_overrides_applied(self, pipeline):
        from dataclasses import replace
        cmd_ingest(pipeline)
        config = replace(pipeline, ensemble_overrides={"tier_delta": 0.0})
        tables = cmd_ensemble(config)
        by_label = {r.model_id: r for r in tables["ens-essay"]}
        assert by_label["Tiered Ensemble"].qwk == by_label["Elite Ensemble"].qwk

    def test_unknown_override_rejected(self, pipeline):
        from dataclasses import replace
        from rationale_aes.harness import DataError
        cmd_ingest(pipeline)
        with pytest.raises(DataError, match="override"):
            cmd_ensemble(replace(pipeline, ensemble_overrides={"bogus": 1}))


class TestReport:
    def test_full_report(self, pipeline):
        cmd_ingest(pipeline)
        cmd_evaluate(pipeline)
        cmd_ensemble(pipeline)
        report = cmd_report(pipeline).read_text()
        assert report.count("## ") == 8  # corpus section + 7 tables
        assert "*not run*" not in report

    def test_placeholders_when_missing(self, pipeline):
        cmd_ingest(pipeline)
        report = cmd_report(pipeline).read_text()
        assert report.count("*not run*") == 7

    def test_rerun_byte_identical(self, pipeline):
        cmd_ingest(pipeline)
        cmd_evaluate(pipeline)
        cmd_ensemble(pipeline)
        first = cmd_report(pipeline).read_bytes()
        assert cmd_report(pipeline).read_bytes() == first


class TestCli:
    def test_ingest_verb(self, tmp_path, capsys):
        corpus_path = write_corpus_file(tmp_path / "corpus.tsv", 100, seed=2)
        code = main(["ingest", "--corpus", str(corpus_path),
                     "--out", str(tmp_path / "out"), "--seed", "1"])
        assert code == 0
        assert "score counts" in capsys.readouterr().out

    def test_missing_corpus_is_data_error(self, tmp_path, capsys):
        code = main(["ingest", "--corpus", str(tmp_path / "nope.tsv"),
                     "--out", str(tmp_path / "out")])
        assert code == 2
        assert "nope.tsv" in capsys.readouterr().err

    def test_usage_error_exit_code(self, tmp_path):
        assert main(["ingest"]) == 1
        assert main(["frobnicate"]) == 1

    def test_full_cli_pipeline(self, tmp_path, capsys):
        corpus_path = write_corpus_file(tmp_path / "corpus.tsv", 200, seed=9)
        members = build_members(tmp_path, corpus_path, seed=4)
        out = tmp_path / "out"
        base = ["--corpus", str(corpus_path), "--out", str(out), "--seed", "5"]
        assert main(["ingest", *base]) == 0
        assert main(["evaluate", *base, "--members", str(members)]) == 0
        assert main(["ensemble", *base, "--members", str(members)]) == 0
        assert main(["report", *base]) == 0
        assert (out / "report.md").exists()

    def test_config_overrides_via_cli(self, tmp_path):
        corpus_path = write_corpus_file(tmp_path / "corpus.tsv", 200, seed=9)
        members = build_members(tmp_path, corpus_path, seed=4)
        out = tmp_path / "out"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"tier_delta": 0.2, "k_folds": 3,
                                      "correlation_stat": "pearson"}))
        base = ["--corpus", str(corpus_path), "--out", str(out), "--seed", "5",
                "--config", str(config)]
        assert main(["ingest", *base]) == 0
        assert main(["ensemble", *base, "--members", str(members)]) == 0
        audit = json.loads(
            (out / "ensemble_ens-all_tiered.audit.json").read_text()
        )
        assert audit["tier_delta"] == 0.2
