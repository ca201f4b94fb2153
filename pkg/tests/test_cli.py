import json

import pytest
import yaml

from core.schema import EvaluationReport
from db.manifest import verify_manifest
from db.store import read_records
from main import main
from qa_pipeline.core.records import DEFAULT_TEMPLATES_PATH
from qa_pipeline.core.synthetic import (
    synthetic_column_mapping, write_column_mapping, write_grid_csv, write_region_csv,
)


@pytest.fixture
def run_dir(write_config, tmp_path):
    """Config plus a finished synth → build → split pipeline."""
    cfg = write_config()
    out = tmp_path / "run"
    for stage in ("synth", "build", "split"):
        assert main([stage, "--config", str(cfg)]) == 0
    return cfg, out


def test_synth_is_deterministic(write_config, tmp_path):
    cfg = write_config()
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("grid.csv", "regions.csv", "mapping.yaml", "ledger.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert verify_manifest(tmp_path / "a" / "synth_manifest.json") == []
    assert len((tmp_path / "a" / "ledger.jsonl").read_text(encoding="utf-8").splitlines()) == 9 * 5 * 5


def test_pipeline(run_dir, records):
    _cfg, out = run_dir
    built = read_records(out / "records.jsonl")
    assert len(built) == 24
    assert [r.id for r in built] == [r.id for r in records]
    assert len(read_records(out / "train.jsonl")) == 22
    assert len(read_records(out / "test.jsonl")) == 2
    for stage in ("synth", "build", "split"):
        assert verify_manifest(out / f"{stage}_manifest.json") == []
    build = json.loads((out / "build_manifest.json").read_text(encoding="utf-8"))
    assert build["record_counts"]["total"] == 24
    assert build["extra"]["gate"] == "passed"


def test_export(run_dir):
    cfg, out = run_dir
    assert main(["export", "--config", str(cfg)]) == 0
    rows = [json.loads(line) for line in (out / "sft_train.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 22
    assert set(rows[0]) == {"id", "user", "input", "assistant"}
    assert len((out / "sft_test.jsonl").read_text(encoding="utf-8").splitlines()) == 2


def test_export_needs_split(write_config):
    assert main(["export", "--config", str(write_config())]) == 3


def test_replayed_eval(run_dir):
    cfg, out = run_dir
    assert main(["fixture", "--config", str(cfg), "--records", str(out / "records.jsonl")]) == 0
    fixture = out / "fixtures" / "echo.jsonl"
    assert len(fixture.read_text(encoding="utf-8").splitlines()) == 24

    argv = ["eval", "--config", str(cfg), "--records", str(out / "records.jsonl"), "--replay", str(fixture)]
    assert main(argv) == 0
    report_path = out / "report_test-model.json"
    report = EvaluationReport.model_validate_json(report_path.read_text(encoding="utf-8"))
    assert report.mean_accuracy == 1.0
    assert report.manifest.records_scored == 24
    first = report_path.read_bytes()
    assert main(argv) == 0
    assert report_path.read_bytes() == first
    assert verify_manifest(out / "eval_manifest.json") == []


def test_degraded_fixture_eval(run_dir):
    cfg, out = run_dir
    records = str(out / "records.jsonl")
    assert main(["fixture", "--config", str(cfg), "--records", records, "--style", "degraded",
                 "--model", "weak-model"]) == 0
    assert main(["eval", "--config", str(cfg), "--records", records, "--model", "weak-model",
                 "--replay", str(out / "fixtures" / "degraded.jsonl")]) == 0
    report = EvaluationReport.model_validate_json((out / "report_weak-model.json").read_text(encoding="utf-8"))
    assert report.mean_accuracy < 1.0


def test_unreachable_endpoint(run_dir):
    cfg, _out = run_dir
    assert main(["eval", "--config", str(cfg)]) == 4


def test_config_errors(write_config, tmp_path):
    assert main(["synth", "--config", str(write_config(synthetic={"rows": 0}))]) == 2
    assert main(["synth", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_missing_records_file(write_config):
    assert main(["split", "--config", str(write_config())]) == 1


def test_report_command(tmp_path, capsys):
    paths = []
    for model, sim, acc in (("model-a", 0.8335, 0.8), ("model-b", 0.867, 0.825), ("model-c", 0.85, 0.825)):
        report = EvaluationReport(model_name=model, record_results=[], mean_similarity=sim, mean_accuracy=acc)
        path = tmp_path / f"{model}.json"
        path.write_text(report.model_dump_json(), encoding="utf-8")
        paths.append(str(path))
    assert main(["report", *paths, "--out", str(tmp_path / "cmp"), "--plot"]) == 0
    table = capsys.readouterr().out
    assert "0.8335 " in table
    assert "0.8670*" in table
    assert table.count("0.8250*") == 2
    rows = json.loads((tmp_path / "cmp" / "comparison.json").read_text(encoding="utf-8"))["rows"]
    assert [r["model"] for r in rows] == ["model-a", "model-b", "model-c"]

    manifest_path = tmp_path / "cmp" / "report_manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert sorted(a["path"] for a in manifest["artifacts"]) == ["comparison.json", "comparison.png"]
    assert manifest["record_counts"] == {"reports": 3}
    assert verify_manifest(manifest_path) == []
    (tmp_path / "cmp" / "comparison.json").write_text("{}", encoding="utf-8")
    assert verify_manifest(manifest_path) != []


def test_report_rejects_other_schema(tmp_path):
    report = EvaluationReport(model_name="m", record_results=[], mean_similarity=0.5, mean_accuracy=0.5)
    path = tmp_path / "r.json"
    path.write_text(json.dumps({**json.loads(report.model_dump_json()), "schema_version": "2"}), encoding="utf-8")
    assert main(["report", str(path), "--out", str(tmp_path)]) == 3


def test_corrupted_templates_fail_gate(write_config, tmp_path):
    doc = yaml.safe_load(DEFAULT_TEMPLATES_PATH.read_text(encoding="utf-8"))
    for t in doc["templates"]:
        t["answer"] = t["answer"].replace(" {unit}", "")
    templates = tmp_path / "templates.yaml"
    templates.write_text(yaml.safe_dump(doc, allow_unicode=True), encoding="utf-8")
    cfg = write_config(paths={"templates": str(templates)}, sampling={"variables": ["annual_temp_max"]})
    assert main(["build", "--config", str(cfg)]) == 3


def test_file_dataset(write_config, tmp_path, synth, registry):
    ds, _ = synth
    data = tmp_path / "data"
    write_grid_csv(ds, data / "grid.csv")
    write_region_csv(ds, data / "regions.csv")
    write_column_mapping(synthetic_column_mapping(registry), data / "mapping.yaml")
    dataset = {"grid_tables": ["data/grid.csv"], "column_mapping": "data/mapping.yaml",
               "region_map": "data/regions.csv"}
    cfg = write_config(synthetic=None, dataset=dataset)
    assert main(["build", "--config", str(cfg)]) == 0
    assert len(read_records(tmp_path / "run" / "records.jsonl")) == 24

    mapping = yaml.safe_load((data / "mapping.yaml").read_text(encoding="utf-8"))
    mapping["columns"]["snow_depth"] = {"variable": "wind_speed", "period": "historical"}
    mapping["columns"].pop("wind_speed_historical")
    (data / "mapping.yaml").write_text(yaml.safe_dump(mapping), encoding="utf-8")
    assert main(["build", "--config", str(cfg)]) == 3
