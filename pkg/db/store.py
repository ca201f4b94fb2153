# db/store.py
# ──────────────────────────────────────────────────────────────
"""
File persistence for pipeline artifacts: the QA record archive (JSONL)
and evaluation reports (JSON + per-record CSV).
"""

import json
from pathlib import Path
from typing import Iterable, List

import pandas as pd
from pydantic import ValidationError
from slugify import slugify

from core.errors import SchemaError
from core.schema import SCHEMA_VERSION, EvaluationReport, QARecord


# ──────────────────────────────────────────────────────────────
#  RECORD ARCHIVE
# ------------------------------------------------------------------
def write_records(records: Iterable[QARecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.model_dump_json() + "\n")
    return path


def read_records(path: str | Path) -> List[QARecord]:
    """Raises SchemaError naming the first line that does not parse."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(QARecord.model_validate_json(line))
            except ValidationError as exc:
                raise SchemaError(f"{path}:{line_no}: not a QA record ({exc.error_count()} error(s))") from exc
    return out


# ──────────────────────────────────────────────────────────────
#  EVALUATION REPORTS
# ------------------------------------------------------------------
def report_stem(model_name: str) -> str:
    return f"report_{slugify(model_name) or 'model'}"


def report_frame(report: EvaluationReport) -> pd.DataFrame:
    rows = []
    for r in report.record_results:
        row = {
            "record_id": r.record_id,
            "task": r.task.value,
            "status": "ok" if r.ok else "error",
            "similarity": r.similarity,
            "accuracy": r.accuracy.overall if r.accuracy else None,
        }
        for comp, score in (r.accuracy.components() if r.accuracy else {}).items():
            row[comp] = score
        row["extra_tags"] = " ".join(r.extras.cell_tags)
        row["extra_values"] = " ".join(r.extras.values)
        row["error"] = r.error or ""
        rows.append(row)
    return pd.DataFrame(rows)


def write_report(report: EvaluationReport, out_dir: str | Path) -> Path:
    """Writes <stem>.json and <stem>.csv; returns the JSON path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report_stem(report.model_name)
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    report_frame(report).to_csv(out_dir / f"{stem}.csv", index=False, lineterminator="\n")
    return json_path


def read_report(path: str | Path) -> EvaluationReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: unreadable report ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: report is not a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema_version {version!r}, expected {SCHEMA_VERSION!r}")
    try:
        return EvaluationReport.model_validate(doc)
    except ValidationError as exc:
        raise SchemaError(f"{path}: malformed report ({exc.error_count()} error(s))") from exc
