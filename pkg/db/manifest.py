# db/manifest.py
"""
Per-stage run manifests: what ran, with which config and seeds, and a
sha256 of every artifact it wrote so a run can be checked afterwards.
"""

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class ArtifactEntry(BaseModel):
    path: str  # relative to the manifest's directory
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    stage: str
    tool_version: str
    config_hash: str
    seeds: Dict[str, int] = Field(default_factory=dict)
    record_counts: Dict[str, int] = Field(default_factory=dict)
    models: Dict[str, str] = Field(default_factory=dict)
    started: str = ""
    finished: str = ""
    warnings: List[str] = Field(default_factory=list)
    artifacts: List[ArtifactEntry] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(manifest: RunManifest, out_dir: str | Path,
                   artifacts: Optional[List[Path]] = None) -> Path:
    """Hashes `artifacts`, stamps `finished` and writes <stage>_manifest.json."""
    out_dir = Path(out_dir)
    entries = [
        ArtifactEntry(
            path=Path(p).resolve().relative_to(out_dir.resolve()).as_posix()
            if Path(p).resolve().is_relative_to(out_dir.resolve()) else str(p),
            sha256=sha256_file(p),
            bytes=Path(p).stat().st_size,
        )
        for p in (artifacts or [])
    ]
    done = manifest.model_copy(update={"artifacts": entries, "finished": now_iso()})
    path = out_dir / f"{manifest.stage}_manifest.json"
    path.write_text(done.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))


def verify_manifest(path: str | Path) -> List[str]:
    """Problems found: missing artifacts or hash mismatches. Empty when the run is intact."""
    path = Path(path)
    manifest = read_manifest(path)
    problems = []
    for art in manifest.artifacts:
        target = Path(art.path)
        if not target.is_absolute():
            target = path.parent / target
        if not target.exists():
            problems.append(f"missing: {art.path}")
        elif sha256_file(target) != art.sha256:
            problems.append(f"changed: {art.path}")
    return problems
