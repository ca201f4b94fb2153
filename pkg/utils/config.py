# utils/config.py
"""
Harness configuration: one YAML file validated into `HarnessConfig`.

Relative paths inside the file resolve against the file's directory. The
API key comes from the environment variable named by
`gateway.api_key_env` (GRIDQA_API_KEY by default) unless the file sets it.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, Field, model_validator

from llm.gateway import GatewayConfig

TOOL_VERSION = "0.1.0"
ENV_PREFIX = "GRIDQA_"


class SyntheticConfig(BaseModel):
    rows: int = Field(5, ge=1, le=999)
    cols: int = Field(5, ge=1, le=999)
    regions: int = Field(2, ge=1)


class FileDatasetConfig(BaseModel):
    grid_tables: List[Path] = Field(min_length=1)
    column_mapping: Path
    region_map: Path


class SamplingConfig(BaseModel):
    cells: int = Field(3, ge=1)
    strategy: Literal["random", "stratified"] = "stratified"
    variables: Optional[List[str]] = None


class SplitConfig(BaseModel):
    test_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    seed: Optional[int] = None


class ParaphraseConfig(BaseModel):
    enabled: bool = False
    temperature: float = Field(0.7, ge=0.0, le=2.0)
    parse_retries: int = Field(2, ge=0)


class EvalConfig(BaseModel):
    embedder: Literal["remote", "lexical"] = "lexical"
    budget_tokens: int = Field(2048, ge=1)
    replay: Optional[Path] = None


class PathsConfig(BaseModel):
    registry: Optional[Path] = None
    templates: Optional[Path] = None


class HarnessConfig(BaseModel):
    seed: int = 7
    output_dir: Path = Path("runs/default")
    synthetic: Optional[SyntheticConfig] = None
    dataset: Optional[FileDatasetConfig] = None
    paths: PathsConfig = PathsConfig()
    gateway: GatewayConfig = GatewayConfig()
    sampling: SamplingConfig = SamplingConfig()
    split: SplitConfig = SplitConfig()
    paraphrase: ParaphraseConfig = ParaphraseConfig()
    eval: EvalConfig = EvalConfig()

    @model_validator(mode="after")
    def _one_dataset_source(self) -> "HarnessConfig":
        if (self.synthetic is None) == (self.dataset is None):
            raise ValueError("configure exactly one of `synthetic` or `dataset`")
        return self

    @property
    def split_seed(self) -> int:
        return self.split.seed if self.split.seed is not None else self.seed


def _resolve(p: Optional[Path], base: Path) -> Optional[Path]:
    if p is None or p.is_absolute():
        return p
    return base / p


def _resolve_paths(cfg: HarnessConfig, base: Path) -> HarnessConfig:
    update = {"output_dir": _resolve(cfg.output_dir, base)}
    update["paths"] = cfg.paths.model_copy(update={
        "registry": _resolve(cfg.paths.registry, base),
        "templates": _resolve(cfg.paths.templates, base),
    })
    if cfg.dataset is not None:
        update["dataset"] = cfg.dataset.model_copy(update={
            "grid_tables": [_resolve(p, base) for p in cfg.dataset.grid_tables],
            "column_mapping": _resolve(cfg.dataset.column_mapping, base),
            "region_map": _resolve(cfg.dataset.region_map, base),
        })
    if cfg.eval.replay is not None:
        update["eval"] = cfg.eval.model_copy(update={"replay": _resolve(cfg.eval.replay, base)})
    return cfg.model_copy(update=update)


def _env_overrides(doc: dict) -> dict:
    """GRIDQA_BASE_URL / GRIDQA_MODEL override the gateway section."""
    gateway = dict(doc.get("gateway") or {})
    if os.getenv(f"{ENV_PREFIX}BASE_URL"):
        gateway["base_url"] = os.environ[f"{ENV_PREFIX}BASE_URL"]
    if os.getenv(f"{ENV_PREFIX}MODEL"):
        gateway["model_name"] = os.environ[f"{ENV_PREFIX}MODEL"]
    return {**doc, "gateway": gateway} if gateway else doc


def load_config(path: str | Path) -> HarnessConfig:
    """
    Raises FileNotFoundError, yaml.YAMLError or pydantic.ValidationError;
    the CLI maps all three to a configuration error.
    """
    path = Path(path)
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    cfg = HarnessConfig.model_validate(_env_overrides(doc))
    return _resolve_paths(cfg, path.resolve().parent)


def config_hash(cfg: HarnessConfig) -> str:
    """sha256 over the canonical config, secrets excluded."""
    doc = cfg.model_dump(mode="json", exclude={"gateway": {"api_key"}})
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
