# main.py – gridqa command-line driver
# synth    ➜ seeded synthetic grid + gold ledger
# build    ➜ QA records (self-consistency gated, optional paraphrase)
# split    ➜ seeded train / test split
# export   ➜ fine-tuning JSONL (user / input / assistant)
# fixture  ➜ offline replay fixture (echo or degraded) for a record set
# eval     ➜ prompt a model, score similarity + rubric accuracy, write a report
# report   ➜ compare several reports side by side
#
# Exit codes: 0 ok · 1 other failure · 2 configuration · 3 data / gate · 4 gateway

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import List, Tuple

import yaml
from pydantic import ValidationError

from core.errors import (
    AllRecordsFailed, ConfigError, DataValidationError, EmptyTable, GateFailure, GatewayError,
    GridQAError, MissingColumn, SchemaError,
)
from core.grid import GridDataset
from core.variables import VariableRegistry, default_registry, load_registry
from db.cache import ResponseCache
from db.manifest import RunManifest, now_iso, sha256_file, write_manifest
from db.results_api import comparison_rows, load_reports, plot_comparison, render_table
from db.store import read_records, write_records, write_report
from llm.embeddings import lexical_embedder
from llm.gateway import ChatHandle, Gateway
from llm.replay import FIXTURE_STYLES, RecordingGateway, ReplayGateway, build_fixture, write_fixture
from qa_pipeline.core.ingest import (
    attach_regions, load_column_mapping, load_grid_table, load_region_map, merge_datasets,
    validate_dataset,
)
from qa_pipeline.core.paraphrase import ParaphrasePolicy, paraphrase_all
from qa_pipeline.core.records import build_records, load_templates
from qa_pipeline.core.runner import EvalSettings, evaluate_suite
from qa_pipeline.core.splits import export_training_jsonl, over_budget, split_records
from qa_pipeline.core.synthetic import (
    generate_synthetic, synthetic_column_mapping, write_column_mapping, write_grid_csv,
    write_ledger, write_region_csv,
)
from utils.config import TOOL_VERSION, HarnessConfig, config_hash, load_config
from utils.logger import setup_logging

log = logging.getLogger("gridqa")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DATA, EXIT_GATEWAY = 0, 1, 2, 3, 4


# ───────────────────────── helpers ───────────────────────────────────
def _config(args) -> HarnessConfig:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {exc.filename}") from exc
    except (yaml.YAMLError, ValidationError, ValueError) as exc:
        raise ConfigError(f"invalid config {args.config}: {exc}") from exc
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.out is not None:
        update["output_dir"] = Path(args.out)
    cfg = cfg.model_copy(update=update)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def _registry(cfg: HarnessConfig) -> VariableRegistry:
    return load_registry(cfg.paths.registry) if cfg.paths.registry else default_registry()


def _manifest(cfg: HarnessConfig, stage: str, **kw) -> RunManifest:
    return RunManifest(stage=stage, tool_version=TOOL_VERSION, config_hash=config_hash(cfg),
                       started=now_iso(), **kw)


def _load_dataset(cfg: HarnessConfig, registry: VariableRegistry) -> Tuple[GridDataset, List[str]]:
    out = cfg.output_dir
    if cfg.dataset is not None:
        mapping = load_column_mapping(cfg.dataset.column_mapping)
        tables = [load_grid_table(p, mapping, registry) for p in cfg.dataset.grid_tables]
        ds, warnings = merge_datasets(tables)
        region_map = load_region_map(cfg.dataset.region_map)
        return attach_regions(ds, region_map), warnings + region_map.warnings

    # synthetic: prefer the files `synth` wrote, else regenerate in memory
    grid = out / "grid.csv"
    if grid.exists():
        mapping = load_column_mapping(out / "mapping.yaml")
        ds = load_grid_table(grid, mapping, registry)
        return attach_regions(ds, load_region_map(out / "regions.csv")), []
    s = cfg.synthetic
    ds, _ledger = generate_synthetic(cfg.seed, s.rows, s.cols, registry, s.regions)
    return ds, []


def _gateway(cfg: HarnessConfig, model_name: str | None = None,
             replay: Path | None = None) -> ChatHandle:
    name = model_name or cfg.gateway.model_name
    if replay is not None:
        return ReplayGateway.from_file(replay, name, cfg.gateway.temperature)
    gw_cfg = cfg.gateway.model_copy(update={"model_name": name})
    cache = ResponseCache(cfg.output_dir / "cache.sqlite") if gw_cfg.cache else None
    return Gateway(gw_cfg, cache=cache)


# ───────────────────────── commands ──────────────────────────────────
def cmd_synth(args) -> int:
    cfg = _config(args)
    if cfg.synthetic is None:
        raise ConfigError("`synth` needs a `synthetic` section in the config")
    registry = _registry(cfg)
    s, out = cfg.synthetic, cfg.output_dir
    manifest = _manifest(cfg, "synth", seeds={"synthetic": cfg.seed})

    ds, ledger = generate_synthetic(cfg.seed, s.rows, s.cols, registry, s.regions)
    artifacts = [
        write_grid_csv(ds, out / "grid.csv"),
        write_region_csv(ds, out / "regions.csv"),
        write_column_mapping(synthetic_column_mapping(registry), out / "mapping.yaml"),
        write_ledger(ledger, out / "ledger.jsonl"),
    ]
    manifest.record_counts = {"cells": len(ds.cells()), "entries": len(ds)}
    write_manifest(manifest, out, artifacts)
    print(f"[✓] {len(ds.cells())} cells, {len(ds)} entries → {out}")
    return EXIT_OK


def cmd_build(args) -> int:
    cfg = _config(args)
    registry = _registry(cfg)
    catalog = load_templates(str(cfg.paths.templates) if cfg.paths.templates else None)
    manifest = _manifest(cfg, "build", seeds={"build": cfg.seed})

    ds, warnings = _load_dataset(cfg, registry)
    report = validate_dataset(ds)
    if not report.complete:
        for line, reason in report.malformed_rows[:20]:
            log.error("line %d: %s", line, reason)
        raise DataValidationError(f"dataset incomplete: {report.summary()}")

    records = build_records(
        ds,
        seed=cfg.seed,
        cells=cfg.sampling.cells,
        strategy=cfg.sampling.strategy,
        variables=cfg.sampling.variables,
        catalog=catalog,
    )

    if cfg.paraphrase.enabled:
        policy = ParaphrasePolicy(cfg.paraphrase.temperature, cfg.paraphrase.parse_retries,
                                  cfg.gateway.concurrency_limit)
        records, outcomes = paraphrase_all(records, _gateway(cfg), policy, registry)
        manifest.models["paraphrase"] = cfg.gateway.model_name
        manifest.extra["paraphrase"] = dict(Counter(o.status for o in outcomes))
        warnings += [f"paraphrase {o.record_id}: {o.status} {o.reason}".strip()
                     for o in outcomes if o.status != "accepted"]

    path = write_records(records, cfg.output_dir / "records.jsonl")
    manifest.record_counts = dict(Counter(r.task.value for r in records), total=len(records))
    manifest.warnings = warnings
    manifest.extra["gate"] = "passed"
    manifest.extra["templates_version"] = catalog.version
    write_manifest(manifest, cfg.output_dir, [path])
    print(f"[✓] {len(records)} records → {path}")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    records = read_records(args.records or out / "records.jsonl")
    manifest = _manifest(cfg, "split", seeds={"split": cfg.split_seed})
    train, test = split_records(records, cfg.split.test_fraction, cfg.split_seed)
    artifacts = [write_records(train, out / "train.jsonl"), write_records(test, out / "test.jsonl")]
    manifest.record_counts = {"train": len(train), "test": len(test)}
    write_manifest(manifest, out, artifacts)
    print(f"[✓] train {len(train)} / test {len(test)} → {out}")
    return EXIT_OK


def cmd_export(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    manifest = _manifest(cfg, "export")
    artifacts = []
    for split in ("train", "test"):
        src = out / f"{split}.jsonl"
        if not src.exists():
            continue
        records = read_records(src)
        for rid in over_budget(records, cfg.eval.budget_tokens):
            manifest.warnings.append(f"{split} {rid}: prompt over {cfg.eval.budget_tokens} tokens")
        dst = out / f"sft_{split}.jsonl"
        with open(dst, "wb") as sink:
            manifest.record_counts[split] = export_training_jsonl(records, sink)
        artifacts.append(dst)
    if not artifacts:
        raise DataValidationError(f"nothing to export: run `split` first ({out})")
    for w in manifest.warnings:
        log.warning(w)
    write_manifest(manifest, out, artifacts)
    print(f"[✓] exported {manifest.record_counts} → {out}")
    return EXIT_OK


def cmd_fixture(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    records = read_records(args.records or out / "test.jsonl")
    model_name = args.model or cfg.gateway.model_name
    fixtures = build_fixture(
        records, model_name, _registry(cfg),
        style=args.style, seed=cfg.seed, fraction=args.fraction,
        temperature=cfg.gateway.temperature, budget_tokens=cfg.eval.budget_tokens,
    )
    path = write_fixture(Path(args.output) if args.output else out / "fixtures" / f"{args.style}.jsonl",
                         fixtures)
    print(f"[✓] {len(fixtures)} {args.style} exchange(s) for {model_name} → {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    registry = _registry(cfg)
    records = read_records(args.records or out / "test.jsonl")
    replay = Path(args.replay) if args.replay else cfg.eval.replay
    embedder_name = args.embedder or cfg.eval.embedder

    gateway = _gateway(cfg, args.model, replay)
    if args.record:
        gateway = RecordingGateway(gateway)
    embedder = gateway.embed if embedder_name == "remote" else lexical_embedder

    manifest = _manifest(cfg, "eval", models={"chat": gateway.model_name, "embedder": embedder_name})
    if replay is None:
        manifest.extra["gateway"] = cfg.gateway.model_dump(mode="json", exclude={"api_key"})
    else:
        manifest.extra["replay"] = str(replay)
    settings = EvalSettings(
        budget_tokens=cfg.eval.budget_tokens,
        concurrency=cfg.gateway.concurrency_limit,
        embedder_name=embedder_name,
        config_hash=manifest.config_hash,
        seed=cfg.seed,
        progress=sys.stderr.isatty(),
    )
    try:
        report = evaluate_suite(records, gateway, embedder, registry, settings)
    finally:
        if args.record:
            gateway.save(args.record)

    path = write_report(report, out)
    manifest.record_counts = {"total": report.manifest.records_total,
                              "scored": report.manifest.records_scored,
                              "failed": report.manifest.records_failed}
    manifest.warnings = list(report.manifest.budget_warnings) + [
        r.error for r in report.record_results if r.error
    ]
    write_manifest(manifest, out, [path, path.with_suffix(".csv")])
    print(f"{report.model_name}: similarity {report.mean_similarity:.4f} · "
          f"accuracy {report.mean_accuracy:.4f} → {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    # no harness config here: the inputs are the report files themselves
    manifest = RunManifest(stage="report", tool_version=TOOL_VERSION, config_hash="", started=now_iso())
    df = load_reports(args.reports)
    print(render_table(df), end="")
    comparison = out / "comparison.json"
    comparison.write_text(json.dumps({"rows": comparison_rows(df)}, indent=2) + "\n", encoding="utf-8")
    artifacts = [comparison]
    if args.plot:
        artifacts.append(plot_comparison(df, out / "comparison.png"))
    manifest.record_counts = {"reports": len(args.reports)}
    manifest.extra["inputs"] = {str(p): sha256_file(p) for p in args.reports}
    write_manifest(manifest, out, artifacts)
    return EXIT_OK


# ───────────────────────── CLI ───────────────────────────────────────
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config.yaml", help="harness YAML config")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("--verbose", "-v", action="store_true")

    p = argparse.ArgumentParser(prog="gridqa", description="Grid climate QA dataset builder and evaluator")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate a synthetic grid").set_defaults(func=cmd_synth)
    sub.add_parser("build", parents=[common], help="build QA records").set_defaults(func=cmd_build)

    sp = sub.add_parser("split", parents=[common], help="train/test split")
    sp.add_argument("--records", default=None)
    sp.set_defaults(func=cmd_split)

    sub.add_parser("export", parents=[common], help="fine-tuning JSONL").set_defaults(func=cmd_export)

    fx = sub.add_parser("fixture", parents=[common], help="offline replay fixture")
    fx.add_argument("--style", choices=FIXTURE_STYLES, default="echo")
    fx.add_argument("--records", default=None)
    fx.add_argument("--model", default=None, help="model name the fixture answers for")
    fx.add_argument("--fraction", type=float, default=0.6, help="share of degraded answers")
    fx.add_argument("--output", default=None)
    fx.set_defaults(func=cmd_fixture)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a model")
    ev.add_argument("--records", default=None)
    ev.add_argument("--replay", default=None, help="answer from a recorded fixture")
    ev.add_argument("--record", default=None, help="save live exchanges as a fixture")
    ev.add_argument("--embedder", choices=("remote", "lexical"), default=None)
    ev.add_argument("--model", default=None, help="override gateway.model_name")
    ev.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", parents=[common], help="compare evaluation reports")
    rp.add_argument("reports", nargs="+")
    rp.add_argument("--plot", action="store_true", help="also write comparison.png")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (DataValidationError, GateFailure, MissingColumn, EmptyTable, SchemaError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (GatewayError, AllRecordsFailed) as exc:
        log.error("%s", exc)
        return EXIT_GATEWAY
    except (GridQAError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
