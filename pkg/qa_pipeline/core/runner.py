# qa_pipeline/core/runner.py
"""
Evaluation runner: prompt the model for every record, score each answer
for rubric accuracy and embedding similarity, and aggregate a report.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Sequence

from tqdm import tqdm

from core.errors import AllRecordsFailed, EmptySelection, GatewayError
from core.parser import extract_claims, load_grammar
from core.prompting import DEFAULT_BUDGET_TOKENS, assemble_prompt
from core.schema import EvaluationReport, QARecord, RecordResult, ReportManifest, TaskSummary
from core.scoring import COMPONENTS, find_extras, load_rubric, mean, score_accuracy, score_similarity
from core.variables import VariableRegistry
from llm.embeddings import Embedder
from llm.gateway import ChatHandle

log = logging.getLogger("runner")


@dataclass(frozen=True)
class EvalSettings:
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    concurrency: int = 4
    embedder_name: str = "lexical"
    config_hash: str = ""
    seed: int | None = None
    progress: bool = True


def evaluate_record(
    record: QARecord,
    gateway: ChatHandle,
    embedder: Embedder,
    registry: VariableRegistry,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
) -> RecordResult:
    """Score one record. A gateway failure becomes an error row, not an exception."""
    prompt = assemble_prompt(record, budget_tokens)
    try:
        exchange = gateway.chat_complete(prompt.system, prompt.user)
    except GatewayError as exc:
        err = exc.for_record(record.id)
        log.error("%s", err)
        return RecordResult(record_id=record.id, task=record.task, error=str(err))

    response = exchange.response
    claims = extract_claims(response, registry)
    try:
        similarity = score_similarity(record.assistant, response, embedder)
    except GatewayError as exc:
        err = exc.for_record(record.id)
        log.error("%s", err)
        return RecordResult(record_id=record.id, task=record.task, response=response, error=str(err))

    return RecordResult(
        record_id=record.id,
        task=record.task,
        similarity=similarity,
        accuracy=score_accuracy(record.gold, claims, registry),
        response=response,
        extras=find_extras(record.gold, claims),
    )


def _summaries(results: Sequence[RecordResult]) -> Dict[str, TaskSummary]:
    by_task: Dict[str, List[RecordResult]] = defaultdict(list)
    for r in results:
        by_task[r.task.value].append(r)
    out = {}
    for task in sorted(by_task):
        ok = [r for r in by_task[task] if r.ok]
        out[task] = TaskSummary(
            count=len(by_task[task]),
            mean_similarity=mean(r.similarity for r in ok),
            mean_accuracy=mean(r.accuracy.overall for r in ok),
        )
    return out


def evaluate_suite(
    records: Sequence[QARecord],
    gateway: ChatHandle,
    embedder: Embedder,
    registry: VariableRegistry,
    settings: EvalSettings = EvalSettings(),
) -> EvaluationReport:
    """
    Per-record rows sorted by record id plus the mean similarity and mean
    overall accuracy over the records that were scored. Raises
    AllRecordsFailed when none could be scored.
    """
    if not records:
        raise EmptySelection("no records to evaluate")

    budget_warnings = []
    for rec in records:
        bundle = assemble_prompt(rec, settings.budget_tokens)
        if bundle.over_budget:
            budget_warnings.append(f"{rec.id}: ~{bundle.token_estimate} tokens")
    for w in budget_warnings:
        log.warning("prompt over budget – %s", w)

    results: List[RecordResult] = []
    with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
        futures = [
            pool.submit(evaluate_record, rec, gateway, embedder, registry, settings.budget_tokens)
            for rec in records
        ]
        for fut in tqdm(as_completed(futures), total=len(futures),
                        desc=f"Evaluating {gateway.model_name}", disable=not settings.progress):
            results.append(fut.result())
    results.sort(key=lambda r: r.record_id)

    scored = [r for r in results if r.ok]
    if not scored:
        raise AllRecordsFailed(len(results))
    if len(scored) < len(results):
        log.warning("%d of %d record(s) failed", len(results) - len(scored), len(results))

    return EvaluationReport(
        model_name=gateway.model_name,
        record_results=results,
        mean_similarity=mean(r.similarity for r in scored),
        mean_accuracy=mean(r.accuracy.overall for r in scored),
        component_means={c: mean(r.accuracy.components()[c] for r in scored) for c in COMPONENTS},
        task_breakdown=_summaries(results),
        manifest=ReportManifest(
            config_hash=settings.config_hash,
            seed=settings.seed,
            embedder=settings.embedder_name,
            grammar_version=load_grammar(registry).version,
            rubric_version=load_rubric().version,
            records_total=len(results),
            records_scored=len(scored),
            records_failed=len(results) - len(scored),
            budget_warnings=budget_warnings,
        ),
    )
