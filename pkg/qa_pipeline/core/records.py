# qa_pipeline/core/records.py
"""
Template-driven QA record generation.

Every record carries its input context, the reference answer and the gold
claims; gold claims are assembled from the context values that feed the
answer template, never by parsing the rendered text. A self-consistency
gate then checks that the claim extractor recovers the gold claims from
each reference answer.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from core.errors import EmptySelection, GateFailure, UnknownTemplate
from core.grid import (
    BOTH_SCENARIOS, PROJECTION_PERIODS, CellId, GridDataset, Scenario, TimePeriod,
    fmt2, lookup_value, regional_aggregate, round2, trend_direction,
)
from core.parser import extract_claims
from core.schema import (
    GoldClaims, GoldValue, InputContext, MeasurementModel, ProjectionEntry, QARecord,
    RegionalEntry, StatsModel, TaskKind, VariableBlock,
)
from core.scoring import failing_components
from core.variables import PROJECT_ROOT, VariableRegistry

log = logging.getLogger("records")

DEFAULT_TEMPLATES_PATH = PROJECT_ROOT / "data" / "templates.yaml"
SCENARIO_MODES = ("named", "both")
SAMPLING_STRATEGIES = ("random", "stratified")

# numeric placeholders an answer template must use, per (task, scenario mode)
REQUIRED_VALUES: Dict[Tuple[TaskKind, str], Tuple[str, ...]] = {
    (TaskKind.VARIABLE_RETRIEVAL, "named"): ("value",),
    (TaskKind.VARIABLE_RETRIEVAL, "both"): ("value_rcp45", "value_rcp85"),
    (TaskKind.TREND_ANALYSIS, "named"): ("hist_value", "mid_value", "end_value"),
    (TaskKind.TREND_ANALYSIS, "both"): (
        "hist_value", "mid_value_rcp45", "end_value_rcp45", "mid_value_rcp85", "end_value_rcp85",
    ),
    (TaskKind.SCENARIO_COMPARISON, "both"): ("value_rcp45", "value_rcp85", "delta"),
    (TaskKind.CONTEXTUAL_INTERPRETATION, "named"): ("value", "regional_mean", "deviation"),
}
# wording placeholders an answer template must use, per task
REQUIRED_TEXT: Dict[TaskKind, Tuple[str, ...]] = {
    TaskKind.CONTEXTUAL_INTERPRETATION: ("position", "region"),
}
_SIGNED = {"delta", "delta_mid", "delta_end", "deviation"}


# ───────────────────────── input context ─────────────────────────────
def build_input_context(
    ds: GridDataset,
    cell: CellId,
    variables: Sequence[str],
    periods: Sequence[TimePeriod] = tuple(TimePeriod),
) -> InputContext:
    """
    Cell values for each selected variable/period (both scenarios for
    projections) plus regional statistics for the cell's region.
    """
    if not variables:
        raise EmptySelection("no variables selected")
    if not periods:
        raise EmptySelection("no periods selected")
    region = ds.region_of(cell)

    blocks = []
    for key in variables:
        var = ds.variables.get(key)
        historical = None
        projections: List[ProjectionEntry] = []
        regional: List[RegionalEntry] = []
        for period in TimePeriod:
            if period not in periods:
                continue
            scenarios = BOTH_SCENARIOS if period.is_projection else (None,)
            for scenario in scenarios:
                m = lookup_value(ds, cell, key, period, scenario)
                mm = MeasurementModel(value=m.value, unit=m.unit)
                if scenario is None:
                    historical = mm
                else:
                    projections.append(ProjectionEntry(period=period, scenario=scenario, measurement=mm))
                stats = regional_aggregate(ds, region, key, period, scenario)
                regional.append(RegionalEntry(
                    period=period, scenario=scenario,
                    stats=StatsModel(min=stats.min, max=stats.max, mean=stats.mean, count=stats.count),
                ))
        blocks.append(VariableBlock(
            variable=key, display_name=var.display_name, unit=var.canonical_unit,
            historical=historical, projections=projections, regional=regional,
        ))
    return InputContext(cell=cell.tag, state=region.state, county=region.county, blocks=blocks)


# ───────────────────────── template catalog ──────────────────────────
@dataclass(frozen=True)
class Template:
    id: str
    task: TaskKind
    scenario_mode: str
    question: str
    answer: str

    def answer_fields(self) -> List[str]:
        return [f for _, f, _, _ in string.Formatter().parse(self.answer) if f]


@dataclass(frozen=True)
class TemplateCatalog:
    templates: Tuple[Template, ...]
    version: int = 1

    def get(self, template_id: str) -> Template:
        for t in self.templates:
            if t.id == template_id:
                return t
        raise UnknownTemplate(template_id)

    def for_task(self, task: TaskKind) -> List[Template]:
        return [t for t in self.templates if t.task is task]


def _check_template(t: Template) -> None:
    if t.scenario_mode not in SCENARIO_MODES:
        raise ValueError(f"template {t.id}: scenario must be one of {SCENARIO_MODES}")
    required = REQUIRED_VALUES.get((t.task, t.scenario_mode))
    if required is None:
        raise ValueError(f"template {t.id}: {t.task.value} does not support scenario mode {t.scenario_mode!r}")
    fields = set(t.answer_fields())
    missing = [f for f in ("cell", *required, *REQUIRED_TEXT.get(t.task, ())) if f not in fields]
    if missing:
        raise ValueError(f"template {t.id}: answer lacks placeholder(s) {missing}")


@lru_cache(maxsize=4)
def load_templates(path: str | None = None) -> TemplateCatalog:
    doc = yaml.safe_load(Path(path or DEFAULT_TEMPLATES_PATH).read_text(encoding="utf-8")) or {}
    templates = []
    seen = set()
    for raw in doc.get("templates", []):
        t = Template(
            id=raw["id"],
            task=TaskKind(raw["task"]),
            scenario_mode=raw.get("scenario", "named"),
            question=raw["question"],
            answer=raw["answer"],
        )
        if t.id in seen:
            raise ValueError(f"duplicate template id {t.id!r}")
        seen.add(t.id)
        _check_template(t)
        templates.append(t)
    catalog = TemplateCatalog(tuple(templates), int(doc.get("version", 1)))
    for task in TaskKind:
        if len(catalog.for_task(task)) < 2:
            log.warning("only %d template(s) for %s", len(catalog.for_task(task)), task.value)
    return catalog


# ───────────────────────── instantiation ─────────────────────────────
def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


def _position(value: Decimal, stats: StatsModel) -> str:
    if stats.count == 1:
        return "the only cell in"
    if value == stats.max:
        return "the highest value in"
    if value == stats.min:
        return "the lowest value in"
    return "within the range of the rest of"


def _comparison(delta: Decimal) -> str:
    if delta > 0:
        return "higher than"
    if delta < 0:
        return "lower than"
    return "the same as"


def _placeholders(
    task: TaskKind,
    ctx: InputContext,
    var: str,
    period: TimePeriod,
    scenario: Scenario,
) -> Tuple[Dict[str, str], Dict[str, Decimal]]:
    """(text placeholders, numeric placeholders) for one record."""
    block = ctx.block(var)
    text = {
        "cell": ctx.cell,
        "region": ctx.region.label,
        "variable": block.display_name,
        "unit": block.unit or "",
        "period": period.label,
        "scenario": scenario.label,
        "rcp45": Scenario.RCP45.label,
        "rcp85": Scenario.RCP85.label,
    }
    nums: Dict[str, Decimal] = {}

    def proj(p: TimePeriod, s: Scenario) -> Decimal:
        return block.projection(p, s).value

    if task is TaskKind.VARIABLE_RETRIEVAL:
        nums["value"] = proj(period, scenario)
        nums["value_rcp45"] = proj(period, Scenario.RCP45)
        nums["value_rcp85"] = proj(period, Scenario.RCP85)

    elif task is TaskKind.TREND_ANALYSIS:
        hist = block.historical.value
        nums["hist_value"] = hist
        for s in Scenario:
            mid, end = proj(TimePeriod.MID_CENTURY, s), proj(TimePeriod.END_CENTURY, s)
            nums[f"mid_value_{s.value}"] = mid
            nums[f"end_value_{s.value}"] = end
            text[f"direction_{s.value}"] = trend_direction(mid - hist, end - mid).value
        mid, end = proj(TimePeriod.MID_CENTURY, scenario), proj(TimePeriod.END_CENTURY, scenario)
        nums.update(mid_value=mid, end_value=end, delta_mid=mid - hist, delta_end=end - mid)
        text["direction"] = trend_direction(mid - hist, end - mid).value

    elif task is TaskKind.SCENARIO_COMPARISON:
        low, high = proj(period, Scenario.RCP45), proj(period, Scenario.RCP85)
        nums.update(value_rcp45=low, value_rcp85=high, delta=high - low)
        text["comparison"] = _comparison(high - low)

    elif task is TaskKind.CONTEXTUAL_INTERPRETATION:
        value = proj(period, scenario)
        stats = block.regional_stats(period, scenario)
        nums.update(
            value=value, regional_min=stats.min, regional_max=stats.max,
            regional_mean=stats.mean, deviation=value - stats.mean,
        )
        text["position"] = _position(value, stats)

    return text, nums


def _tidy(sentence: str) -> str:
    # an empty {unit} leaves doubled spaces and "23.10 ." behind
    sentence = re.sub(r"[ \t]{2,}", " ", sentence)
    return re.sub(r" +([.,;)])", r"\1", sentence).strip()


def instantiate_template(
    task: TaskKind,
    ctx: InputContext,
    template_id: str,
    rng_seed: int,
    catalog: Optional[TemplateCatalog] = None,
) -> Tuple[str, str, GoldClaims]:
    """(question, reference answer, gold claims) for one template and context."""
    catalog = catalog or load_templates()
    template = catalog.get(template_id)
    if template.task is not task:
        raise UnknownTemplate(f"{template_id} (is a {template.task.value} template)")

    rng = np.random.default_rng(rng_seed)
    var = _pick(rng, ctx.variable_keys())
    projection_periods = [p for p in ctx.block(var).periods() if p.is_projection]
    if not projection_periods:
        raise EmptySelection(f"context for {ctx.cell} holds no projection period")
    period = _pick(rng, projection_periods)
    scenario = _pick(rng, list(Scenario))

    text, nums = _placeholders(task, ctx, var, period, scenario)
    rendered = dict(text)
    for name, value in nums.items():
        rendered[name] = fmt2(value, signed=name in _SIGNED)

    question = _tidy(template.question.format(**rendered))
    answer = _tidy(template.answer.format(**rendered))

    unit = ctx.block(var).unit
    used = [f for f in template.answer_fields() if f in nums]
    gold = GoldClaims(
        cell_tags=[ctx.cell],
        variables=[var],
        units=[unit] if unit else [],
        scenarios=[scenario] if template.scenario_mode == "named" else list(BOTH_SCENARIOS),
        values=[GoldValue(value=round2(nums[f]), unit=unit) for f in used],
    )
    return question, answer, gold


# ───────────────────────── ids / seeds ───────────────────────────────
def record_seed(seed: int, tag: str, task: TaskKind, template_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tag}:{task.value}:{template_id}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def record_id(task: TaskKind, tag: str, variables: Sequence[str], template_id: str, seed: int) -> str:
    payload = json.dumps([task.value, tag, sorted(variables), template_id, seed])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# ───────────────────────── sampling ──────────────────────────────────
def sample_cells(ds: GridDataset, n: int, seed: int, strategy: str = "stratified") -> List[CellId]:
    """
    Pick up to `n` cells that have a region. "stratified" round-robins over
    regions so every region is represented before any repeats.
    """
    if strategy not in SAMPLING_STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    eligible = [c for c in ds.cells() if c in ds.regions]
    if n >= len(eligible):
        if n > len(eligible):
            log.warning("asked for %d cells, only %d available", n, len(eligible))
        return list(eligible)

    rng = np.random.default_rng(seed)
    if strategy == "random":
        picked = rng.choice(len(eligible), size=n, replace=False)
        return sorted(eligible[int(i)] for i in picked)

    groups = []
    for region in ds.distinct_regions():
        members = [c for c in eligible if ds.regions[c] == region]
        groups.append([members[int(i)] for i in rng.permutation(len(members))])
    picked: List[CellId] = []
    depth = 0
    while len(picked) < n:
        for group in groups:
            if depth < len(group) and len(picked) < n:
                picked.append(group[depth])
        depth += 1
    return sorted(picked)


# ───────────────────────── gate / build ──────────────────────────────
def gate_records(records: Sequence[QARecord], registry: VariableRegistry) -> List[str]:
    """Ids of records whose reference answer does not yield its own gold claims."""
    failed = []
    for rec in records:
        claims = extract_claims(rec.assistant, registry)
        bad = failing_components(rec.gold, claims, registry)
        if bad:
            log.error("gate: record %s (%s) fails on %s", rec.id, rec.template_id, ", ".join(bad))
            failed.append(rec.id)
    return failed


def build_records(
    ds: GridDataset,
    *,
    seed: int,
    cells: int,
    strategy: str = "stratified",
    variables: Optional[Sequence[str]] = None,
    catalog: Optional[TemplateCatalog] = None,
) -> List[QARecord]:
    """
    sampled cells × tasks × templates records, in that order. Raises
    GateFailure if any reference answer fails the self-consistency gate.
    """
    catalog = catalog or load_templates()
    keys = list(variables) if variables else ds.variables.keys()
    for k in keys:
        ds.variables.get(k)

    records: List[QARecord] = []
    for cell in sample_cells(ds, cells, seed, strategy):
        for task in TaskKind:
            for template in catalog.for_task(task):
                rseed = record_seed(seed, cell.tag, task, template.id)
                var = _pick(np.random.default_rng(rseed), keys)
                ctx = build_input_context(ds, cell, [var])
                question, answer, gold = instantiate_template(task, ctx, template.id, rseed, catalog)
                records.append(QARecord(
                    id=record_id(task, cell.tag, [var], template.id, seed),
                    task=task,
                    cell=cell.tag,
                    template_id=template.id,
                    user=question,
                    input=ctx,
                    assistant=answer,
                    gold=gold,
                ))

    failed = gate_records(records, ds.variables)
    if failed:
        raise GateFailure(failed)
    log.info("built %d records from %d template(s)", len(records), len(catalog.templates))
    return records
