# core/prompting.py
"""
Prompt assembly: the serialized input block and the (system, user) pair
sent to the model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from core.grid import TimePeriod, fmt2
from core.schema import InputContext, MeasurementModel, QARecord, StatsModel
from llm.prompt_templates import answer_system_prompt

DEFAULT_BUDGET_TOKENS = 2048
CHARS_PER_TOKEN = 4


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    token_estimate: int
    over_budget: bool


def _render(m: MeasurementModel) -> str:
    return f"{fmt2(m.value)} {m.unit}" if m.unit else fmt2(m.value)


def _render_stats(stats: StatsModel, unit: Optional[str]) -> dict:
    suffix = f" {unit}" if unit else ""
    return {
        "min": fmt2(stats.min) + suffix,
        "max": fmt2(stats.max) + suffix,
        "mean": fmt2(stats.mean) + suffix,
        "cells": stats.count,
    }


def serialize_context(ctx: InputContext) -> str:
    """
    Deterministic JSON text for the input block.

    Periods run historical → mid → end, RCP 4.5 before RCP 8.5, and every
    value is rendered with two decimals and its unit.
    """
    region = {"state": ctx.state}
    if ctx.county:
        region["county"] = ctx.county

    blocks = []
    for block in ctx.blocks:
        out: dict = {"variable": block.display_name, "unit": block.unit or "unitless"}
        if block.historical is not None:
            out[TimePeriod.HISTORICAL.label] = _render(block.historical)
        for period in (TimePeriod.MID_CENTURY, TimePeriod.END_CENTURY):
            rows = sorted(
                (p for p in block.projections if p.period is period),
                key=lambda p: p.scenario.value,
            )
            if rows:
                out[period.label] = {p.scenario.label: _render(p.measurement) for p in rows}
        if block.regional:
            regional = {}
            for r in sorted(block.regional, key=lambda r: (
                    list(TimePeriod).index(r.period), r.scenario.value if r.scenario else "")):
                label = r.period.label + (f", {r.scenario.label}" if r.scenario else "")
                regional[label] = _render_stats(r.stats, block.unit)
            out["regional statistics"] = regional
        blocks.append(out)

    doc = {"grid cell": ctx.cell, "region": region, "variables": blocks}
    return json.dumps(doc, ensure_ascii=False, indent=2)


def estimate_tokens(*texts: str) -> int:
    return math.ceil(sum(len(t) for t in texts) / CHARS_PER_TOKEN)


def assemble_prompt(record: QARecord, budget_tokens: int = DEFAULT_BUDGET_TOKENS) -> PromptBundle:
    system = answer_system_prompt
    user = f"{serialize_context(record.input)}\n\n{record.user}"
    estimate = estimate_tokens(system, user)
    return PromptBundle(system, user, estimate, estimate > budget_tokens)
