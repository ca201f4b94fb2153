# core/scoring.py
"""
Answer scoring: the five-component rubric accuracy and embedding
similarity between a reference answer and a model answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import yaml

from core.errors import ZeroVector
from core.grid import fmt2
from core.parser import ExtractedClaims
from core.schema import AccuracyBreakdown, Extras, GoldClaims
from core.variables import PROJECT_ROOT, VariableRegistry
from llm.embeddings import Embedder, cosine

DEFAULT_RUBRIC_PATH = PROJECT_ROOT / "data" / "rubric.yaml"
COMPONENTS = ("cell", "variable", "units", "scenario", "values")


@dataclass(frozen=True)
class Rubric:
    version: int = 1
    exact_tolerance: Decimal = Decimal("0.005")
    partial_relative: Decimal = Decimal("0.02")
    partial_exact_share: Decimal = Decimal("0.5")


@lru_cache(maxsize=4)
def load_rubric(path: str | None = None) -> Rubric:
    doc = yaml.safe_load(Path(path or DEFAULT_RUBRIC_PATH).read_text(encoding="utf-8")) or {}
    return Rubric(
        version=int(doc.get("version", 1)),
        exact_tolerance=Decimal(str(doc.get("exact_tolerance", "0.005"))),
        partial_relative=Decimal(str(doc.get("partial_relative", "0.02"))),
        partial_exact_share=Decimal(str(doc.get("partial_exact_share", "0.5"))),
    )


# ───────────────────────── per-component rules ───────────────────────
def _score_cell(gold: GoldClaims, found: ExtractedClaims) -> float:
    gold_tags = set(gold.cell_tags)
    if found.cell_tags == gold_tags:
        return 1.0
    # same row or same column as a gold cell
    for f in found.cell_tags:
        for g in gold_tags:
            if f[1:4] == g[1:4] or f[5:8] == g[5:8]:
                return 0.5
    return 0.0


def _score_variable(gold: GoldClaims, found: ExtractedClaims, registry: VariableRegistry) -> float:
    missing = [v for v in gold.variables if v not in found.variables]
    if not missing:
        return 1.0
    found_families = set(found.families)
    found_families.update(registry.get(v).family for v in found.variables if v in registry)
    for key in missing:
        family = registry.get(key).family if key in registry else ""
        if not family or family not in found_families:
            return 0.0
    return 0.5


def _score_units(gold: GoldClaims, found: ExtractedClaims, registry: VariableRegistry,
                 rubric: Rubric) -> float:
    if not gold.units:
        # unitless variables: credit only an answer that states a gold value
        return 1.0 if any(_near(g.value, found, rubric) for g in gold.values) else 0.0
    missing = [u for u in gold.units if u not in found.units]
    if not missing:
        return 1.0
    found_dims = {registry.dimension_of(u) for u in found.units} - {None}
    if any(registry.dimension_of(u) in found_dims for u in missing):
        return 0.5
    return 0.0


def _score_scenario(gold: GoldClaims, found: ExtractedClaims) -> float:
    gold_set = set(gold.scenarios)
    if found.scenarios == gold_set:
        return 1.0
    if found.scenarios and found.scenarios < gold_set:
        return 0.5
    return 0.0


def _close(a: Decimal, b: Decimal, tol: Decimal) -> bool:
    return abs(a - b) <= tol


def _near(value: Decimal, found: ExtractedClaims, rubric: Rubric) -> bool:
    return any(abs(n - value) <= rubric.partial_relative * abs(value) or _close(n, value, rubric.exact_tolerance)
               for n, _unit in found.values)


def _score_values(gold: GoldClaims, found: ExtractedClaims, rubric: Rubric) -> float:
    if not gold.values:
        return 1.0
    numbers = [v for v, _unit in found.values]
    exact = 0
    near = 0
    for g in gold.values:
        if any(_close(n, g.value, rubric.exact_tolerance) for n in numbers):
            exact += 1
            near += 1
        elif any(abs(n - g.value) <= rubric.partial_relative * abs(g.value) for n in numbers):
            near += 1
    total = len(gold.values)
    if exact == total:
        return 1.0
    if near == total or Decimal(exact) >= rubric.partial_exact_share * total:
        return 0.5
    return 0.0


def score_component(
    component: str,
    gold: GoldClaims,
    found: ExtractedClaims,
    registry: VariableRegistry,
    rubric: Optional[Rubric] = None,
) -> float:
    rubric = rubric or load_rubric()
    if component == "cell":
        return _score_cell(gold, found)
    if component == "variable":
        return _score_variable(gold, found, registry)
    if component == "units":
        return _score_units(gold, found, registry, rubric)
    if component == "scenario":
        return _score_scenario(gold, found)
    if component == "values":
        return _score_values(gold, found, rubric)
    raise ValueError(f"unknown rubric component {component!r}")


def score_accuracy(
    gold: GoldClaims,
    found: ExtractedClaims,
    registry: VariableRegistry,
    rubric: Optional[Rubric] = None,
) -> AccuracyBreakdown:
    """Each component is 0, 0.5 or 1 and weighs 0.2, so overall is k/10."""
    parts = {c: score_component(c, gold, found, registry, rubric) for c in COMPONENTS}
    halves = int(round(sum(parts.values()) * 2))
    return AccuracyBreakdown(**parts, overall=halves / 10)


def covers(gold: GoldClaims, found: ExtractedClaims, registry: VariableRegistry,
           rubric: Optional[Rubric] = None) -> bool:
    return all(
        score_component(c, gold, found, registry, rubric) == 1.0 for c in COMPONENTS
    )


def failing_components(gold: GoldClaims, found: ExtractedClaims, registry: VariableRegistry,
                       rubric: Optional[Rubric] = None) -> List[str]:
    return [c for c in COMPONENTS if score_component(c, gold, found, registry, rubric) < 1.0]


def find_extras(gold: GoldClaims, found: ExtractedClaims, rubric: Optional[Rubric] = None) -> Extras:
    """Tags and values asserted by the answer that no gold claim backs."""
    rubric = rubric or load_rubric()
    tags = sorted(found.cell_tags - set(gold.cell_tags))
    values = [
        fmt2(v) for v, _unit in found.values
        if not any(_close(v, g.value, rubric.exact_tolerance) for g in gold.values)
    ]
    return Extras(cell_tags=tags, values=values)


# ───────────────────────── similarity ────────────────────────────────
def score_similarity(reference: str, candidate: str, embedder: Embedder) -> float:
    """
    Cosine of the two embeddings, rounded to 6 places.

    An empty candidate, or one that embeds to the zero vector, scores 0.0.
    """
    if not candidate or not candidate.strip():
        return 0.0
    ref_vec, cand_vec = embedder([reference, candidate])
    try:
        return round(cosine(ref_vec, cand_vec), 6)
    except ZeroVector:
        return 0.0


def mean(values: Iterable[float]) -> Optional[float]:
    items: Tuple[float, ...] = tuple(values)
    return sum(items) / len(items) if items else None
