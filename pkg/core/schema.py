# core/schema.py
"""
Serializable record and report models (pydantic).

Set-valued claim fields are stored as sorted lists so that JSON output is
byte-stable across runs.
"""

from __future__ import annotations

from decimal import Decimal
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.grid import CellId, Region, Scenario, TimePeriod, parse_cell_tag

SCHEMA_VERSION = "1"


class TaskKind(str, Enum):
    VARIABLE_RETRIEVAL = "variable_retrieval"
    TREND_ANALYSIS = "trend_analysis"
    SCENARIO_COMPARISON = "scenario_comparison"
    CONTEXTUAL_INTERPRETATION = "contextual_interpretation"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# ───────────────────────── input context ─────────────────────────────
class MeasurementModel(_Frozen):
    value: Decimal
    unit: Optional[str] = None


class StatsModel(_Frozen):
    min: Decimal
    max: Decimal
    mean: Decimal
    count: int = Field(ge=1)


class ProjectionEntry(_Frozen):
    period: TimePeriod
    scenario: Scenario
    measurement: MeasurementModel


class RegionalEntry(_Frozen):
    period: TimePeriod
    scenario: Optional[Scenario] = None
    stats: StatsModel


class VariableBlock(_Frozen):
    variable: str
    display_name: str
    unit: Optional[str] = None
    historical: Optional[MeasurementModel] = None
    projections: List[ProjectionEntry] = []
    regional: List[RegionalEntry] = []

    def projection(self, period: TimePeriod, scenario: Scenario) -> MeasurementModel:
        for p in self.projections:
            if p.period is period and p.scenario is scenario:
                return p.measurement
        raise KeyError(f"{self.variable}/{period.value}/{scenario.value}")

    def regional_stats(self, period: TimePeriod, scenario: Optional[Scenario]) -> StatsModel:
        for r in self.regional:
            if r.period is period and r.scenario == scenario:
                return r.stats
        raise KeyError(f"regional {self.variable}/{period.value}")

    def periods(self) -> List[TimePeriod]:
        found = {p.period for p in self.projections}
        if self.historical is not None:
            found.add(TimePeriod.HISTORICAL)
        return [p for p in TimePeriod if p in found]


class InputContext(_Frozen):
    cell: str
    state: str
    county: Optional[str] = None
    blocks: List[VariableBlock]

    @property
    def cell_id(self) -> CellId:
        return parse_cell_tag(self.cell)

    @property
    def region(self) -> Region:
        return Region(self.state, self.county)

    def block(self, variable: str) -> VariableBlock:
        for b in self.blocks:
            if b.variable == variable:
                return b
        raise KeyError(variable)

    def variable_keys(self) -> List[str]:
        return [b.variable for b in self.blocks]


# ───────────────────────── gold claims / records ─────────────────────
class GoldValue(_Frozen):
    value: Decimal
    unit: Optional[str] = None


class GoldClaims(_Frozen):
    cell_tags: List[str]
    variables: List[str]
    units: List[str] = []
    scenarios: List[Scenario]
    values: List[GoldValue]

    @field_validator("cell_tags", "variables", "units")
    @classmethod
    def _sorted_unique(cls, v: List[str]) -> List[str]:
        return sorted(set(v))

    @field_validator("scenarios")
    @classmethod
    def _sorted_scenarios(cls, v: List[Scenario]) -> List[Scenario]:
        return sorted(set(v), key=lambda s: s.value)


class QARecord(_Frozen):
    id: str
    task: TaskKind
    cell: str
    template_id: str
    user: str
    input: InputContext
    assistant: str
    gold: GoldClaims
    paraphrased: bool = False


class TrainingExample(_Frozen):
    """user–input–assistant row for fine-tuning."""
    id: str
    user: str
    input: str
    assistant: str


# ───────────────────────── scoring / reports ─────────────────────────
class AccuracyBreakdown(_Frozen):
    cell: float
    variable: float
    units: float
    scenario: float
    values: float
    overall: float

    def components(self) -> Dict[str, float]:
        return {"cell": self.cell, "variable": self.variable, "units": self.units,
                "scenario": self.scenario, "values": self.values}


class Extras(_Frozen):
    cell_tags: List[str] = []
    values: List[str] = []


class RecordResult(_Frozen):
    record_id: str
    task: TaskKind
    similarity: Optional[float] = None
    accuracy: Optional[AccuracyBreakdown] = None
    response: Optional[str] = None
    error: Optional[str] = None
    extras: Extras = Extras()

    @property
    def ok(self) -> bool:
        return self.error is None


class TaskSummary(_Frozen):
    count: int
    mean_similarity: Optional[float] = None
    mean_accuracy: Optional[float] = None


class ReportManifest(_Frozen):
    config_hash: str = ""
    seed: Optional[int] = None
    embedder: str = "lexical"
    grammar_version: int = 1
    rubric_version: int = 1
    records_total: int = 0
    records_scored: int = 0
    records_failed: int = 0
    budget_warnings: List[str] = []


class EvaluationReport(_Frozen):
    schema_version: str = SCHEMA_VERSION
    model_name: str
    record_results: List[RecordResult]
    mean_similarity: float
    mean_accuracy: float
    component_means: Dict[str, float] = {}
    task_breakdown: Dict[str, TaskSummary] = {}
    manifest: ReportManifest = ReportManifest()
