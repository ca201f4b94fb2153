# qa_pipeline/core/ingest.py
"""
Tabular ingestion: grid tables (one row per cell tag, one column per
variable/period/scenario) and region maps (tag → state, county).

Rows that cannot be parsed are kept out of the dataset and reported as
(source line, reason) pairs on `GridDataset.issues`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
import yaml
from pydantic import BaseModel, field_validator, model_validator

from core.errors import EmptyTable, MalformedTag, MissingColumn, NotFound
from core.grid import (
    CellId, EntryKey, GridDataset, Measurement, Region, Scenario, TimePeriod, parse_cell_tag,
)
from core.variables import VariableRegistry

log = logging.getLogger("ingest")

Source = Union[str, Path, IO]
# first data row sits on line 2 (line 1 is the header)
_LINE_OFFSET = 2


# ───────────────────────── column mapping ────────────────────────────
class ColumnTarget(BaseModel):
    variable: str
    period: TimePeriod
    scenario: Optional[Scenario] = None

    @model_validator(mode="after")
    def _scenario_matches_period(self) -> "ColumnTarget":
        if self.period is TimePeriod.HISTORICAL and self.scenario is not None:
            raise ValueError("historical columns carry no scenario")
        if self.period.is_projection and self.scenario is None:
            raise ValueError(f"{self.period.value} columns need a scenario")
        return self


class ColumnMapping(BaseModel):
    tag_column: str = "Crossmodel"
    columns: Dict[str, ColumnTarget]

    @field_validator("columns")
    @classmethod
    def _unique_targets(cls, v: Dict[str, ColumnTarget]) -> Dict[str, ColumnTarget]:
        if not v:
            raise ValueError("column mapping lists no value columns")
        seen: Dict[Tuple, str] = {}
        for name, t in v.items():
            key = (t.variable, t.period, t.scenario)
            if key in seen:
                raise ValueError(f"columns {seen[key]!r} and {name!r} map to the same entry")
            seen[key] = name
        return v

    @model_validator(mode="after")
    def _tag_not_a_value(self) -> "ColumnMapping":
        if self.tag_column in self.columns:
            raise ValueError(f"tag column {self.tag_column!r} is also mapped as a value column")
        return self


def load_column_mapping(path: str | Path) -> ColumnMapping:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return ColumnMapping.model_validate(doc)


def _read_table(source: Source) -> pd.DataFrame:
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyTable("table has no header") from None
    df.columns = [str(c).strip() for c in df.columns]
    if df.empty:
        raise EmptyTable("table has a header but no data rows")
    return df


def _parse_value(text: str) -> Decimal:
    value = Decimal(text.strip().replace(",", ""))
    if not value.is_finite():
        raise InvalidOperation(text)
    return value


# ───────────────────────── grid table ────────────────────────────────
def load_grid_table(source: Source, mapping: ColumnMapping, registry: VariableRegistry) -> GridDataset:
    """
    Parse a grid table into a partial dataset (no regions yet).

    Raises EmptyTable, MissingColumn, or NotFound for a mapped variable
    the registry does not know.
    """
    df = _read_table(source)
    for col in [mapping.tag_column, *mapping.columns]:
        if col not in df.columns:
            raise MissingColumn(col)
    units = {t.variable: registry.get(t.variable).canonical_unit for t in mapping.columns.values()}

    entries: Dict[EntryKey, Measurement] = {}
    issues: List[Tuple[int, str]] = []
    for idx, row in enumerate(df.to_dict(orient="records")):
        line = idx + _LINE_OFFSET
        try:
            cell = parse_cell_tag(row[mapping.tag_column].strip())
        except MalformedTag as exc:
            issues.append((line, str(exc)))
            continue
        for col, target in mapping.columns.items():
            raw = row[col]
            if not raw.strip():
                issues.append((line, f"empty value in column {col!r}"))
                continue
            try:
                value = _parse_value(raw)
            except (InvalidOperation, ValueError):
                issues.append((line, f"non-numeric value {raw!r} in column {col!r}"))
                continue
            key = (cell, target.variable, target.period, target.scenario)
            if key in entries:
                log.warning("line %d: duplicate entry for %s/%s – keeping the later row",
                            line, cell.tag, col)
            entries[key] = Measurement(value, units[target.variable])

    if issues:
        log.warning("%d malformed row(s) in grid table", len(issues))
    return GridDataset(entries=entries, regions={}, variables=registry, issues=tuple(issues))


# ───────────────────────── region map ────────────────────────────────
@dataclass
class RegionMap:
    regions: Dict[CellId, Region] = field(default_factory=dict)
    malformed: List[Tuple[int, str]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


# header names accepted per role, matched case-insensitively
REGION_COLUMNS: Dict[str, Tuple[str, ...]] = {
    "tag": ("tag", "crossmodel"),
    "state": ("state",),
    "county": ("county",),
}


def _find_column(columns: Sequence[str], role: str, explicit: Optional[str]) -> Optional[str]:
    wanted = (explicit,) if explicit else REGION_COLUMNS[role]
    by_name = {c.lower(): c for c in columns}
    for name in wanted:
        if name.lower() in by_name:
            return by_name[name.lower()]
    return None


def load_region_map(
    source: Source,
    tag_column: Optional[str] = None,
    state_column: Optional[str] = None,
    county_column: Optional[str] = None,
) -> RegionMap:
    """
    tag → Region from a `tag,state,county` table (`Crossmodel` is accepted
    for the tag column). Duplicate tags resolve last-wins with a warning.
    """
    df = _read_table(source)
    tag_col = _find_column(df.columns, "tag", tag_column)
    if tag_col is None:
        raise MissingColumn(tag_column or "tag")
    state_col = _find_column(df.columns, "state", state_column)
    if state_col is None:
        raise MissingColumn(state_column or "state")
    county_col = _find_column(df.columns, "county", county_column)

    out = RegionMap()
    for idx, row in enumerate(df.to_dict(orient="records")):
        line = idx + _LINE_OFFSET
        try:
            cell = parse_cell_tag(row[tag_col].strip())
            county = row[county_col].strip() if county_col else ""
            region = Region(row[state_col].strip(), county or None)
        except (MalformedTag, ValueError) as exc:
            out.malformed.append((line, str(exc)))
            continue
        if cell in out.regions and out.regions[cell] != region:
            msg = f"line {line}: {cell.tag} reassigned from {out.regions[cell].label} to {region.label}"
            log.warning(msg)
            out.warnings.append(msg)
        out.regions[cell] = region
    return out


def attach_regions(ds: GridDataset, region_map: RegionMap) -> GridDataset:
    return GridDataset(
        entries=ds.entries,
        regions={**ds.regions, **region_map.regions},
        variables=ds.variables,
        issues=ds.issues + tuple(region_map.malformed),
    )


def merge_datasets(datasets: Sequence[GridDataset]) -> Tuple[GridDataset, List[str]]:
    """Union of several tables; conflicting entries resolve last-wins with a warning."""
    if not datasets:
        raise ValueError("nothing to merge")
    entries: Dict[EntryKey, Measurement] = {}
    regions: Dict[CellId, Region] = {}
    issues: List[Tuple[int, str]] = []
    warnings: List[str] = []
    for ds in datasets:
        for key, m in ds.entries.items():
            if key in entries and entries[key] != m:
                cell, var, period, scenario = key
                warnings.append(
                    f"{cell.tag}/{var}/{period.value}/{scenario.value if scenario else '-'}: "
                    f"{entries[key].value} replaced by {m.value}"
                )
            entries[key] = m
        for cell, region in ds.regions.items():
            if cell in regions and regions[cell] != region:
                warnings.append(f"{cell.tag}: region {regions[cell].label} replaced by {region.label}")
            regions[cell] = region
        issues.extend(ds.issues)
    for w in warnings:
        log.warning("merge: %s", w)
    merged = GridDataset(entries=entries, regions=regions,
                         variables=datasets[-1].variables, issues=tuple(issues))
    return merged, warnings


# ───────────────────────── validation ────────────────────────────────
@dataclass
class ValidationReport:
    cell_count: int
    entry_count: int
    missing_region_cells: List[str]
    malformed_rows: List[Tuple[int, str]]
    # cells lacking some variable/period/scenario combination (informational)
    incomplete_cells: List[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing_region_cells and not self.malformed_rows

    def summary(self) -> str:
        return (f"{self.cell_count} cells, {self.entry_count} entries, "
                f"{len(self.missing_region_cells)} without region, "
                f"{len(self.malformed_rows)} malformed")


def validate_dataset(ds: GridDataset) -> ValidationReport:
    """Row-level problems carry their source line; entry-level ones carry line 0."""
    malformed = list(ds.issues)
    for (cell, var, period, scenario), _m in ds:
        where = f"{cell.tag}/{var}/{period.value}"
        if period is TimePeriod.HISTORICAL and scenario is not None:
            malformed.append((0, f"{where}: historical entry carries scenario {scenario.value}"))
        elif period.is_projection and scenario is None:
            malformed.append((0, f"{where}: projection entry lacks a scenario"))
        if var not in ds.variables:
            malformed.append((0, f"{where}: variable not in registry"))

    entry_cells = sorted({key[0] for key in ds.entries})
    missing = [c.tag for c in entry_cells if c not in ds.regions]

    variables = sorted({key[1] for key in ds.entries})
    wanted = [(TimePeriod.HISTORICAL, None)] + [
        (p, s) for p in TimePeriod if p.is_projection for s in Scenario
    ]
    incomplete = [
        c.tag for c in entry_cells
        if any((c, v, p, s) not in ds.entries for v in variables for p, s in wanted)
    ]
    return ValidationReport(
        cell_count=len(entry_cells),
        entry_count=len(ds),
        missing_region_cells=missing,
        malformed_rows=malformed,
        incomplete_cells=incomplete,
    )
