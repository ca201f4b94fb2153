# core/grid.py
# ─────────────────────────────────────────────────────────────────────
"""
Grid model: cell-tag codec, value lookup, regional aggregation, trends,
scenario deltas and relative-position context.

Everything here is a pure function over an immutable GridDataset, so a
dataset can be shared freely between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from core.errors import EmptyRegion, MalformedTag, NotFound, ScenarioMismatch
from core.variables import VariableRegistry

TAG_MAX = 999
_TAG_RE = re.compile(r"^[Rr](\d{3})[Cc](\d{3})$")
CENT = Decimal("0.01")


# ───────────────────────── Domain types ──────────────────────────────
@dataclass(frozen=True, order=True)
class CellId:
    row: int
    col: int

    def __post_init__(self):
        if not (0 <= self.row <= TAG_MAX and 0 <= self.col <= TAG_MAX):
            raise ValueError(f"cell index out of range: row={self.row} col={self.col}")

    @property
    def tag(self) -> str:
        return format_cell_tag(self)

    def __str__(self) -> str:
        return self.tag


class TimePeriod(str, Enum):
    HISTORICAL = "historical"
    MID_CENTURY = "mid_century"
    END_CENTURY = "end_century"

    @property
    def span(self) -> Tuple[int, int]:
        return _SPANS[self]

    @property
    def is_projection(self) -> bool:
        return self is not TimePeriod.HISTORICAL

    @property
    def label(self) -> str:
        start, end = self.span
        name = {"historical": "historical", "mid_century": "mid-century",
                "end_century": "end-of-century"}[self.value]
        return f"{name} ({start}–{end})"


_SPANS = {
    TimePeriod.HISTORICAL: (1971, 2000),
    TimePeriod.MID_CENTURY: (2041, 2070),
    TimePeriod.END_CENTURY: (2071, 2100),
}
PROJECTION_PERIODS = (TimePeriod.MID_CENTURY, TimePeriod.END_CENTURY)


class Scenario(str, Enum):
    RCP45 = "rcp45"
    RCP85 = "rcp85"

    @property
    def label(self) -> str:
        return "RCP 4.5" if self is Scenario.RCP45 else "RCP 8.5"


BOTH_SCENARIOS = (Scenario.RCP45, Scenario.RCP85)


@dataclass(frozen=True)
class Measurement:
    value: Decimal
    unit: Optional[str]

    def __post_init__(self):
        if not isinstance(self.value, Decimal):
            object.__setattr__(self, "value", Decimal(str(self.value)))
        if not self.value.is_finite():
            raise ValueError(f"non-finite measurement: {self.value}")


@dataclass(frozen=True)
class Region:
    state: str
    county: Optional[str] = None

    def __post_init__(self):
        if not self.state or not self.state.strip():
            raise ValueError("region state must be non-empty")
        if self.county is not None and not self.county.strip():
            raise ValueError("region county, when present, must be non-empty")

    @property
    def label(self) -> str:
        return f"{self.county}, {self.state}" if self.county else self.state

    def contains(self, other: "Region") -> bool:
        """County query: state+county equality. State query: any county of the state."""
        if self.county is None:
            return other.state == self.state
        return other.state == self.state and other.county == self.county


EntryKey = Tuple[CellId, str, TimePeriod, Optional[Scenario]]


@dataclass(frozen=True)
class GridDataset:
    """
    Per-cell measurements plus region assignments.

    Construction does not enforce the dataset invariants: ingestion can
    produce partial datasets, and `validate_dataset` reports what is wrong.
    """

    entries: Mapping[EntryKey, Measurement]
    regions: Mapping[CellId, Region]
    variables: VariableRegistry
    # (source line, reason) pairs recorded while loading
    issues: Tuple[Tuple[int, str], ...] = ()
    _cells: Tuple[CellId, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "regions", MappingProxyType(dict(self.regions)))
        cells = {key[0] for key in self.entries} | set(self.regions)
        object.__setattr__(self, "_cells", tuple(sorted(cells)))

    def cells(self) -> Tuple[CellId, ...]:
        return self._cells

    def cells_in(self, region: Region) -> List[CellId]:
        return sorted(c for c, r in self.regions.items() if region.contains(r))

    def region_of(self, cell: CellId) -> Region:
        try:
            return self.regions[cell]
        except KeyError:
            raise NotFound(f"region for cell {cell.tag}") from None

    def distinct_regions(self) -> List[Region]:
        return sorted(set(self.regions.values()), key=lambda r: (r.state, r.county or ""))

    def __iter__(self) -> Iterator[Tuple[EntryKey, Measurement]]:
        return iter(sorted(self.entries.items(), key=lambda kv: _entry_sort_key(kv[0])))

    def __len__(self) -> int:
        return len(self.entries)


def _entry_sort_key(key: EntryKey):
    cell, var, period, scenario = key
    return (cell, var, list(TimePeriod).index(period), scenario.value if scenario else "")


@dataclass(frozen=True)
class AggregateStats:
    min: Decimal
    max: Decimal
    mean: Decimal
    count: int


class TrendDirection(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    MIXED = "mixed"
    FLAT = "flat"


@dataclass(frozen=True)
class TrendSummary:
    historical: Decimal
    mid: Decimal
    end: Decimal
    delta_hist_to_mid: Decimal
    delta_mid_to_end: Decimal
    direction: TrendDirection


@dataclass(frozen=True)
class RelativeContext:
    cell_value: Decimal
    region_stats: AggregateStats
    is_region_max: bool
    is_region_min: bool
    deviation_from_mean: Decimal


# ───────────────────────── Tag codec ─────────────────────────────────
def parse_cell_tag(text: str) -> CellId:
    m = _TAG_RE.match(text or "")
    if not m:
        raise MalformedTag(text)
    return CellId(int(m.group(1)), int(m.group(2)))


def format_cell_tag(cell: CellId) -> str:
    return f"R{cell.row:03d}C{cell.col:03d}"


# ───────────────────────── Lookups ───────────────────────────────────
def _check_scenario(period: TimePeriod, scenario: Optional[Scenario]) -> None:
    if period is TimePeriod.HISTORICAL and scenario is not None:
        raise ScenarioMismatch(f"historical values carry no scenario (got {scenario.value})")
    if period.is_projection and scenario is None:
        raise ScenarioMismatch(f"{period.value} projections need a scenario")


def lookup_value(
    ds: GridDataset,
    cell: CellId,
    var: str,
    period: TimePeriod,
    scenario: Optional[Scenario] = None,
) -> Measurement:
    _check_scenario(period, scenario)
    try:
        return ds.entries[(cell, var, period, scenario)]
    except KeyError:
        label = scenario.value if scenario else "-"
        raise NotFound(f"{cell.tag}/{var}/{period.value}/{label}") from None


def regional_aggregate(
    ds: GridDataset,
    region: Region,
    var: str,
    period: TimePeriod,
    scenario: Optional[Scenario] = None,
) -> AggregateStats:
    _check_scenario(period, scenario)
    values = [
        ds.entries[key].value
        for key in ((cell, var, period, scenario) for cell in ds.cells_in(region))
        if key in ds.entries
    ]
    if not values:
        raise EmptyRegion(f"no cells with {var}/{period.value} in {region.label}")
    return AggregateStats(
        min=min(values),
        max=max(values),
        mean=sum(values, Decimal(0)) / len(values),
        count=len(values),
    )


def relative_position(value: Decimal, stats: AggregateStats) -> RelativeContext:
    return RelativeContext(
        cell_value=value,
        region_stats=stats,
        is_region_max=value == stats.max,
        is_region_min=value == stats.min,
        deviation_from_mean=value - stats.mean,
    )


def trend_direction(d1: Decimal, d2: Decimal) -> TrendDirection:
    if d1 > 0 and d2 > 0:
        return TrendDirection.INCREASING
    if d1 < 0 and d2 < 0:
        return TrendDirection.DECREASING
    if d1 == 0 and d2 == 0:
        return TrendDirection.FLAT
    return TrendDirection.MIXED


def trend(ds: GridDataset, cell: CellId, var: str, scenario: Scenario) -> TrendSummary:
    hist = lookup_value(ds, cell, var, TimePeriod.HISTORICAL).value
    mid = lookup_value(ds, cell, var, TimePeriod.MID_CENTURY, scenario).value
    end = lookup_value(ds, cell, var, TimePeriod.END_CENTURY, scenario).value
    d1, d2 = mid - hist, end - mid
    return TrendSummary(hist, mid, end, d1, d2, trend_direction(d1, d2))


def scenario_delta(ds: GridDataset, cell: CellId, var: str, period: TimePeriod) -> Decimal:
    if not period.is_projection:
        raise ScenarioMismatch("scenario comparison needs a projection period")
    low = lookup_value(ds, cell, var, period, Scenario.RCP45).value
    high = lookup_value(ds, cell, var, period, Scenario.RCP85).value
    return high - low


# ───────────────────────── Rendering helpers ─────────────────────────
def round2(value: Decimal) -> Decimal:
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_UP)


def fmt2(value: Decimal, signed: bool = False) -> str:
    q = round2(value)
    if q == 0:
        q = abs(q)  # no "-0.00"
    text = f"{q:.2f}"
    if signed and q >= 0:
        text = "+" + text
    return text


def period_years() -> Dict[int, TimePeriod]:
    """Every year inside a known period span."""
    out: Dict[int, TimePeriod] = {}
    for period, (start, end) in _SPANS.items():
        for year in range(start, end + 1):
            out[year] = period
    return out
