# qa_pipeline/core/synthetic.py
"""
Seeded synthetic grid datasets with a gold ledger of every inserted value.

The same (seed, rows, cols, registry, regions) always yields the same
dataset and ledger, and the files written from them are byte-identical.
"""

from __future__ import annotations

import json
from decimal import Decimal
from itertools import product
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import yaml

from core.grid import (
    CENT, TAG_MAX, CellId, EntryKey, GridDataset, Measurement, Region, Scenario, TimePeriod,
)
from core.variables import VariableRegistry
from qa_pipeline.core.ingest import ColumnMapping, ColumnTarget

GoldLedger = Dict[EntryKey, Decimal]

# real (state, county) pairs; names must stay digit-free and must not
# collide with variable, unit or scenario vocabulary
_REGION_NAMES: List[Tuple[str, str]] = [
    ("Illinois", "Cook"), ("Texas", "Travis"), ("California", "Fresno"),
    ("Arizona", "Maricopa"), ("Colorado", "Boulder"), ("Georgia", "Fulton"),
    ("Ohio", "Franklin"), ("Oregon", "Lane"), ("Montana", "Gallatin"),
    ("Nevada", "Washoe"), ("Utah", "Cache"), ("Idaho", "Ada"),
    ("Kansas", "Sedgwick"), ("Iowa", "Polk"), ("Maine", "Penobscot"),
    ("Vermont", "Chittenden"),
]
_SUFFIXES = ["North", "South", "East", "West", "Upper", "Lower"]


def region_names(count: int) -> List[Region]:
    if count < 1:
        raise ValueError("need at least one region")
    names = [Region(state, county) for state, county in _REGION_NAMES]
    for suffix in _SUFFIXES:
        if len(names) >= count:
            break
        names += [Region(state, f"{county} {suffix}") for state, county in _REGION_NAMES]
    if count > len(names):
        raise ValueError(f"at most {len(names)} synthetic regions are available")
    return names[:count]


def _q(x: float) -> Decimal:
    return Decimal(f"{x:.2f}")


def generate_synthetic(
    seed: int,
    rows: int,
    cols: int,
    registry: VariableRegistry,
    regions: int = 1,
) -> Tuple[GridDataset, GoldLedger]:
    """
    rows × cols cells, every registry variable for every period, both
    scenarios for projections. RCP 8.5 sits at RCP 4.5 plus the variable's
    scenario bump (twice the bump at end of century).
    """
    if not (1 <= rows <= TAG_MAX and 1 <= cols <= TAG_MAX):
        raise ValueError(f"grid size {rows}x{cols} outside 1..{TAG_MAX}")
    if not 1 <= regions <= rows * cols:
        raise ValueError(f"regions must lie in 1..{rows * cols}")

    rng = np.random.default_rng(seed)
    cells = [CellId(r, c) for r, c in product(range(1, rows + 1), range(1, cols + 1))]

    # every region receives at least one cell
    names = region_names(regions)
    order = rng.permutation(len(cells))
    region_of = {cells[int(i)]: names[pos % regions] for pos, i in enumerate(order)}

    entries: Dict[EntryKey, Measurement] = {}
    for cell in cells:
        for var in registry.variables:
            lo, hi = var.synthetic_range
            step = (hi - lo) * 0.05
            hist = _q(rng.uniform(lo, hi))
            mid45 = hist + _q(rng.uniform(-step, 2 * step))
            end45 = mid45 + _q(rng.uniform(-step, 2 * step))
            bump = Decimal(str(var.scenario_bump)).quantize(CENT)
            values = {
                (TimePeriod.HISTORICAL, None): hist,
                (TimePeriod.MID_CENTURY, Scenario.RCP45): mid45,
                (TimePeriod.MID_CENTURY, Scenario.RCP85): mid45 + bump,
                (TimePeriod.END_CENTURY, Scenario.RCP45): end45,
                (TimePeriod.END_CENTURY, Scenario.RCP85): end45 + 2 * bump,
            }
            for (period, scenario), value in values.items():
                entries[(cell, var.key, period, scenario)] = Measurement(value, var.canonical_unit)

    ds = GridDataset(entries=entries, regions=region_of, variables=registry)
    ledger: GoldLedger = {key: m.value for key, m in entries.items()}
    return ds, ledger


# ───────────────────────── writers ───────────────────────────────────
def column_name(var: str, period: TimePeriod, scenario: Scenario | None) -> str:
    return f"{var}_{period.value}" + (f"_{scenario.value}" if scenario else "")


def _slots(registry: VariableRegistry):
    for var in registry.keys():
        yield var, TimePeriod.HISTORICAL, None
        for period in (TimePeriod.MID_CENTURY, TimePeriod.END_CENTURY):
            for scenario in Scenario:
                yield var, period, scenario


def synthetic_column_mapping(registry: VariableRegistry, tag_column: str = "Crossmodel") -> ColumnMapping:
    return ColumnMapping(
        tag_column=tag_column,
        columns={
            column_name(v, p, s): ColumnTarget(variable=v, period=p, scenario=s)
            for v, p, s in _slots(registry)
        },
    )


def write_grid_csv(ds: GridDataset, path: str | Path, tag_column: str = "Crossmodel") -> Path:
    rows = []
    for cell in ds.cells():
        row = {tag_column: cell.tag}
        for v, p, s in _slots(ds.variables):
            m = ds.entries.get((cell, v, p, s))
            row[column_name(v, p, s)] = str(m.value) if m else ""
        rows.append(row)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, lineterminator="\n")
    return path


def write_region_csv(ds: GridDataset, path: str | Path) -> Path:
    rows = [
        {"tag": cell.tag, "state": r.state, "county": r.county or ""}
        for cell, r in sorted(ds.regions.items())
    ]
    path = Path(path)
    pd.DataFrame(rows, columns=["tag", "state", "county"]).to_csv(
        path, index=False, lineterminator="\n")
    return path


def write_column_mapping(mapping: ColumnMapping, path: str | Path) -> Path:
    doc = mapping.model_dump(mode="json", exclude_none=True)
    path = Path(path)
    path.write_text(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path


def write_ledger(ledger: GoldLedger, path: str | Path) -> Path:
    path = Path(path)
    items = sorted(
        ledger.items(),
        key=lambda kv: (kv[0][0], kv[0][1], list(TimePeriod).index(kv[0][2]),
                        kv[0][3].value if kv[0][3] else ""),
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (cell, var, period, scenario), value in items:
            fh.write(json.dumps({
                "cell": cell.tag,
                "variable": var,
                "period": period.value,
                "scenario": scenario.value if scenario else None,
                "value": str(value),
            }) + "\n")
    return path
