from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import EmptyRegion, MalformedTag, NotFound, ScenarioMismatch
from core.grid import (
    CellId, GridDataset, Measurement, Region, Scenario, TimePeriod, TrendDirection,
    fmt2, format_cell_tag, lookup_value, parse_cell_tag, regional_aggregate,
    relative_position, scenario_delta, trend, trend_direction,
)
from qa_pipeline.core.synthetic import generate_synthetic


# ───────────────────────── tag codec ─────────────────────────────────
@given(st.integers(0, 999), st.integers(0, 999))
def test_tag_round_trip(row, col):
    cell = CellId(row, col)
    tag = format_cell_tag(cell)
    assert len(tag) == 8
    assert parse_cell_tag(tag) == cell
    assert parse_cell_tag(tag.lower()) == cell


@pytest.mark.parametrize("text", ["", "R1C2", "R0001C002", "X001C002", "R001-C002", "R001C00a", " R001C002"])
def test_malformed_tags(text):
    with pytest.raises(MalformedTag):
        parse_cell_tag(text)


def test_cell_out_of_range():
    with pytest.raises(ValueError):
        CellId(1000, 0)


# ───────────────────────── lookup ────────────────────────────────────
def test_lookup_matches_ledger(synth):
    ds, ledger = synth
    for (cell, var, period, scenario), value in ledger.items():
        assert lookup_value(ds, cell, var, period, scenario).value == value


def test_lookup_scenario_rules(dataset):
    cell = dataset.cells()[0]
    with pytest.raises(ScenarioMismatch):
        lookup_value(dataset, cell, "annual_temp_max", TimePeriod.HISTORICAL, Scenario.RCP45)
    with pytest.raises(ScenarioMismatch):
        lookup_value(dataset, cell, "annual_temp_max", TimePeriod.MID_CENTURY)


def test_lookup_missing(dataset):
    with pytest.raises(NotFound):
        lookup_value(dataset, CellId(99, 99), "annual_temp_max", TimePeriod.HISTORICAL)
    with pytest.raises(KeyError):
        lookup_value(dataset, dataset.cells()[0], "snowfall", TimePeriod.HISTORICAL)


def test_lookup_carries_unit(dataset):
    cell = dataset.cells()[0]
    assert lookup_value(dataset, cell, "annual_temp_max", TimePeriod.HISTORICAL).unit == "°F"
    assert lookup_value(dataset, cell, "fire_weather_index", TimePeriod.HISTORICAL).unit is None


# ───────────────────────── aggregation ───────────────────────────────
def test_regional_aggregate_matches_brute_force(registry):
    ds, ledger = generate_synthetic(5, 10, 10, registry, regions=4)
    rng = np.random.default_rng(0)
    regions = ds.distinct_regions()
    slots = [(TimePeriod.HISTORICAL, None)] + [
        (p, s) for p in (TimePeriod.MID_CENTURY, TimePeriod.END_CENTURY) for s in Scenario
    ]
    keys = registry.keys()
    for _ in range(100):
        region = regions[int(rng.integers(len(regions)))]
        var = keys[int(rng.integers(len(keys)))]
        period, scenario = slots[int(rng.integers(len(slots)))]
        expected = [
            value for (cell, v, p, s), value in ledger.items()
            if v == var and p is period and s == scenario and ds.regions[cell] == region
        ]
        stats = regional_aggregate(ds, region, var, period, scenario)
        assert stats.count == len(expected)
        assert stats.min == min(expected)
        assert stats.max == max(expected)
        assert stats.mean == sum(expected, Decimal(0)) / len(expected)
        assert stats.min <= stats.mean <= stats.max


def test_regions_partition_cells(dataset):
    covered = [c for r in dataset.distinct_regions() for c in dataset.cells_in(r)]
    assert sorted(covered) == list(dataset.cells())


def test_empty_region(dataset):
    with pytest.raises(EmptyRegion):
        regional_aggregate(dataset, Region("Atlantis"), "annual_temp_max", TimePeriod.HISTORICAL)


def test_state_region_covers_counties(registry):
    cells = {CellId(1, 1): Region("Ohio", "Franklin"), CellId(1, 2): Region("Ohio", "Lane"),
             CellId(1, 3): Region("Texas", "Travis")}
    entries = {
        (cell, "wind_speed", TimePeriod.HISTORICAL, None): Measurement(Decimal(v), "mph")
        for cell, v in zip(cells, ("10.00", "14.00", "30.00"))
    }
    ds = GridDataset(entries=entries, regions=cells, variables=registry)
    state = regional_aggregate(ds, Region("Ohio"), "wind_speed", TimePeriod.HISTORICAL)
    assert (state.count, state.min, state.max, state.mean) == (2, Decimal("10.00"), Decimal("14.00"), Decimal("12"))
    county = regional_aggregate(ds, Region("Ohio", "Lane"), "wind_speed", TimePeriod.HISTORICAL)
    assert county.count == 1

    ctx = relative_position(Decimal("14.00"), state)
    assert ctx.is_region_max and not ctx.is_region_min
    assert ctx.deviation_from_mean == Decimal("2")


# ───────────────────────── trend / scenario ──────────────────────────
@pytest.mark.parametrize("d1, d2, expected", [
    ("1", "2", TrendDirection.INCREASING),
    ("-1", "-0.5", TrendDirection.DECREASING),
    ("0", "0", TrendDirection.FLAT),
    ("1", "-1", TrendDirection.MIXED),
    ("0", "1", TrendDirection.MIXED),
    ("-2", "0", TrendDirection.MIXED),
])
def test_trend_direction(d1, d2, expected):
    assert trend_direction(Decimal(d1), Decimal(d2)) is expected


def test_trend_deltas(synth):
    ds, ledger = synth
    cell = ds.cells()[0]
    t = trend(ds, cell, "annual_precip", Scenario.RCP85)
    hist = ledger[(cell, "annual_precip", TimePeriod.HISTORICAL, None)]
    mid = ledger[(cell, "annual_precip", TimePeriod.MID_CENTURY, Scenario.RCP85)]
    end = ledger[(cell, "annual_precip", TimePeriod.END_CENTURY, Scenario.RCP85)]
    assert (t.historical, t.mid, t.end) == (hist, mid, end)
    assert t.delta_hist_to_mid == mid - hist
    assert t.delta_mid_to_end == end - mid
    assert t.direction is trend_direction(mid - hist, end - mid)


def test_scenario_delta_is_bump(dataset, registry):
    for cell in dataset.cells():
        for var in registry.variables:
            bump = Decimal(str(var.scenario_bump))
            assert scenario_delta(dataset, cell, var.key, TimePeriod.MID_CENTURY) == bump
            assert scenario_delta(dataset, cell, var.key, TimePeriod.END_CENTURY) == 2 * bump


def test_scenario_delta_needs_projection(dataset):
    with pytest.raises(ScenarioMismatch):
        scenario_delta(dataset, dataset.cells()[0], "wind_speed", TimePeriod.HISTORICAL)


# ───────────────────────── rendering ─────────────────────────────────
@pytest.mark.parametrize("value, signed, expected", [
    ("1.005", False, "1.01"),
    ("2.5", False, "2.50"),
    ("-0.001", False, "0.00"),
    ("-0.004", True, "+0.00"),
    ("1.25", True, "+1.25"),
    ("-1.255", True, "-1.26"),
    ("100", False, "100.00"),
])
def test_fmt2(value, signed, expected):
    assert fmt2(Decimal(value), signed=signed) == expected


def test_period_labels():
    assert TimePeriod.MID_CENTURY.label == "mid-century (2041–2070)"
    assert TimePeriod.HISTORICAL.span == (1971, 2000)
    assert Scenario.RCP85.label == "RCP 8.5"
