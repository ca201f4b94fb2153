import io
from decimal import Decimal

import pytest
from pydantic import ValidationError

from core.errors import EmptyTable, MissingColumn, NotFound
from core.grid import CellId, Region, Scenario, TimePeriod, lookup_value
from qa_pipeline.core.ingest import (
    ColumnMapping, ColumnTarget, attach_regions, load_column_mapping, load_grid_table,
    load_region_map, merge_datasets, validate_dataset,
)
from qa_pipeline.core.synthetic import (
    synthetic_column_mapping, write_column_mapping, write_grid_csv, write_region_csv,
)

MAPPING = ColumnMapping(columns={
    "TMAX_hist": ColumnTarget(variable="annual_temp_max", period="historical"),
    "TMAX_mid45": ColumnTarget(variable="annual_temp_max", period="mid_century", scenario="rcp45"),
})


def _csv(text: str) -> io.StringIO:
    return io.StringIO(text)


def test_two_rows_four_entries(registry):
    ds = load_grid_table(_csv("Crossmodel,TMAX_hist,TMAX_mid45\nR001C001,95.10,97.20\nR001C002,96.00,98.35\n"),
                         MAPPING, registry)
    assert len(ds) == 4
    assert ds.issues == ()
    m = lookup_value(ds, CellId(1, 2), "annual_temp_max", TimePeriod.MID_CENTURY, Scenario.RCP45)
    assert m.value == Decimal("98.35")
    assert m.unit == "°F"


def test_header_only_is_empty(registry):
    with pytest.raises(EmptyTable):
        load_grid_table(_csv("Crossmodel,TMAX_hist,TMAX_mid45\n"), MAPPING, registry)
    with pytest.raises(EmptyTable):
        load_grid_table(_csv(""), MAPPING, registry)


def test_missing_column_named(registry):
    with pytest.raises(MissingColumn) as err:
        load_grid_table(_csv("Crossmodel,TMAX_hist\nR001C001,95.10\n"), MAPPING, registry)
    assert err.value.column == "TMAX_mid45"


def test_unknown_variable(registry):
    mapping = ColumnMapping(columns={"SNOW": ColumnTarget(variable="snowfall", period="historical")})
    with pytest.raises(NotFound):
        load_grid_table(_csv("Crossmodel,SNOW\nR001C001,1.0\n"), mapping, registry)


def test_bad_rows_are_reported(registry):
    text = ("Crossmodel,TMAX_hist,TMAX_mid45\n"
            "R001C001,95.10,97.20\n"
            "R1C1,95.00,96.00\n"
            "R001C002,hot,97.00\n"
            "R001C003,,97.00\n")
    ds = load_grid_table(_csv(text), MAPPING, registry)
    lines = [line for line, _ in ds.issues]
    assert lines == [3, 4, 5]
    assert "malformed cell tag" in ds.issues[0][1]
    assert "non-numeric" in ds.issues[1][1]
    assert "empty value" in ds.issues[2][1]
    # good columns of a bad row survive
    assert len(ds) == 2 + 1 + 1


def test_region_map_last_wins():
    text = "Crossmodel,State,County\nR001C001,Ohio,Franklin\nR001C001,Ohio,Lane\nbad,Ohio,Lane\nR001C002,Texas,\n"
    rm = load_region_map(_csv(text))
    assert rm.regions[CellId(1, 1)] == Region("Ohio", "Lane")
    assert rm.regions[CellId(1, 2)] == Region("Texas")
    assert len(rm.warnings) == 1
    assert [line for line, _ in rm.malformed] == [4]


def test_region_map_needs_state():
    with pytest.raises(MissingColumn) as err:
        load_region_map(_csv("Crossmodel,County\nR001C001,Cook\n"))
    assert err.value.column == "state"


@pytest.mark.parametrize("header", ["tag,state,county", "TAG,State,County", "Crossmodel,State,County"])
def test_region_map_headers(header):
    rm = load_region_map(_csv(f"{header}\nR073C493,Illinois,Cook\nR073C494,Illinois,\n"))
    assert rm.regions == {CellId(73, 493): Region("Illinois", "Cook"), CellId(73, 494): Region("Illinois")}
    assert rm.malformed == []


def test_region_map_explicit_columns():
    rm = load_region_map(_csv("cell_id,st\nR001C001,Ohio\n"), tag_column="cell_id", state_column="st")
    assert rm.regions == {CellId(1, 1): Region("Ohio")}
    with pytest.raises(MissingColumn):
        load_region_map(_csv("tag,state\nR001C001,Ohio\n"), tag_column="cell_id")


def test_validate_reports_missing_regions(registry):
    ds = load_grid_table(_csv("Crossmodel,TMAX_hist,TMAX_mid45\nR001C001,95.10,97.20\nR001C002,96.00,98.35\n"),
                         MAPPING, registry)
    report = validate_dataset(ds)
    assert report.missing_region_cells == ["R001C001", "R001C002"]
    assert not report.complete
    # only two of the five period/scenario slots are present
    assert report.incomplete_cells == ["R001C001", "R001C002"]

    rm = load_region_map(_csv("Crossmodel,State,County\nR001C001,Ohio,Lane\nR001C002,Ohio,Lane\n"))
    report = validate_dataset(attach_regions(ds, rm))
    assert report.complete
    assert report.cell_count == 2 and report.entry_count == 4
    assert "2 cells, 4 entries" in report.summary()


def test_merge_last_wins(registry):
    a = load_grid_table(_csv("Crossmodel,TMAX_hist,TMAX_mid45\nR001C001,95.10,97.20\n"), MAPPING, registry)
    b = load_grid_table(_csv("Crossmodel,TMAX_hist,TMAX_mid45\nR001C001,95.50,97.20\nR002C001,90.00,91.00\n"),
                        MAPPING, registry)
    merged, warnings = merge_datasets([a, b])
    assert len(merged) == 4
    assert len(warnings) == 1
    assert lookup_value(merged, CellId(1, 1), "annual_temp_max", TimePeriod.HISTORICAL).value == Decimal("95.50")


def test_mapping_validation():
    with pytest.raises(ValidationError):
        ColumnTarget(variable="wind_speed", period="historical", scenario="rcp45")
    with pytest.raises(ValidationError):
        ColumnTarget(variable="wind_speed", period="end_century")
    with pytest.raises(ValidationError):
        ColumnMapping(columns={
            "a": ColumnTarget(variable="wind_speed", period="historical"),
            "b": ColumnTarget(variable="wind_speed", period="historical"),
        })
    with pytest.raises(ValidationError):
        ColumnMapping(tag_column="a", columns={"a": ColumnTarget(variable="wind_speed", period="historical")})
    with pytest.raises(ValidationError):
        ColumnMapping(columns={})


def test_synthetic_files_load_back(tmp_path, synth, registry):
    ds, ledger = synth
    grid = write_grid_csv(ds, tmp_path / "grid.csv")
    regions = write_region_csv(ds, tmp_path / "regions.csv")
    assert regions.read_text(encoding="utf-8").splitlines()[0] == "tag,state,county"
    mapping_path = write_column_mapping(synthetic_column_mapping(registry), tmp_path / "mapping.yaml")

    mapping = load_column_mapping(mapping_path)
    loaded = attach_regions(load_grid_table(grid, mapping, registry), load_region_map(regions))
    assert dict(loaded.entries) == dict(ds.entries)
    assert dict(loaded.regions) == dict(ds.regions)
    assert validate_dataset(loaded).complete
    assert validate_dataset(loaded).incomplete_cells == []
    assert len(loaded) == len(ledger)
