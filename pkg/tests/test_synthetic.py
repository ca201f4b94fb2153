import re

import pytest

from core.grid import Scenario, TimePeriod
from qa_pipeline.core.synthetic import (
    generate_synthetic, region_names, write_grid_csv, write_ledger, write_region_csv,
)


def _files(tmp_path, registry, seed):
    ds, ledger = generate_synthetic(seed, 4, 4, registry, regions=3)
    out = tmp_path / str(seed)
    return [
        write_grid_csv(ds, out / "grid.csv").read_bytes(),
        write_region_csv(ds, out / "regions.csv").read_bytes(),
        write_ledger(ledger, out / "ledger.jsonl").read_bytes(),
    ]


def test_same_seed_same_bytes(tmp_path, registry):
    first = _files(tmp_path / "a", registry, 42)
    second = _files(tmp_path / "b", registry, 42)
    assert first == second


def test_seeds_differ(registry):
    a, _ = generate_synthetic(1, 3, 3, registry)
    b, _ = generate_synthetic(2, 3, 3, registry)
    assert dict(a.entries) != dict(b.entries)


def test_shape_and_ledger(synth, registry):
    ds, ledger = synth
    assert len(ds.cells()) == 9
    assert ds.cells()[0].tag == "R001C001"
    assert len(ds) == 9 * len(registry.keys()) * 5
    assert set(ledger) == set(ds.entries)
    assert all(ledger[key] == m.value for key, m in ds.entries.items())


def test_every_region_used(registry):
    ds, _ = generate_synthetic(9, 2, 3, registry, regions=6)
    assert len(ds.distinct_regions()) == 6
    for region in ds.distinct_regions():
        assert ds.cells_in(region)


def test_rcp85_at_or_above_rcp45(synth, registry):
    ds, _ = synth
    for cell in ds.cells():
        for var in registry.keys():
            for period in (TimePeriod.MID_CENTURY, TimePeriod.END_CENTURY):
                low = ds.entries[(cell, var, period, Scenario.RCP45)].value
                high = ds.entries[(cell, var, period, Scenario.RCP85)].value
                assert high >= low


def test_values_have_two_decimals(synth):
    ds, _ = synth
    assert all(m.value.as_tuple().exponent == -2 for _key, m in ds)


def test_region_names_are_digit_free():
    names = region_names(100)
    assert len(set(names)) == 100
    assert not any(re.search(r"\d", r.label) for r in names)


@pytest.mark.parametrize("rows, cols, regions", [(0, 3, 1), (3, 1000, 1), (2, 2, 5), (2, 2, 0)])
def test_invalid_sizes(registry, rows, cols, regions):
    with pytest.raises(ValueError):
        generate_synthetic(1, rows, cols, registry, regions=regions)
