import json
import math

from core.grid import TimePeriod
from core.prompting import assemble_prompt, estimate_tokens, serialize_context
from llm.prompt_templates import answer_system_prompt


def test_serialized_context_layout(records):
    rec = records[0]
    doc = json.loads(serialize_context(rec.input))
    assert doc["grid cell"] == rec.cell
    assert doc["region"]["state"] == rec.input.state
    assert len(doc["variables"]) == 1
    block = doc["variables"][0]
    assert list(block)[:2] == ["variable", "unit"]
    assert block["variable"] == rec.input.blocks[0].display_name
    assert TimePeriod.HISTORICAL.label in block
    mid = block[TimePeriod.MID_CENTURY.label]
    assert list(mid) == ["RCP 4.5", "RCP 8.5"]
    assert len(block["regional statistics"]) == 5
    assert set(next(iter(block["regional statistics"].values()))) == {"min", "max", "mean", "cells"}


def test_values_rendered_with_unit(temperature_records):
    doc = json.loads(serialize_context(temperature_records[0].input))
    block = doc["variables"][0]
    assert block["unit"] == "°F"
    hist = block[TimePeriod.HISTORICAL.label]
    number, unit = hist.split(" ")
    assert unit == "°F"
    assert len(number.split(".")[1]) == 2


def test_serialization_is_deterministic(records):
    for rec in records[:4]:
        assert serialize_context(rec.input) == serialize_context(rec.input.model_copy())


def test_assemble_prompt(records):
    rec = records[0]
    bundle = assemble_prompt(rec)
    assert bundle.system == answer_system_prompt
    assert bundle.user.endswith("\n\n" + rec.user)
    assert bundle.user.startswith(serialize_context(rec.input))
    assert bundle.token_estimate == estimate_tokens(bundle.system, bundle.user)
    assert not bundle.over_budget
    assert assemble_prompt(rec, budget_tokens=10).over_budget


def test_estimate_tokens():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens("ab", "cde") == math.ceil(5 / 4)
