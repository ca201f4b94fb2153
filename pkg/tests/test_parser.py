from decimal import Decimal
from pathlib import Path

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from core.grid import Scenario, fmt2
from core.parser import extract_claims, load_grammar, parse_json_reply, tidy_json

CORPUS_PATH = Path(__file__).parent / "data" / "claims_corpus.yaml"
CORPUS = yaml.safe_load(CORPUS_PATH.read_text(encoding="utf-8"))


@pytest.mark.parametrize("case", CORPUS, ids=[c["text"][:40] for c in CORPUS])
def test_claims_corpus(case, registry):
    found = extract_claims(case["text"], registry)
    assert found.cell_tags == set(case.get("cell_tags", []))
    assert found.variables == set(case.get("variables", []))
    assert found.units == set(case.get("units", []))
    assert found.scenarios == {Scenario(s) for s in case.get("scenarios", [])}
    assert list(found.values) == [(Decimal(lit), unit) for lit, unit in case.get("values", [])]
    assert found.families == set(case.get("families", []))


def test_corpus_is_large_enough():
    assert len(CORPUS) >= 40


@given(st.decimals(min_value=-999, max_value=9999, places=2, allow_nan=False, allow_infinity=False))
def test_rendered_value_comes_back(registry, value):
    text = f"The wind speed reaches {fmt2(value)} mph under RCP 8.5."
    found = extract_claims(text, registry)
    assert found.values == ((Decimal(fmt2(value)), "mph"),)
    assert found.scenarios == {Scenario.RCP85}


@given(st.integers(0, 999), st.integers(0, 999))
def test_tag_digits_never_become_values(registry, row, col):
    found = extract_claims(f"Cell R{row:03d}C{col:03d} is in Ohio.", registry)
    assert found.values == ()
    assert found.cell_tags == {f"R{row:03d}C{col:03d}"}


def test_period_years_are_masked(registry):
    found = extract_claims("Between 2041–2070 and 2071-2100 it stays 12.00 mph.", registry)
    assert [v for v, _ in found.values] == [Decimal("12.00")]


def test_empty_text(registry):
    assert extract_claims("", registry).is_empty()


def test_grammar_is_cached(registry):
    assert load_grammar(registry) is load_grammar(registry)
    assert load_grammar(registry).version == 1


# ───────────────────────── JSON replies ──────────────────────────────
def test_tidy_json_repairs():
    raw = '```json\n{“question”: “Why?”, "answer": "Because",}\n```'
    assert parse_json_reply(raw) == {"question": "Why?", "answer": "Because"}
    assert tidy_json('{"a": [1, 2,]}') == '{"a": [1, 2]}'


def test_parse_json_embedded_block():
    raw = 'Sure! Here it is: {"question": "Q", "answer": "A"} Hope that helps.'
    assert parse_json_reply(raw) == {"question": "Q", "answer": "A"}


@pytest.mark.parametrize("raw", ["no json here", "[1, 2, 3]", "{broken"])
def test_parse_json_gives_up(raw):
    assert parse_json_reply(raw) is None
