# core/parser.py
"""
Free-text parsing of model replies.

* `extract_claims` pulls the five scored components (cell tags, variables,
  units, scenarios, values) out of a response using the versioned grammar
  in data/claim_patterns.yaml plus the variable registry.
* `parse_json_reply` / `tidy_json` repair the JSON a chat model returns
  when it is asked for a structured rewrite.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Pattern, Tuple

import yaml

from core.grid import Scenario, period_years
from core.variables import PROJECT_ROOT, VariableRegistry

DEFAULT_PATTERNS_PATH = PROJECT_ROOT / "data" / "claim_patterns.yaml"
_YEARS = period_years()
_WORD = re.compile(r"\S+")


@dataclass(frozen=True)
class ExtractedClaims:
    cell_tags: FrozenSet[str] = frozenset()
    variables: FrozenSet[str] = frozenset()
    units: FrozenSet[str] = frozenset()
    scenarios: FrozenSet[Scenario] = frozenset()
    values: Tuple[Tuple[Decimal, Optional[str]], ...] = ()
    # family words seen outside any full variable name ("temperature")
    families: FrozenSet[str] = frozenset()

    def is_empty(self) -> bool:
        return not (self.cell_tags or self.variables or self.units
                    or self.scenarios or self.values or self.families)


# ───────────────────────── grammar ───────────────────────────────────
@dataclass(frozen=True)
class ClaimGrammar:
    version: int
    cell_tag: Pattern
    year_range: Pattern
    scenarios: Tuple[Tuple[Tuple[Scenario, ...], Pattern], ...]
    number: Pattern
    unit_gap_tokens: int
    variable_names: Optional[Pattern] = None
    name_to_key: Dict[str, str] = field(default_factory=dict, compare=False)
    family_words: Optional[Pattern] = None
    units: Optional[Pattern] = None
    alias_to_unit: Dict[str, str] = field(default_factory=dict, compare=False)
    numeric_units: Optional[Pattern] = None
    numeric_alias_to_unit: Dict[str, str] = field(default_factory=dict, compare=False)


def _alternation(phrases: List[str]) -> str:
    # longest first so "degrees Fahrenheit" wins over "Fahrenheit"
    ordered = sorted(set(phrases), key=lambda p: (-len(p), p))
    return "|".join(re.escape(p).replace(r"\ ", r"\s+") for p in ordered)


@lru_cache(maxsize=8)
def load_grammar(registry: VariableRegistry, path: str | None = None) -> ClaimGrammar:
    doc = yaml.safe_load(Path(path or DEFAULT_PATTERNS_PATH).read_text(encoding="utf-8"))

    scenario_rules = []
    label_map = {"both": (Scenario.RCP45, Scenario.RCP85),
                 "rcp45": (Scenario.RCP45,), "rcp85": (Scenario.RCP85,)}
    # pair patterns must run before the single-scenario ones
    for label in ("both", "rcp45", "rcp85"):
        for pat in doc["scenarios"].get(label, []):
            scenario_rules.append((label_map[label], re.compile(pat, re.IGNORECASE)))

    name_to_key: Dict[str, str] = {}
    for var in registry.variables:
        for name in var.names:
            name_to_key[name.lower()] = var.key
    families = sorted({v.family for v in registry.variables if v.family})

    alias_to_unit: Dict[str, str] = {}
    numeric_alias_to_unit: Dict[str, str] = {}
    for unit in registry.units:
        for alias in unit.aliases | {unit.symbol}:
            if alias not in unit.numeric_only:
                alias_to_unit[alias.lower()] = unit.symbol
        for alias in unit.numeric_only:
            numeric_alias_to_unit[alias] = unit.symbol

    return ClaimGrammar(
        version=int(doc.get("version", 1)),
        cell_tag=re.compile(doc["cell_tag"]),
        year_range=re.compile(doc["year_range"], re.IGNORECASE),
        scenarios=tuple(scenario_rules),
        number=re.compile(doc["number"]),
        unit_gap_tokens=int(doc.get("unit_gap_tokens", 1)),
        variable_names=re.compile(
            rf"(?<![\w-])(?:{_alternation(list(name_to_key))})(?![\w-])", re.IGNORECASE
        ) if name_to_key else None,
        name_to_key=name_to_key,
        family_words=re.compile(
            rf"\b({'|'.join(map(re.escape, families))})s?\b", re.IGNORECASE
        ) if families else None,
        units=re.compile(
            rf"(?<![A-Za-z])(?:{_alternation(list(alias_to_unit))})(?![A-Za-z])", re.IGNORECASE
        ) if alias_to_unit else None,
        alias_to_unit=alias_to_unit,
        numeric_units=re.compile(
            rf"\s?({_alternation(list(numeric_alias_to_unit))})(?![A-Za-z])"
        ) if numeric_alias_to_unit else None,
        numeric_alias_to_unit=numeric_alias_to_unit,
    )


# ───────────────────────── extraction ────────────────────────────────
def _mask(text: str, start: int, end: int) -> str:
    return text[:start] + " " * (end - start) + text[end:]


def _to_decimal(literal: str) -> Optional[Decimal]:
    cleaned = literal.replace(",", "").replace("−", "-")
    try:
        return Decimal(cleaned)
    except InvalidOperation:
        return None


def _normalise_space(alias: str) -> str:
    return re.sub(r"\s+", " ", alias.strip()).lower()


def extract_claims(
    text: str,
    registry: VariableRegistry,
    grammar: ClaimGrammar | None = None,
) -> ExtractedClaims:
    """
    Pull claim components out of `text`.

    Tags, year ranges and scenario mentions are masked before values are
    read, so neither tag digits, period years nor "4.5"/"8.5" ever count
    as values.
    """
    if not text:
        return ExtractedClaims()
    g = grammar or load_grammar(registry)
    work = text

    # 1) cell tags
    tags = set()
    for m in g.cell_tag.finditer(work):
        tags.add(f"R{m.group(1)}C{m.group(2)}")
        work = _mask(work, m.start(), m.end())

    # 2) year ranges inside the known period spans
    for m in g.year_range.finditer(work):
        if int(m.group(1)) in _YEARS and int(m.group(2)) in _YEARS:
            work = _mask(work, m.start(), m.end())

    # 3) scenarios
    scenarios = set()
    for found, pattern in g.scenarios:
        for m in pattern.finditer(work):
            scenarios.update(found)
            work = _mask(work, m.start(), m.end())

    # 4) variables (full names), then family words in what is left
    variables = set()
    if g.variable_names is not None:
        for m in g.variable_names.finditer(work):
            variables.add(g.name_to_key[_normalise_space(m.group(0))])
            work = _mask(work, m.start(), m.end())
    families = set()
    if g.family_words is not None:
        families = {m.group(1).lower() for m in g.family_words.finditer(work)}

    # 5) units with unambiguous aliases
    unit_hits: List[Tuple[int, int, str]] = []
    if g.units is not None:
        for m in g.units.finditer(work):
            symbol = g.alias_to_unit[_normalise_space(m.group(0))]
            unit_hits.append((m.start(), m.end(), symbol))
    units = {symbol for _, _, symbol in unit_hits}

    # 6) values, each attached to a nearby unit when there is one
    values: List[Tuple[Decimal, Optional[str]]] = []
    numbers = list(g.number.finditer(work))
    for i, m in enumerate(numbers):
        literal = m.group(1)
        value = _to_decimal(literal)
        if value is None:
            continue
        if "." not in literal and value == value.to_integral_value() and int(value) in _YEARS:
            continue

        unit: Optional[str] = None
        if g.numeric_units is not None:
            nm = g.numeric_units.match(work, m.end())
            if nm:
                unit = g.numeric_alias_to_unit[nm.group(1)]
                units.add(unit)
        if unit is None:
            limit = numbers[i + 1].start() if i + 1 < len(numbers) else len(work)
            for start, _end, symbol in unit_hits:
                if m.end() <= start < limit:
                    gap = _WORD.findall(work[m.end():start])
                    if len(gap) <= g.unit_gap_tokens:
                        unit = symbol
                    break
        values.append((value, unit))

    return ExtractedClaims(
        cell_tags=frozenset(tags),
        variables=frozenset(variables),
        units=frozenset(units),
        scenarios=frozenset(scenarios),
        values=tuple(values),
        families=frozenset(families),
    )


# ───────────────────────── JSON replies ──────────────────────────────
_missing_comma = re.compile(r'(":[^,{}\[\]]+)\s+"')  # value "  "next_key
_fence = re.compile(r"^```(?:json)?\s*|\s*```$", re.MULTILINE)


def tidy_json(txt: str) -> str:
    """Common fixes: code fences, smart quotes, trailing / missing commas."""
    txt = _fence.sub("", txt.strip())
    txt = txt.replace("“", '"').replace("”", '"').replace("’", "'").replace("‘", "'")
    txt = re.sub(r",\s*}", "}", txt)
    txt = re.sub(r",\s*]", "]", txt)
    txt = _missing_comma.sub(r'\1, "', txt)
    return txt


def parse_json_reply(raw: str) -> Optional[dict]:
    """Strict parse, then tidy + parse, then the first {...} block. None if all fail."""
    for candidate in (raw, tidy_json(raw)):
        try:
            obj = json.loads(candidate)
            if isinstance(obj, dict):
                return obj
        except json.JSONDecodeError:
            pass
    start, end = raw.find("{"), raw.rfind("}")
    if start != -1 and end > start:
        try:
            obj = json.loads(tidy_json(raw[start:end + 1]))
            return obj if isinstance(obj, dict) else None
        except json.JSONDecodeError:
            return None
    return None
