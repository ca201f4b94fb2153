# core/variables.py
"""
Variable and unit registry.

The registry is a data document (data/variables.yaml by default) so that the
variable set, display names, synonyms and unit aliases can be swapped without
code changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import yaml

from core.errors import NotFound

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_REGISTRY_PATH = PROJECT_ROOT / "data" / "variables.yaml"


@dataclass(frozen=True)
class UnitSpec:
    symbol: str
    dimension: str
    aliases: FrozenSet[str]
    # aliases that only count when they directly follow a number
    numeric_only: FrozenSet[str] = frozenset()

    @property
    def all_aliases(self) -> FrozenSet[str]:
        return self.aliases | self.numeric_only | {self.symbol}


@dataclass(frozen=True)
class Variable:
    key: str
    display_name: str
    canonical_unit: Optional[str]
    synonyms: FrozenSet[str]
    unit_aliases: FrozenSet[str]
    family: str = ""
    synthetic_range: Tuple[float, float] = (0.0, 100.0)
    scenario_bump: float = 0.0

    def __post_init__(self):
        if self.canonical_unit is not None and self.canonical_unit not in self.unit_aliases:
            raise ValueError(
                f"{self.key}: canonical unit {self.canonical_unit!r} not among its aliases"
            )

    @property
    def names(self) -> FrozenSet[str]:
        """Display name plus synonyms: every phrase that names this variable."""
        return self.synonyms | {self.display_name}


@dataclass(frozen=True)
class VariableRegistry:
    variables: Tuple[Variable, ...]
    units: Tuple[UnitSpec, ...]
    version: int = 1
    _by_key: Dict[str, Variable] = field(default_factory=dict, compare=False, repr=False)
    _units: Dict[str, UnitSpec] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for var in self.variables:
            if var.key in self._by_key:
                raise ValueError(f"duplicate variable key {var.key!r}")
            self._by_key[var.key] = var
        for unit in self.units:
            self._units[unit.symbol] = unit

    # ── lookups ─────────────────────────────────────────────────────────
    def get(self, key: str) -> Variable:
        try:
            return self._by_key[key]
        except KeyError:
            raise NotFound(f"variable {key!r}") from None

    def __contains__(self, key: str) -> bool:
        return key in self._by_key

    def keys(self) -> List[str]:
        return [v.key for v in self.variables]

    def unit(self, symbol: str) -> UnitSpec:
        try:
            return self._units[symbol]
        except KeyError:
            raise NotFound(f"unit {symbol!r}") from None

    def is_unit(self, symbol: str) -> bool:
        return symbol in self._units or any(symbol in u.all_aliases for u in self.units)

    def dimension_of(self, symbol: str) -> Optional[str]:
        spec = self._units.get(symbol)
        return spec.dimension if spec else None

    def families(self) -> Dict[str, List[str]]:
        """family word → variable keys"""
        out: Dict[str, List[str]] = {}
        for var in self.variables:
            if var.family:
                out.setdefault(var.family, []).append(var.key)
        return out


def _build_registry(doc: dict) -> VariableRegistry:
    units = tuple(
        UnitSpec(
            symbol=u["symbol"],
            dimension=u["dimension"],
            aliases=frozenset(u.get("aliases", [])),
            numeric_only=frozenset(u.get("numeric_only", [])),
        )
        for u in doc.get("units", [])
    )
    by_symbol = {u.symbol: u for u in units}

    variables = []
    for v in doc.get("variables", []):
        unit_symbol = v.get("canonical_unit")
        if unit_symbol is not None and unit_symbol not in by_symbol:
            raise ValueError(f"{v['key']}: unit {unit_symbol!r} is not registered")
        aliases = by_symbol[unit_symbol].all_aliases if unit_symbol else frozenset()
        lo, hi = v.get("synthetic_range", [0.0, 100.0])
        variables.append(
            Variable(
                key=v["key"],
                display_name=v["display_name"],
                canonical_unit=unit_symbol,
                synonyms=frozenset(v.get("synonyms", [])),
                unit_aliases=aliases,
                family=v.get("family", ""),
                synthetic_range=(float(lo), float(hi)),
                scenario_bump=float(v.get("scenario_bump", 0.0)),
            )
        )
    return VariableRegistry(
        variables=tuple(variables), units=units, version=int(doc.get("version", 1))
    )


def load_registry(path: str | Path | None = None) -> VariableRegistry:
    path = Path(path) if path else DEFAULT_REGISTRY_PATH
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    return _build_registry(doc)


@lru_cache(maxsize=1)
def default_registry() -> VariableRegistry:
    return load_registry(DEFAULT_REGISTRY_PATH)


def restrict(registry: VariableRegistry, keys: Iterable[str]) -> VariableRegistry:
    """Sub-registry holding only `keys` (units are kept whole)."""
    wanted = list(keys)
    return VariableRegistry(
        variables=tuple(registry.get(k) for k in wanted),
        units=registry.units,
        version=registry.version,
    )
