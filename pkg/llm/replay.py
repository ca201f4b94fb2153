# llm/replay.py
"""
Offline stand-ins for the live gateway.

* ReplayGateway answers chat requests from a recorded fixture
  (JSONL of {request_hash, response_text}); a miss is a protocol error.
* RecordingGateway wraps a live gateway and keeps every exchange so it
  can be written out as such a fixture.
* build_fixture produces fixtures from the reference answers themselves:
  "echo" replays them verbatim, "degraded" corrupts a share of them the
  way a weaker model tends to (wrong scenario, dropped units, drifted
  values).
"""

from __future__ import annotations

import json
import re
import threading
from decimal import Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from core.errors import GatewayError
from core.grid import BOTH_SCENARIOS, Scenario, fmt2
from core.parser import load_grammar
from core.prompting import DEFAULT_BUDGET_TOKENS, assemble_prompt
from core.schema import QARecord
from core.variables import VariableRegistry
from llm.embeddings import EmbeddingVector, lexical_embedder
from llm.gateway import ChatExchange, ChatHandle, request_hash

FIXTURE_STYLES = ("echo", "degraded")
_TWO_DP = re.compile(r"(?<![\w.])([+\-]?)(\d+\.\d{2})(?!\d)")


# ───────────────────────── fixture files ─────────────────────────────
def load_fixture(path: str | Path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out[row["request_hash"]] = row["response_text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad fixture line ({exc})") from exc
    return out


def write_fixture(path: str | Path, exchanges: Dict[str, str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, text in exchanges.items():
            fh.write(json.dumps({"request_hash": key, "response_text": text},
                                ensure_ascii=False) + "\n")
    return path


# ───────────────────────── gateways ──────────────────────────────────
class ReplayGateway:
    def __init__(self, fixtures: Dict[str, str], model_name: str, temperature: float = 0.0):
        self.fixtures = dict(fixtures)
        self.model_name = model_name
        self.temperature = temperature

    @classmethod
    def from_file(cls, path: str | Path, model_name: str, temperature: float = 0.0) -> "ReplayGateway":
        return cls(load_fixture(path), model_name, temperature)

    def chat_complete(self, system: str, user: str,
                      temperature: Optional[float] = None) -> ChatExchange:
        temp = self.temperature if temperature is None else temperature
        key = request_hash(self.model_name, system, user, temp)
        try:
            text = self.fixtures[key]
        except KeyError:
            raise GatewayError("protocol", f"no recorded exchange for request {key[:12]}") from None
        return ChatExchange(system, user, text, None, 0.0, 1, key)

    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        # recorded fixtures carry chat text only
        return lexical_embedder(texts)


class RecordingGateway:
    def __init__(self, inner: ChatHandle):
        self.inner = inner
        self.model_name = inner.model_name
        self.exchanges: Dict[str, str] = {}
        self._lock = threading.Lock()

    def chat_complete(self, system: str, user: str,
                      temperature: Optional[float] = None) -> ChatExchange:
        exchange = self.inner.chat_complete(system, user, temperature)
        with self._lock:
            self.exchanges[exchange.request_hash] = exchange.response
        return exchange

    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        return self.inner.embed(texts)

    def save(self, path: str | Path) -> Path:
        with self._lock:
            return write_fixture(path, dict(sorted(self.exchanges.items())))


# ───────────────────────── synthetic fixtures ────────────────────────
def _record_rng(seed: int, record_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, int(record_id[:8], 16)])


def degrade_response(
    text: str,
    gold_scenarios: Iterable[Scenario],
    registry: VariableRegistry,
    rng: np.random.Generator,
) -> str:
    """
    Corrupt a reference answer:
    scenario mentions collapse onto one (wrong or partial) scenario, unit
    mentions are dropped, and every two-decimal value drifts by 1–2 %.
    """
    g = load_grammar(registry)
    gold = set(gold_scenarios)
    target = Scenario.RCP85 if Scenario.RCP45 in gold else Scenario.RCP45

    out = text
    for _found, pattern in g.scenarios:
        out = pattern.sub(target.label, out)

    if g.numeric_units is not None:
        out = re.sub(r"(?<=\.\d\d)" + g.numeric_units.pattern, "", out)
    if g.units is not None:
        out = g.units.sub("", out)

    def _drift(m: re.Match) -> str:
        sign, literal = m.group(1), m.group(2)
        factor = Decimal(str(round(1 + float(rng.uniform(0.01, 0.02)), 4)))
        drifted = fmt2(Decimal(literal) * factor)
        return f"{sign}{drifted}"

    out = _TWO_DP.sub(_drift, out)
    return re.sub(r"[ \t]{2,}", " ", out).replace(" .", ".").replace(" ,", ",")


def build_fixture(
    records: Sequence[QARecord],
    model_name: str,
    registry: VariableRegistry,
    *,
    style: str = "echo",
    seed: int = 0,
    fraction: float = 0.6,
    temperature: float = 0.0,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
) -> Dict[str, str]:
    """request hash → response text, for every record's evaluation prompt."""
    if style not in FIXTURE_STYLES:
        raise ValueError(f"unknown fixture style {style!r} (expected one of {FIXTURE_STYLES})")

    degraded_ids = set()
    if style == "degraded" and records:
        n = min(len(records), max(1, int(Decimal(str(fraction * len(records)))
                                         .to_integral_value(rounding="ROUND_HALF_UP"))))
        order = np.random.default_rng(seed).permutation(len(records))
        degraded_ids = {records[int(i)].id for i in order[:n]}

    out: Dict[str, str] = {}
    for rec in records:
        prompt = assemble_prompt(rec, budget_tokens)
        key = request_hash(model_name, prompt.system, prompt.user, temperature)
        text = rec.assistant
        if rec.id in degraded_ids:
            scenarios = rec.gold.scenarios or list(BOTH_SCENARIOS)
            text = degrade_response(text, scenarios, registry, _record_rng(seed, rec.id))
        out[key] = text
    return out
