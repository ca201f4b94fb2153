# qa_pipeline/core/paraphrase.py
"""
Optional LLM rewording of question/answer pairs.

A rewrite is kept only when its answer still carries every gold claim
and its question names the same cell tags and scenarios as before;
otherwise the original record stands and the rejection is reported.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from tqdm import tqdm

from core.errors import GatewayError
from core.parser import extract_claims, parse_json_reply
from core.schema import QARecord
from core.scoring import failing_components
from core.variables import VariableRegistry
from llm.gateway import ChatHandle
from llm.prompt_templates import paraphrase_prompt, paraphrase_user_prompt

log = logging.getLogger("paraphrase")


@dataclass(frozen=True)
class ParaphrasePolicy:
    temperature: float = 0.7
    parse_retries: int = 2
    concurrency: int = 4


@dataclass(frozen=True)
class ParaphraseOutcome:
    record_id: str
    status: str  # accepted | rejected | error
    reason: str = ""


def _request(record: QARecord, gateway: ChatHandle, policy: ParaphrasePolicy) -> Optional[dict]:
    user = paraphrase_user_prompt(record.user, record.assistant)
    for attempt in range(1, policy.parse_retries + 2):
        exchange = gateway.chat_complete(paraphrase_prompt, user, temperature=policy.temperature)
        reply = parse_json_reply(exchange.response)
        if reply and isinstance(reply.get("question"), str) and isinstance(reply.get("answer"), str):
            return reply
        log.warning("paraphrase %s: unparseable reply (attempt %d)", record.id, attempt)
    return None


def paraphrase(
    record: QARecord,
    gateway: ChatHandle,
    policy: ParaphrasePolicy,
    registry: VariableRegistry,
) -> Tuple[QARecord, ParaphraseOutcome]:
    """Raises GatewayError (tagged with the record id) when the gateway gives up."""
    try:
        reply = _request(record, gateway, policy)
    except GatewayError as exc:
        raise exc.for_record(record.id) from exc
    if reply is None:
        return record, ParaphraseOutcome(record.id, "rejected", "unparseable reply")

    question, answer = reply["question"].strip(), reply["answer"].strip()
    bad = failing_components(record.gold, extract_claims(answer, registry), registry)
    if bad:
        return record, ParaphraseOutcome(record.id, "rejected", "answer lost " + ", ".join(bad))

    before = extract_claims(record.user, registry)
    after = extract_claims(question, registry)
    if before.cell_tags != after.cell_tags or before.scenarios != after.scenarios:
        return record, ParaphraseOutcome(record.id, "rejected", "question changed cell or scenario")

    rewritten = record.model_copy(update={"user": question, "assistant": answer, "paraphrased": True})
    return rewritten, ParaphraseOutcome(record.id, "accepted")


def paraphrase_all(
    records: Sequence[QARecord],
    gateway: ChatHandle,
    policy: ParaphrasePolicy,
    registry: VariableRegistry,
) -> Tuple[List[QARecord], List[ParaphraseOutcome]]:
    """Input order is preserved; a gateway failure keeps the original record."""

    def one(rec: QARecord) -> Tuple[QARecord, ParaphraseOutcome]:
        try:
            return paraphrase(rec, gateway, policy, registry)
        except GatewayError as exc:
            log.error("%s", exc)
            return rec, ParaphraseOutcome(rec.id, "error", str(exc))

    with ThreadPoolExecutor(max_workers=policy.concurrency) as pool:
        results = list(tqdm(pool.map(one, records), total=len(records),
                            desc="Paraphrasing", disable=None))

    accepted = sum(1 for _, o in results if o.status == "accepted")
    log.info("paraphrase: %d/%d accepted", accepted, len(results))
    return [r for r, _ in results], [o for _, o in results]
