# qa_pipeline/core/splits.py
"""
Seeded train/test splits and the fine-tuning JSONL export.
"""

from __future__ import annotations

import json
import logging
from decimal import ROUND_HALF_UP, Decimal
from typing import IO, Iterable, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from core.errors import SinkError
from core.prompting import DEFAULT_BUDGET_TOKENS, assemble_prompt, serialize_context
from core.schema import QARecord, TrainingExample

log = logging.getLogger("splits")


def holdout_size(n: int, fraction: float) -> int:
    """
    round-half-up(fraction·n), kept within [1, n-1] when n ≥ 2. A single
    record always goes to the test set; an empty set splits into nothing.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"test fraction must lie in (0, 1), got {fraction}")
    size = int((Decimal(str(fraction)) * n).to_integral_value(rounding=ROUND_HALF_UP))
    if n >= 2:
        return min(max(size, 1), n - 1)
    return n


def split_records(
    records: Sequence[QARecord], fraction: float, seed: int
) -> Tuple[List[QARecord], List[QARecord]]:
    """
    (train, test): a seeded permutation of `records`; the first
    holdout_size(n, fraction) of it becomes the test set. Both halves keep
    the input order.
    """
    n = len(records)
    k = holdout_size(n, fraction)
    order = np.random.default_rng(seed).permutation(n)
    test_idx = {int(i) for i in order[:k]}
    train = [r for i, r in enumerate(records) if i not in test_idx]
    test = [r for i, r in enumerate(records) if i in test_idx]
    return train, test


def to_training_example(record: QARecord) -> TrainingExample:
    return TrainingExample(
        id=record.id,
        user=record.user,
        input=serialize_context(record.input),
        assistant=record.assistant,
    )


def over_budget(records: Iterable[QARecord], budget_tokens: int = DEFAULT_BUDGET_TOKENS) -> List[str]:
    """Ids whose assembled prompt exceeds the token budget."""
    return [r.id for r in records if assemble_prompt(r, budget_tokens).over_budget]


def export_training_jsonl(records: Iterable[Union[QARecord, TrainingExample]], sink: IO[bytes]) -> int:
    """One UTF-8 JSON object per line: {id, user, input, assistant}."""
    count = 0
    try:
        for rec in records:
            example = rec if isinstance(rec, TrainingExample) else to_training_example(rec)
            line = json.dumps(example.model_dump(), ensure_ascii=False) + "\n"
            sink.write(line.encode("utf-8"))
            count += 1
        sink.flush()
    except (OSError, ValueError) as exc:
        raise SinkError(f"export failed after {count} line(s): {exc}") from exc
    return count


def import_training_jsonl(source: IO[bytes]) -> List[TrainingExample]:
    out = []
    for line_no, raw in enumerate(source, 1):
        line = raw.decode("utf-8").strip()
        if not line:
            continue
        try:
            out.append(TrainingExample.model_validate_json(line))
        except ValidationError as exc:
            raise ValueError(f"line {line_no}: {exc}") from exc
    return out
