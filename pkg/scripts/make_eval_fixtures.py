"""Generate the canned evaluation fixtures under fixtures/eval/.

Produces four 500-question judgment sets (one per evaluated system) and a
tier-tagged answer log with its matching judgments. The counts are the
published benchmark figures the metric tests reproduce; regenerating the
files is deterministic.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from tierqa.evaluation import Judgment  # noqa: E402
from tierqa.model import (  # noqa: E402
    DEFAULT_FALLBACK_DISCLAIMER,
    DEFAULT_TIER2_DISCLAIMER,
    AnswerEnvelope,
    Tier,
)
from tierqa.store import Store  # noqa: E402

EVAL_DIR = ROOT / "fixtures" / "eval"

# (file stem, correct answers out of 500)
JUDGMENT_SETS = [
    ("judgments_tiered_engine", 314),
    ("judgments_baseline_a", 272),
    ("judgments_baseline_b", 251),
    ("judgments_baseline_c", 220),
]

# (tier, total responses, correct responses)
TIER_LOG = [
    (Tier.FAQ, 258, 211),
    (Tier.DOCUMENT, 211, 98),
    (Tier.FALLBACK, 31, 5),
]


def judgment_set(correct: int, total: int = 500) -> list[Judgment]:
    return [
        Judgment(question_id=f"q{i:04d}", correct=i < correct)
        for i in range(total)
    ]


def tier_log() -> tuple[list[AnswerEnvelope], list[Judgment]]:
    envelopes: list[AnswerEnvelope] = []
    judgments: list[Judgment] = []
    serial = 0
    for tier, total, correct in TIER_LOG:
        for i in range(total):
            query = f"q{serial:04d}"
            serial += 1
            if tier is Tier.FAQ:
                envelope = AnswerEnvelope(
                    query=query,
                    answer_text=f"Stored answer for {query}.",
                    tier=tier,
                    matches=((f"faq-fixture-{i:04d}", 0.95),),
                    disclaimer_applied=None,
                    latency_ms=4.0,
                )
            elif tier is Tier.DOCUMENT:
                envelope = AnswerEnvelope(
                    query=query,
                    answer_text=(
                        f"Generated answer for {query}.\n\n"
                        f"{DEFAULT_TIER2_DISCLAIMER}"
                    ),
                    tier=tier,
                    matches=((f"chunk-fixture-{i:04d}", 0.86),),
                    disclaimer_applied=DEFAULT_TIER2_DISCLAIMER,
                    latency_ms=38.0,
                )
            else:
                envelope = AnswerEnvelope(
                    query=query,
                    answer_text=(
                        f"Unverified answer for {query}.\n\n"
                        f"{DEFAULT_FALLBACK_DISCLAIMER}"
                    ),
                    tier=tier,
                    matches=(),
                    disclaimer_applied=DEFAULT_FALLBACK_DISCLAIMER,
                    latency_ms=55.0,
                )
            envelopes.append(envelope)
            judgments.append(Judgment(question_id=query, correct=i < correct))
    return envelopes, judgments


def main() -> None:
    EVAL_DIR.mkdir(parents=True, exist_ok=True)
    store = Store(ROOT)  # only used for its writers
    for stem, correct in JUDGMENT_SETS:
        store.save_judgments(judgment_set(correct), EVAL_DIR / f"{stem}.jsonl")
        print(f"wrote {stem}.jsonl ({correct}/500 correct)")
    envelopes, judgments = tier_log()
    store.save_envelopes(envelopes, EVAL_DIR / "tier_log_envelopes.jsonl")
    store.save_judgments(judgments, EVAL_DIR / "tier_log_judgments.jsonl")
    print(f"wrote tier log ({len(envelopes)} envelopes)")


if __name__ == "__main__":
    main()
