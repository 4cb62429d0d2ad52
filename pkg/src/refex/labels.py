"""Gold-annotation correction and BIO conversion.

Training-side plumbing: run the domain rules over gold spans to fix
annotation noise, then project spans onto a token-aligned BIO sequence.
Overlapping spans are tolerated everywhere except BIO conversion, which has
no way to represent them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConflictError
from .model import BioTag, EntitySpan, O_TAG, Page, TagKind, sort_span
from .rules import RuleConfig, RuleOutcome, apply_all


@dataclass(frozen=True)
class CorrectionLog:
    """What happened to each gold span, in input order."""

    outcomes: tuple[tuple[EntitySpan, RuleOutcome], ...]

    @property
    def corrected_count(self) -> int:
        return sum(1 for _, out in self.outcomes if out.applied_rules)

    @property
    def removed_count(self) -> int:
        return sum(1 for _, out in self.outcomes if out.removed)


def correct_annotations(entities: tuple[EntitySpan, ...] | list[EntitySpan],
                        page: Page, order: dict[int, int],
                        cfg: RuleConfig | None = None,
                        ) -> tuple[list[EntitySpan], CorrectionLog]:
    """Apply the full rule sequence to gold spans. Removed spans are dropped
    from the output but stay visible in the log."""
    cfg = cfg or RuleConfig()
    outcomes: list[tuple[EntitySpan, RuleOutcome]] = []
    corrected: list[EntitySpan] = []
    for span in entities:
        outcome = apply_all(sort_span(span, order), page, order, cfg)
        outcomes.append((span, outcome))
        if not outcome.removed:
            corrected.append(outcome.entity)
    return corrected, CorrectionLog(tuple(outcomes))


def to_bio(entities: tuple[EntitySpan, ...] | list[EntitySpan],
           page: Page, order: dict[int, int]) -> dict[int, BioTag]:
    """Project spans onto one BIO tag per page token.

    First token of a span gets B-type, the rest I-type, everything else O.
    Two spans claiming the same token cannot be serialized: ConflictError
    names both.
    """
    tags: dict[int, BioTag] = {tok.id: O_TAG for tok in page.tokens}
    owner: dict[int, EntitySpan] = {}
    for span in sorted(entities, key=lambda s: min(order[t] for t in s.token_ids)):
        ordered = sort_span(span, order)
        for pos, tid in enumerate(ordered.token_ids):
            if tid in owner:
                raise ConflictError(
                    f"overlapping entities share token {tid}: "
                    f"{_describe(owner[tid])} and {_describe(span)}")
            owner[tid] = span
            kind = TagKind.B if pos == 0 else TagKind.I
            tags[tid] = BioTag(kind, ordered.entity_type)
    return tags


def _describe(span: EntitySpan) -> str:
    return f"{span.entity_type.value}{list(span.token_ids)}"
