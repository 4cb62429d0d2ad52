"""BIO decoding into entity spans, plus the inference-side post-processing:
address fragment merging, the hybrid rule pass, and per-page value selection.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError, SchemaError
from .io import PredictionFile
from .model import (ADDRESS_TYPES, EntitySpan, EntityType, Category, Page,
                    SpanSource, TagKind, entity_text)
from .rules import RuleConfig, RuleOutcome, apply_all


@dataclass(frozen=True)
class DecodeConfig:
    address_merge_gap: int = 5
    allow_i_start: bool = True

    def __post_init__(self) -> None:
        if self.address_merge_gap < 0:
            raise InputError("address_merge_gap must be >= 0")


def decode_bio(pred: PredictionFile, order: dict[int, int],
               cfg: DecodeConfig | None = None) -> list[EntitySpan]:
    """Walk tags in reading order and emit contiguous B/I runs as spans.

    A fresh B always opens a new entity (so B-X B-X is two single-token
    spans); an I with no compatible open entity opens one when allow_i_start,
    and is dropped otherwise; O closes whatever is open.
    """
    cfg = cfg or DecodeConfig()
    by_token = {rec.token_id: rec.tag for rec in pred.tags}
    missing = sorted(t for t in order if t not in by_token)
    if missing:
        raise SchemaError(f"tags missing for tokens: {missing}")
    ranked = sorted(order, key=order.__getitem__)

    spans: list[EntitySpan] = []
    open_type: EntityType | None = None
    open_tokens: list[int] = []

    def close() -> None:
        nonlocal open_type, open_tokens
        if open_type is not None:
            spans.append(EntitySpan(open_type, tuple(open_tokens), SpanSource.PREDICTED))
        open_type = None
        open_tokens = []

    for tid in ranked:
        tag = by_token[tid]
        if tag.kind is TagKind.O:
            close()
        elif tag.kind is TagKind.B:
            close()
            open_type = tag.entity_type
            open_tokens = [tid]
        else:  # I
            if open_type is tag.entity_type:
                open_tokens.append(tid)
            else:
                close()
                if cfg.allow_i_start:
                    open_type = tag.entity_type
                    open_tokens = [tid]
    close()
    return spans


def merge_addresses(entities: list[EntitySpan] | tuple[EntitySpan, ...],
                    order: dict[int, int],
                    cfg: DecodeConfig | None = None) -> list[EntitySpan]:
    """Combine consecutive same-type address spans separated by at most
    address_merge_gap intervening tokens. Left-to-right and transitive; the
    canonical sort first makes the result independent of input order."""
    cfg = cfg or DecodeConfig()
    ordered = sorted(
        entities,
        key=lambda s: (min(order[t] for t in s.token_ids),
                       max(order[t] for t in s.token_ids),
                       s.entity_type.value, s.token_ids))
    out: list[EntitySpan] = []
    last_address: dict[EntityType, int] = {}  # type -> index into out
    for span in ordered:
        if span.entity_type not in ADDRESS_TYPES:
            out.append(span)
            continue
        idx = last_address.get(span.entity_type)
        if idx is not None:
            prev = out[idx]
            prev_end = max(order[t] for t in prev.token_ids)
            cur_start = min(order[t] for t in span.token_ids)
            between = cur_start - prev_end - 1
            if between <= cfg.address_merge_gap:
                union = sorted(set(prev.token_ids) | set(span.token_ids),
                               key=order.__getitem__)
                out[idx] = EntitySpan(prev.entity_type, tuple(union), prev.source)
                continue
        out.append(span)
        last_address[span.entity_type] = len(out) - 1
    return out


def hybrid_postprocess(entities: list[EntitySpan] | tuple[EntitySpan, ...],
                       page: Page, order: dict[int, int],
                       cfg: RuleConfig | None = None,
                       ) -> tuple[list[EntitySpan], list[RuleOutcome]]:
    """Domain-rule pass over decoded entities. Removals drop out of the
    entity list; retypes carry through. Outcomes are returned for logging."""
    cfg = cfg or RuleConfig()
    kept: list[EntitySpan] = []
    outcomes: list[RuleOutcome] = []
    for span in entities:
        outcome = apply_all(span, page, order, cfg)
        outcomes.append(outcome)
        if not outcome.removed:
            kept.append(outcome.entity)
    return kept, outcomes


def normalize_text(text: str) -> str:
    return " ".join(text.casefold().split())


@dataclass(frozen=True)
class SelectionResult:
    """Final per-page values: at most one span per patient/physician type,
    all unique values for exam types."""

    chosen: dict[EntityType, tuple[EntitySpan, ...]]
    vote_tallies: dict[EntityType, dict[str, int]]

    def spans(self) -> list[EntitySpan]:
        out: list[EntitySpan] = []
        for etype in EntityType:
            out.extend(self.chosen.get(etype, ()))
        return out


def select_per_page(entities: list[EntitySpan] | tuple[EntitySpan, ...],
                    page: Page, order: dict[int, int]) -> SelectionResult:
    """Majority vote per patient/physician type over normalized entity text;
    ties prefer more tokens, then the earliest first-token rank. Exam types
    keep every distinct normalized value."""
    by_type: dict[EntityType, list[EntitySpan]] = {}
    for span in entities:
        by_type.setdefault(span.entity_type, []).append(span)

    chosen: dict[EntityType, tuple[EntitySpan, ...]] = {}
    tallies: dict[EntityType, dict[str, int]] = {}
    for etype, spans in by_type.items():
        def first_rank(span: EntitySpan) -> int:
            return min(order[t] for t in span.token_ids)

        groups: dict[str, list[EntitySpan]] = {}
        for span in sorted(spans, key=first_rank):
            groups.setdefault(normalize_text(entity_text(span, page)), []).append(span)
        tallies[etype] = {text: len(members) for text, members in groups.items()}

        if etype.category is Category.EXAM:
            # First occurrence of each distinct value, in reading order.
            uniques = [members[0] for members in groups.values()]
            chosen[etype] = tuple(sorted(uniques, key=first_rank))
        else:
            def group_key(item: tuple[str, list[EntitySpan]]) -> tuple:
                _, members = item
                return (-len(members),
                        -max(len(s.token_ids) for s in members),
                        min(first_rank(s) for s in members))

            _, winners = min(groups.items(), key=group_key)
            chosen[etype] = (min(winners, key=first_rank),)
    return SelectionResult(chosen, tallies)
