"""Domain cleanup rules for extracted spans.

Four rules, always applied in this order: strip field stop-words, strip
phone numbers out of addresses, reclassify patient names that carry medical
credentials, extend truncated spans leftward. apply_all is idempotent under
the default configuration, and a rule that empties a span turns the outcome
into a removal.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

from . import io as refex_io
from .errors import InputError
from .model import (ADDRESS_TYPES, NAME_TYPES, EntitySpan, EntityType, Page,
                    SpanSource)

log = logging.getLogger("refex.rules")

# Baseline field-label noise per entity type. Address lists carry the form
# caption vocabulary ("Address line 1:", "City, State, Zip:"); the rest cover
# demographic captions. Lower-cased; matching also tries with trailing "," or
# "." stripped, never ":" ("1:", "2:" are colon-significant).
ADDRESS_STOP_WORDS = frozenset({
    "address", "address:", "city", "city:", "state", "state:",
    "line", "line:", "1:", "2:", "zip", "zip:",
})
FIELD_STOP_WORDS = frozenset({
    "name:", "name", "dob:", "dob", "sex:", "sex", "gender:", "gender",
    "patient", "patient:", "physician", "physician:", "dr.", "dr",
    "provider:", "provider",
})

DEFAULT_PHONE_PATTERNS = (
    r"\(?\d{3}\)?[-.]?\d{3}[-.]?\d{4}",   # 512-555-1212, (512)5551212, 5125551212
    r"1[-.]\d{3}[-.]\d{3}[-.]\d{4}",      # 1-512-555-1212
    r"\d{3}[-.]\d{4}",                    # bare seven-digit pair
)
AREA_CODE_RE = re.compile(r"\(\d{3}\)")   # removed only next to another phone token
DEFAULT_PHONE_CONTEXT = frozenset({"ph", "phone", "fax", "tel", "cell", "office"})
DEFAULT_CREDENTIALS = frozenset({
    "MD", "DO", "NP", "PA", "PA-C", "RN", "APRN", "DPM", "DC", "CNP", "FNP",
    "MBBS", "PhD",
})
DEFAULT_CARDINALS = frozenset({"N", "S", "E", "W"})

# Street numbers stay short; anything with more digits is phone-like and must
# never be pulled into an address by left extension.
_STREET_NUMBER_RE = re.compile(r"\d{1,6}")

RULE_STRIP_STOP_WORDS = "strip_stop_words"
RULE_STRIP_PHONE = "strip_phone"
RULE_RECLASSIFY = "reclassify_by_credentials"
RULE_EXTEND_LEFT = "extend_left"


def _default_stop_words() -> dict[EntityType, frozenset[str]]:
    return {
        etype: (ADDRESS_STOP_WORDS if etype in ADDRESS_TYPES else FIELD_STOP_WORDS)
        for etype in EntityType
    }


@dataclass(frozen=True)
class RuleConfig:
    stop_words: Mapping[EntityType, frozenset[str]] = field(default_factory=_default_stop_words)
    phone_patterns: tuple[str, ...] = DEFAULT_PHONE_PATTERNS
    phone_context_words: frozenset[str] = DEFAULT_PHONE_CONTEXT
    credential_lexicon: frozenset[str] = DEFAULT_CREDENTIALS
    cardinal_letters: frozenset[str] = DEFAULT_CARDINALS
    left_extension_limit: int = 4

    def __post_init__(self) -> None:
        if self.left_extension_limit < 0:
            raise InputError("left_extension_limit must be >= 0")
        missing = [t.value for t in EntityType if t not in self.stop_words]
        if missing:
            raise InputError(f"stop_words missing entity types: {missing}")
        object.__setattr__(self, "_phone_res",
                           tuple(re.compile(f"^(?:{p})$") for p in self.phone_patterns))
        object.__setattr__(self, "_credentials_norm",
                           frozenset(_norm_credential(c) for c in self.credential_lexicon))
        object.__setattr__(self, "_cardinals_norm",
                           frozenset(c.lower() for c in self.cardinal_letters))

    def is_stop_word(self, etype: EntityType, text: str) -> bool:
        stops = self.stop_words[etype]
        lowered = text.lower()
        return lowered in stops or lowered.rstrip(",.") in stops

    def is_phone(self, text: str) -> bool:
        return any(rx.match(text) for rx in self._phone_res)

    def is_phone_context(self, text: str) -> bool:
        return text.lower().rstrip(":.,") in self.phone_context_words

    def is_credential(self, text: str) -> bool:
        return _norm_credential(text) in self._credentials_norm

    def is_cardinal(self, text: str) -> bool:
        return text.lower().rstrip(".") in self._cardinals_norm

    def is_street_number(self, text: str) -> bool:
        return _STREET_NUMBER_RE.fullmatch(text) is not None


def _norm_credential(text: str) -> str:
    # "M.D." and "md," both normalize to "md"; hyphens survive for "PA-C".
    return text.replace(".", "").rstrip(",").lower()


@dataclass(frozen=True)
class RuleOutcome:
    """Result of running rules over one span. entity is None when the span
    was removed entirely; applied_rules is empty iff nothing changed."""

    entity: EntitySpan | None
    applied_rules: tuple[str, ...] = ()

    @property
    def removed(self) -> bool:
        return self.entity is None


def _unchanged(span: EntitySpan) -> RuleOutcome:
    return RuleOutcome(span)


def _changed(span: EntitySpan, etype: EntityType, token_ids: tuple[int, ...],
             rule: str) -> RuleOutcome:
    if not token_ids:
        return RuleOutcome(None, (rule,))
    return RuleOutcome(
        EntitySpan(etype, token_ids, SpanSource.CORRECTED), (rule,))


def strip_stop_words(span: EntitySpan, page: Page, order: dict[int, int],
                     cfg: RuleConfig | None = None) -> RuleOutcome:
    """Drop field-label noise tokens for the span's type. Removing every
    token removes the span."""
    cfg = cfg or RuleConfig()
    keep = tuple(t for t in span.token_ids
                 if not cfg.is_stop_word(span.entity_type, page.token(t).text))
    if len(keep) == len(span.token_ids):
        return _unchanged(span)
    return _changed(span, span.entity_type, keep, RULE_STRIP_STOP_WORDS)


def strip_phone(span: EntitySpan, page: Page, order: dict[int, int],
                cfg: RuleConfig | None = None) -> RuleOutcome:
    """Remove phone numbers and their context words from address spans.

    Adjacency is positional within the span: parenthesized area codes fall
    when they sit next to a phone token, context words ("Ph:", "Fax") fall
    when they sit next to anything already marked. Other types pass through.
    """
    cfg = cfg or RuleConfig()
    if span.entity_type not in ADDRESS_TYPES:
        return _unchanged(span)
    texts = [page.token(t).text for t in span.token_ids]
    k = len(texts)
    marked = [cfg.is_phone(tx) for tx in texts]
    for i, tx in enumerate(texts):
        if not marked[i] and AREA_CODE_RE.fullmatch(tx):
            if (i > 0 and marked[i - 1]) or (i + 1 < k and marked[i + 1]):
                marked[i] = True
    changed = True
    while changed:
        changed = False
        for i, tx in enumerate(texts):
            if marked[i] or not cfg.is_phone_context(tx):
                continue
            if (i > 0 and marked[i - 1]) or (i + 1 < k and marked[i + 1]):
                marked[i] = True
                changed = True
    if not any(marked):
        return _unchanged(span)
    keep = tuple(t for t, m in zip(span.token_ids, marked) if not m)
    return _changed(span, span.entity_type, keep, RULE_STRIP_PHONE)


def reclassify_by_credentials(span: EntitySpan, page: Page, order: dict[int, int],
                              cfg: RuleConfig | None = None) -> RuleOutcome:
    """PatientName containing or immediately adjacent to a medical credential
    becomes PhysicianName; PhysicianName absorbs credentials that directly
    follow it in reading order."""
    cfg = cfg or RuleConfig()
    if span.entity_type not in NAME_TYPES:
        return _unchanged(span)
    by_rank = {order[t]: t for t in order}
    etype = span.entity_type
    token_ids = span.token_ids
    retyped = False
    if etype is EntityType.PATIENT_NAME:
        inside = any(cfg.is_credential(page.token(t).text) for t in token_ids)
        adjacent = False
        for rank in (order[token_ids[0]] - 1, order[token_ids[-1]] + 1):
            tid = by_rank.get(rank)
            if tid is not None and cfg.is_credential(page.token(tid).text):
                adjacent = True
        if inside or adjacent:
            etype = EntityType.PHYSICIAN_NAME
            retyped = True
    absorbed = False
    if etype is EntityType.PHYSICIAN_NAME:
        while True:
            tid = by_rank.get(order[token_ids[-1]] + 1)
            if tid is None or tid in token_ids or not cfg.is_credential(page.token(tid).text):
                break
            token_ids = token_ids + (tid,)
            absorbed = True
    if not retyped and not absorbed:
        return _unchanged(span)
    return _changed(span, etype, token_ids, RULE_RECLASSIFY)


def extend_left(span: EntitySpan, page: Page, order: dict[int, int],
                cfg: RuleConfig | None = None) -> RuleOutcome:
    """Recover truncated starts by searching left of the first token.

    Single-token names take the one preceding token unless it is a stop word
    or bare punctuation. Addresses keep prepending while the preceding token
    is a street number or a cardinal letter, up to the configured limit.
    """
    cfg = cfg or RuleConfig()
    by_rank = {order[t]: t for t in order}
    token_ids = span.token_ids
    if span.entity_type in NAME_TYPES:
        if len(token_ids) != 1:
            return _unchanged(span)
        tid = by_rank.get(order[token_ids[0]] - 1)
        if tid is None or tid in token_ids:
            return _unchanged(span)
        text = page.token(tid).text
        if cfg.is_stop_word(span.entity_type, text) or all(c in string.punctuation for c in text):
            return _unchanged(span)
        return _changed(span, span.entity_type, (tid,) + token_ids, RULE_EXTEND_LEFT)
    if span.entity_type in ADDRESS_TYPES:
        added = 0
        while added < cfg.left_extension_limit:
            tid = by_rank.get(order[token_ids[0]] - 1)
            if tid is None or tid in token_ids:
                break
            text = page.token(tid).text
            if not (cfg.is_street_number(text) or cfg.is_cardinal(text)):
                break
            token_ids = (tid,) + token_ids
            added += 1
        if not added:
            return _unchanged(span)
        return _changed(span, span.entity_type, token_ids, RULE_EXTEND_LEFT)
    return _unchanged(span)


_RULE_SEQUENCE: tuple[Callable, ...] = (
    strip_stop_words, strip_phone, reclassify_by_credentials, extend_left)


def apply_all(span: EntitySpan, page: Page, order: dict[int, int],
              cfg: RuleConfig | None = None) -> RuleOutcome:
    """Run the full rule sequence, aggregating applied rule names."""
    cfg = cfg or RuleConfig()
    applied: list[str] = []
    current = span
    for rule in _RULE_SEQUENCE:
        outcome = rule(current, page, order, cfg)
        applied.extend(outcome.applied_rules)
        if outcome.removed:
            return RuleOutcome(None, tuple(applied))
        current = outcome.entity
    return RuleOutcome(current, tuple(applied))


def load_rule_config(source: str | Path | dict) -> RuleConfig:
    """Build a RuleConfig from a JSON file or dict, extending the defaults.

    Recognized keys: stop_words (object keyed by entity type),
    address_stop_words, phone_patterns, phone_context_words,
    credential_lexicon, cardinal_letters, left_extension_limit.
    """
    data = source if isinstance(source, dict) else refex_io.load_json(source)
    known = {"stop_words", "address_stop_words", "phone_patterns",
             "phone_context_words", "credential_lexicon", "cardinal_letters",
             "left_extension_limit"}
    extras = sorted(set(data) - known)
    if extras:
        log.warning("rule config: ignoring unknown fields %s", extras)
    stop_words = dict(_default_stop_words())
    for name, words in data.get("stop_words", {}).items():
        etype = EntityType(name)
        stop_words[etype] = stop_words[etype] | frozenset(w.lower() for w in words)
    extra_address = frozenset(w.lower() for w in data.get("address_stop_words", []))
    if extra_address:
        for etype in ADDRESS_TYPES:
            stop_words[etype] = stop_words[etype] | extra_address
    cfg = RuleConfig(stop_words=stop_words)
    if "phone_patterns" in data:
        cfg = replace(cfg, phone_patterns=cfg.phone_patterns + tuple(data["phone_patterns"]))
    if "phone_context_words" in data:
        cfg = replace(cfg, phone_context_words=cfg.phone_context_words
                      | frozenset(w.lower() for w in data["phone_context_words"]))
    if "credential_lexicon" in data:
        cfg = replace(cfg, credential_lexicon=cfg.credential_lexicon
                      | frozenset(data["credential_lexicon"]))
    if "cardinal_letters" in data:
        cfg = replace(cfg, cardinal_letters=cfg.cardinal_letters
                      | frozenset(data["cardinal_letters"]))
    if "left_extension_limit" in data:
        cfg = replace(cfg, left_extension_limit=int(data["left_extension_limit"]))
    return cfg
