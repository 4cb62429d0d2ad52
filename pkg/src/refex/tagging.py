"""Token taggers: the file passthrough and the lexicon heuristic.

Both produce a PredictionFile covering every page token with one of the 17
tag values. The heuristic tagger is a deterministic stand-in for a trained
model: it fires on field-label trigger phrases within a layout group and
tags the value tokens that follow, so moving a trigger to another group
removes its effect. An optional noise channel makes it err on purpose
(I-starts, truncated spans) for robustness experiments.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

from . import io as refex_io
from .grouping import GroupingResult, group_token_ids
from .io import PredictionFile, TokenPrediction
from .model import (ADDRESS_TYPES, NAME_TYPES, BioTag, EntityType, O_TAG,
                    Page, TagKind)

DATE_RE = re.compile(r"\d{1,2}[/-]\d{1,2}[/-]\d{2,4}")
NAME_TOKEN_RE = re.compile(r"[A-Z][A-Za-z.'\-]*,?")
GENDER_VOCAB = frozenset({"m", "f", "male", "female"})
_NAME_RUN_CAP = 6
_LOOKAHEAD = 3  # how far past a trigger a one-token value may sit

# Display forms of the field labels the heuristic knows. The fixture
# generator renders from this same table so the two stay in lockstep.
FIELD_LABEL_PHRASES: dict[EntityType, tuple[str, ...]] = {
    EntityType.PATIENT_NAME: ("Patient Name:", "Patient:", "Name:"),
    EntityType.PATIENT_DOB: ("DOB:", "Date of Birth:", "Birth Date:"),
    EntityType.PATIENT_GENDER: ("Sex:", "Gender:"),
    EntityType.PATIENT_ADDRESS: ("Patient Address:", "Home Address:", "Address:",
                                 "Address line 1:", "City, State, Zip:"),
    EntityType.PHYSICIAN_NAME: ("Referring Physician:", "Physician:",
                                "Referred By:", "Provider:"),
    EntityType.PHYSICIAN_ADDRESS: ("Office Address:", "Practice Address:",
                                   "Clinic Address:"),
    EntityType.EXAM_PROCEDURE: ("Exam:", "Procedure:", "Study:"),
    EntityType.EXAM_REASON: ("Reason:", "Indication:", "Diagnosis:"),
}


def _normalize_phrase(phrase: str) -> tuple[str, ...]:
    return tuple(word.lower() for word in phrase.split())


def _default_triggers() -> dict[EntityType, tuple[tuple[str, ...], ...]]:
    return {etype: tuple(_normalize_phrase(p) for p in phrases)
            for etype, phrases in FIELD_LABEL_PHRASES.items()}


@dataclass(frozen=True)
class HeuristicLexicon:
    """Trigger phrases per entity type, as normalized token tuples."""

    triggers: Mapping[EntityType, tuple[tuple[str, ...], ...]] = field(
        default_factory=_default_triggers)

    def phrases_at(self, texts: list[str], i: int) -> list[tuple[EntityType, int]]:
        """All (entity type, phrase length) matches starting at position i,
        longest first."""
        hits: list[tuple[EntityType, int]] = []
        for etype, phrases in self.triggers.items():
            for phrase in phrases:
                if tuple(texts[i:i + len(phrase)]) == phrase:
                    hits.append((etype, len(phrase)))
        hits.sort(key=lambda h: -h[1])
        return hits


@dataclass(frozen=True)
class TaggerNoise:
    """Deterministic error injection: flip a span's opening B to I, or drop
    the opening token entirely (truncation, which also leaves an I-start)."""

    seed: int = 0
    i_start_rate: float = 0.0
    truncate_rate: float = 0.0


class Tagger(Protocol):
    def tag(self, page: Page, grouping: GroupingResult) -> PredictionFile: ...


class FileTagger:
    """Passthrough for an externally produced prediction file."""

    def __init__(self, predictions: PredictionFile):
        self.predictions = predictions

    def tag(self, page: Page, grouping: GroupingResult) -> PredictionFile:
        refex_io.check_prediction_coverage(self.predictions, page)
        ordered = tuple(sorted(self.predictions.tags, key=lambda r: r.token_id))
        return PredictionFile(self.predictions.page_no, ordered)


def tag_from_file(page: Page, path: str | Path,
                  grouping: GroupingResult | None = None) -> PredictionFile:
    tagger = FileTagger(refex_io.read_predictions(path))
    return tagger.tag(page, grouping if grouping is not None else GroupingResult((), {}))


class HeuristicTagger:
    def __init__(self, lexicon: HeuristicLexicon | None = None,
                 noise: TaggerNoise | None = None):
        self.lexicon = lexicon or HeuristicLexicon()
        self.noise = noise

    def tag(self, page: Page, grouping: GroupingResult) -> PredictionFile:
        tags: dict[int, BioTag] = {tok.id: O_TAG for tok in page.tokens}
        spans: list[tuple[EntityType, list[int]]] = []
        for group in grouping.groups:
            tids = group_token_ids(page, group)
            texts = [page.token(t).text.lower() for t in tids]
            i = 0
            while i < len(tids):
                hits = self.lexicon.phrases_at(texts, i)
                if not hits:
                    i += 1
                    continue
                etype, length = hits[0]
                value, resume = self._extract_value(page, etype, tids, i + length)
                if value:
                    spans.append((etype, value))
                i = max(resume, i + length)

        noisy = self._corrupt(page, spans)
        for etype, tids, flip_first in noisy:
            for pos, tid in enumerate(tids):
                kind = TagKind.B if pos == 0 and not flip_first else TagKind.I
                tags[tid] = BioTag(kind, etype)
        records = tuple(TokenPrediction(tok.id, tags[tok.id], 1.0)
                        for tok in sorted(page.tokens, key=lambda t: t.id))
        return PredictionFile(page.page_no, records)

    def _extract_value(self, page: Page, etype: EntityType,
                       tids: list[int], start: int) -> tuple[list[int], int]:
        """Value tokens for a matched trigger, plus the scan-resume index."""
        texts = [page.token(t).text for t in tids]
        n = len(tids)
        if etype is EntityType.PATIENT_DOB:
            for k in range(start, min(start + _LOOKAHEAD, n)):
                if DATE_RE.fullmatch(texts[k]):
                    return [tids[k]], k + 1
            return [], start
        if etype is EntityType.PATIENT_GENDER:
            for k in range(start, min(start + _LOOKAHEAD, n)):
                if texts[k].lower() in GENDER_VOCAB:
                    return [tids[k]], k + 1
            return [], start
        if etype in NAME_TYPES:
            run: list[int] = []
            k = start
            while k < n and len(run) < _NAME_RUN_CAP and NAME_TOKEN_RE.fullmatch(texts[k]):
                run.append(tids[k])
                k += 1
            return run, k
        # Addresses and exam fields own the rest of their group.
        return list(tids[start:]), n

    def _corrupt(self, page: Page,
                 spans: list[tuple[EntityType, list[int]]]
                 ) -> list[tuple[EntityType, list[int], bool]]:
        """Apply the configured noise per span. A truncated span loses its
        opening token (turning into an I-start as well); otherwise the
        opening B may flip to a bare I-start."""
        if self.noise is None:
            return [(etype, tids, False) for etype, tids in spans]
        noise = self.noise
        out: list[tuple[EntityType, list[int], bool]] = []
        for etype, tids in spans:
            rng = random.Random(f"{noise.seed}-{page.page_no}-{tids[0]}")
            truncatable = etype in NAME_TYPES or etype in ADDRESS_TYPES
            if truncatable and len(tids) >= 2 and rng.random() < noise.truncate_rate:
                out.append((etype, tids[1:], True))
            elif rng.random() < noise.i_start_rate:
                out.append((etype, tids, True))
            else:
                out.append((etype, tids, False))
        return out


def build_tagger(kind: str, *, lexicon: HeuristicLexicon | None = None,
                 noise: TaggerNoise | None = None) -> Tagger:
    """Tagger factory for CLI/service use: "heuristic" or "file:<path>"."""
    if kind == "heuristic":
        return HeuristicTagger(lexicon=lexicon, noise=noise)
    if kind.startswith("file:"):
        return FileTagger(refex_io.read_predictions(kind[len("file:"):]))
    from .errors import InputError
    raise InputError(f"unknown tagger {kind!r}; expected 'heuristic' or 'file:<path>'")
