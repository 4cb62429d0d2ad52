"""Readers and writers for the five JSON artifact kinds.

All artifacts are UTF-8 JSON with a top-level schema_version of "1".
Readers validate shape and geometry and never drop a record silently:
anything malformed raises SchemaError (shape/values) or IntegrityError
(dangling cross-references). Unknown top-level fields are ignored with a
warning; unknown enum values are hard errors.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import InputError, IntegrityError, SchemaError
from .model import (BBox, BioTag, EntitySpan, EntityType, Line, Page,
                    SpanSource, Token, entity_text)

log = logging.getLogger("refex.io")

SCHEMA_VERSION = "1"


def load_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be a JSON object")
    return data


def dump_json(obj: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_version(data: dict, ctx: str) -> None:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{ctx}: schema_version must be {SCHEMA_VERSION!r}, got {version!r}")


def _warn_unknown(data: dict, known: set[str], ctx: str) -> None:
    extras = sorted(set(data) - known)
    if extras:
        log.warning("%s: ignoring unknown top-level fields %s", ctx, extras)


def _req(data: dict, key: str, kind: type | tuple, ctx: str) -> Any:
    if key not in data:
        raise SchemaError(f"{ctx}: missing required field {key!r}")
    value = data[key]
    if kind is int and isinstance(value, bool):
        raise SchemaError(f"{ctx}: field {key!r} must be an integer")
    if not isinstance(value, kind):
        raise SchemaError(f"{ctx}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _bbox(raw: Any, ctx: str) -> BBox:
    if (not isinstance(raw, list) or len(raw) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)):
        raise SchemaError(f"{ctx}: bbox must be a list of 4 numbers")
    try:
        return BBox(*(float(v) for v in raw))
    except InputError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def _entity_type(raw: Any, ctx: str) -> EntityType:
    if not isinstance(raw, str):
        raise SchemaError(f"{ctx}: entity type must be a string")
    try:
        return EntityType(raw)
    except ValueError:
        raise SchemaError(f"{ctx}: unknown entity type {raw!r}") from None


def _token_ids(raw: Any, ctx: str) -> tuple[int, ...]:
    if (not isinstance(raw, list) or not raw
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)):
        raise SchemaError(f"{ctx}: token_ids must be a non-empty list of integers")
    return tuple(raw)


# --- OCR page ---------------------------------------------------------------

def page_from_dict(data: dict, ctx: str = "page") -> Page:
    _check_version(data, ctx)
    _warn_unknown(data, {"schema_version", "page_no", "width_px", "height_px", "lines", "tokens"}, ctx)
    page_no = _req(data, "page_no", int, ctx)
    width = _req(data, "width_px", int, ctx)
    height = _req(data, "height_px", int, ctx)
    raw_lines = _req(data, "lines", list, ctx)
    raw_tokens = _req(data, "tokens", list, ctx)

    line_boxes: dict[int, BBox] = {}
    for i, rec in enumerate(raw_lines):
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: line record {i} must be an object")
        lid = _req(rec, "id", int, f"{ctx} line {i}")
        if lid in line_boxes:
            raise SchemaError(f"{ctx}: duplicate line id {lid}")
        line_boxes[lid] = _bbox(rec.get("bbox"), f"{ctx} line {lid}")

    tokens: list[Token] = []
    members: dict[int, list[Token]] = {lid: [] for lid in line_boxes}
    for i, rec in enumerate(raw_tokens):
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: token record {i} must be an object")
        tid = _req(rec, "id", int, f"{ctx} token {i}")
        text = _req(rec, "text", str, f"{ctx} token {tid}")
        box = _bbox(rec.get("bbox"), f"{ctx} token {tid}")
        line_id = _req(rec, "line_id", int, f"{ctx} token {tid}")
        if line_id not in members:
            raise IntegrityError(f"{ctx}: token {tid} references missing line {line_id}")
        try:
            tok = Token(tid, text, box, line_id)
        except InputError as exc:
            raise SchemaError(f"{ctx} token {tid}: {exc}") from exc
        tokens.append(tok)
        members[line_id].append(tok)

    lines: list[Line] = []
    for lid, box in line_boxes.items():
        toks = members[lid]
        if not toks:
            raise SchemaError(f"{ctx}: line {lid} has no member tokens")
        ordered = tuple(t.id for t in sorted(toks, key=lambda t: (t.bbox.x0, t.id)))
        lines.append(Line(lid, ordered, box))

    try:
        return Page(page_no, width, height, tuple(tokens), tuple(lines))
    except InputError as exc:
        raise SchemaError(f"{ctx}: {exc}") from exc


def page_to_dict(page: Page) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "page_no": page.page_no,
        "width_px": page.width_px,
        "height_px": page.height_px,
        "lines": [
            {"id": ln.id, "bbox": [ln.bbox.x0, ln.bbox.y0, ln.bbox.x1, ln.bbox.y1]}
            for ln in page.lines
        ],
        "tokens": [
            {"id": t.id, "text": t.text,
             "bbox": [t.bbox.x0, t.bbox.y0, t.bbox.x1, t.bbox.y1], "line_id": t.line_id}
            for t in page.tokens
        ],
    }


def read_page(path: str | Path) -> Page:
    return page_from_dict(load_json(path), ctx=str(path))


def write_page(page: Page, path: str | Path) -> None:
    dump_json(page_to_dict(page), path)


# --- Annotations ------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationFile:
    page_no: int
    entities: tuple[EntitySpan, ...]


def annotations_from_dict(data: dict, ctx: str = "annotations",
                          page: Page | None = None) -> AnnotationFile:
    _check_version(data, ctx)
    _warn_unknown(data, {"schema_version", "page_no", "entities"}, ctx)
    page_no = _req(data, "page_no", int, ctx)
    spans: list[EntitySpan] = []
    for i, rec in enumerate(_req(data, "entities", list, ctx)):
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: entity record {i} must be an object")
        etype = _entity_type(rec.get("type"), f"{ctx} entity {i}")
        tids = _token_ids(rec.get("token_ids"), f"{ctx} entity {i}")
        try:
            spans.append(EntitySpan(etype, tids, SpanSource.GOLD))
        except InputError as exc:
            raise SchemaError(f"{ctx} entity {i}: {exc}") from exc
    ann = AnnotationFile(page_no, tuple(spans))
    if page is not None:
        resolve_annotations(ann, page)
    return ann


def resolve_annotations(ann: AnnotationFile, page: Page) -> None:
    """Check every referenced token id against the paired page."""
    if ann.page_no != page.page_no:
        raise IntegrityError(
            f"annotations are for page {ann.page_no}, paired page is {page.page_no}")
    for i, span in enumerate(ann.entities):
        dangling = sorted(t for t in span.token_ids if not page.has_token(t))
        if dangling:
            raise IntegrityError(
                f"annotation entity {i} ({span.entity_type.value}) references "
                f"tokens not on page {page.page_no}: {dangling}")


def annotations_to_dict(ann: AnnotationFile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "page_no": ann.page_no,
        "entities": [
            {"type": s.entity_type.value, "token_ids": list(s.token_ids)}
            for s in ann.entities
        ],
    }


def read_annotations(path: str | Path, page: Page | None = None) -> AnnotationFile:
    return annotations_from_dict(load_json(path), ctx=str(path), page=page)


def write_annotations(ann: AnnotationFile, path: str | Path) -> None:
    dump_json(annotations_to_dict(ann), path)


# --- Predictions ------------------------------------------------------------

@dataclass(frozen=True)
class TokenPrediction:
    token_id: int
    tag: BioTag
    confidence: float = 1.0


@dataclass(frozen=True)
class PredictionFile:
    page_no: int
    tags: tuple[TokenPrediction, ...]


def predictions_from_dict(data: dict, ctx: str = "predictions") -> PredictionFile:
    _check_version(data, ctx)
    _warn_unknown(data, {"schema_version", "page_no", "tags"}, ctx)
    page_no = _req(data, "page_no", int, ctx)
    seen: set[int] = set()
    records: list[TokenPrediction] = []
    for i, rec in enumerate(_req(data, "tags", list, ctx)):
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: tag record {i} must be an object")
        tid = _req(rec, "token_id", int, f"{ctx} tag {i}")
        if tid in seen:
            raise SchemaError(f"{ctx}: token {tid} tagged more than once")
        seen.add(tid)
        raw_tag = _req(rec, "tag", str, f"{ctx} tag {i}")
        try:
            tag = BioTag.parse(raw_tag)
        except InputError as exc:
            raise SchemaError(f"{ctx} token {tid}: {exc}") from exc
        confidence = rec.get("confidence", 1.0)
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise SchemaError(f"{ctx} token {tid}: confidence must be a number")
        records.append(TokenPrediction(tid, tag, float(confidence)))
    return PredictionFile(page_no, tuple(records))


def check_prediction_coverage(pred: PredictionFile, page: Page) -> None:
    """Every page token must carry exactly one tag; no stray ids."""
    if pred.page_no != page.page_no:
        raise IntegrityError(
            f"predictions are for page {pred.page_no}, paired page is {page.page_no}")
    tagged = {rec.token_id for rec in pred.tags}
    page_ids = {tok.id for tok in page.tokens}
    missing = sorted(page_ids - tagged)
    if missing:
        raise SchemaError(f"predictions missing tags for page tokens: {missing}")
    stray = sorted(tagged - page_ids)
    if stray:
        raise IntegrityError(f"predictions reference tokens not on page: {stray}")


def predictions_to_dict(pred: PredictionFile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "page_no": pred.page_no,
        "tags": [
            {"token_id": r.token_id, "tag": str(r.tag), "confidence": r.confidence}
            for r in pred.tags
        ],
    }


def read_predictions(path: str | Path) -> PredictionFile:
    return predictions_from_dict(load_json(path), ctx=str(path))


def write_predictions(pred: PredictionFile, path: str | Path) -> None:
    dump_json(predictions_to_dict(pred), path)


# --- Extracted entities (pipeline output) -----------------------------------

@dataclass(frozen=True)
class EntityRecord:
    span: EntitySpan
    text: str


@dataclass(frozen=True)
class EntityFile:
    page_no: int
    entities: tuple[EntityRecord, ...]


def entities_from_dict(data: dict, ctx: str = "entities") -> EntityFile:
    _check_version(data, ctx)
    _warn_unknown(data, {"schema_version", "page_no", "entities"}, ctx)
    page_no = _req(data, "page_no", int, ctx)
    records: list[EntityRecord] = []
    for i, rec in enumerate(_req(data, "entities", list, ctx)):
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: entity record {i} must be an object")
        etype = _entity_type(rec.get("type"), f"{ctx} entity {i}")
        tids = _token_ids(rec.get("token_ids"), f"{ctx} entity {i}")
        text = _req(rec, "text", str, f"{ctx} entity {i}")
        try:
            span = EntitySpan(etype, tids, SpanSource.CORRECTED)
        except InputError as exc:
            raise SchemaError(f"{ctx} entity {i}: {exc}") from exc
        records.append(EntityRecord(span, text))
    return EntityFile(page_no, tuple(records))


def entities_to_dict(page: Page, spans: list[EntitySpan] | tuple[EntitySpan, ...]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "page_no": page.page_no,
        "entities": [
            {"type": s.entity_type.value, "token_ids": list(s.token_ids),
             "text": entity_text(s, page)}
            for s in spans
        ],
    }


def read_entities(path: str | Path) -> EntityFile:
    return entities_from_dict(load_json(path), ctx=str(path))


def write_entities(page: Page, spans: list[EntitySpan] | tuple[EntitySpan, ...],
                   path: str | Path) -> None:
    dump_json(entities_to_dict(page, spans), path)


# --- Evaluation report ------------------------------------------------------

_COUNT_FIELDS = ("COR", "PAR", "INC", "MIS", "SPU", "possible", "actual")
_METRIC_FIELDS = ("precision", "recall", "f1")


def report_from_dict(data: dict, ctx: str = "report") -> dict:
    """Validate a report's shape and return it as a plain dict."""
    _check_version(data, ctx)
    known = {"schema_version", "mode", "variant", "pages", "per_type", "overall"}
    _warn_unknown(data, known, ctx)
    mode = _req(data, "mode", str, ctx)
    if mode not in ("standard", "paper"):
        raise SchemaError(f"{ctx}: unknown mode {mode!r}")
    per_type = _req(data, "per_type", dict, ctx)
    for name, rec in per_type.items():
        _entity_type(name, ctx)
        if not isinstance(rec, dict):
            raise SchemaError(f"{ctx}: per_type[{name}] must be an object")
        for fieldname in _COUNT_FIELDS:
            value = _req(rec, fieldname, int, f"{ctx} {name}")
            if value < 0:
                raise SchemaError(f"{ctx} {name}: {fieldname} is negative")
        for fieldname in _METRIC_FIELDS:
            _req(rec, fieldname, (int, float), f"{ctx} {name}")
    return data


def read_report(path: str | Path) -> dict:
    return report_from_dict(load_json(path), ctx=str(path))


def write_report(report: dict, path: str | Path) -> None:
    dump_json(report, path)
