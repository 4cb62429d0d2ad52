"""Core value types: geometry, page structure, entity types, BIO tags, spans.

Everything here is an immutable value; mutation happens by constructing new
objects. Invariants are enforced at construction so downstream code can rely
on them without re-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import InputError, IntegrityError

_GEOM_TOL = 1e-9  # float slack for containment checks on round-tripped boxes


class Category(str, Enum):
    PATIENT = "Patient"
    PHYSICIAN = "Physician"
    EXAM = "Exam"


class EntityType(str, Enum):
    """The eight extraction targets."""

    PATIENT_NAME = "PatientName"
    PATIENT_DOB = "PatientDob"
    PATIENT_GENDER = "PatientGender"
    PATIENT_ADDRESS = "PatientAddress"
    PHYSICIAN_NAME = "PhysicianName"
    PHYSICIAN_ADDRESS = "PhysicianAddress"
    EXAM_PROCEDURE = "ExamProcedure"
    EXAM_REASON = "ExamReason"

    @property
    def category(self) -> Category:
        if self in (EntityType.PATIENT_NAME, EntityType.PATIENT_DOB,
                    EntityType.PATIENT_GENDER, EntityType.PATIENT_ADDRESS):
            return Category.PATIENT
        if self in (EntityType.PHYSICIAN_NAME, EntityType.PHYSICIAN_ADDRESS):
            return Category.PHYSICIAN
        return Category.EXAM


ADDRESS_TYPES = frozenset({EntityType.PATIENT_ADDRESS, EntityType.PHYSICIAN_ADDRESS})
NAME_TYPES = frozenset({EntityType.PATIENT_NAME, EntityType.PHYSICIAN_NAME})
EXAM_TYPES = frozenset({EntityType.EXAM_PROCEDURE, EntityType.EXAM_REASON})
# Per-page single-value types: everything that is not free-repeating exam text.
SINGLETON_TYPES = tuple(t for t in EntityType if t.category is not Category.EXAM)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in page-normalized coordinates, origin top-left."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        for name, v in (("x0", self.x0), ("y0", self.y0), ("x1", self.x1), ("y1", self.y1)):
            if not isinstance(v, (int, float)) or v != v:  # NaN guard
                raise InputError(f"bbox {name} is not a finite number: {v!r}")
        if not (0.0 <= self.x0 <= self.x1 <= 1.0):
            raise InputError(f"bbox x order/range violated: x0={self.x0} x1={self.x1}")
        if not (0.0 <= self.y0 <= self.y1 <= 1.0):
            raise InputError(f"bbox y order/range violated: y0={self.y0} y1={self.y1}")

    @property
    def x_center(self) -> float:
        return (self.x0 + self.x1) / 2.0

    @property
    def y_center(self) -> float:
        return (self.y0 + self.y1) / 2.0

    def contains(self, other: "BBox") -> bool:
        return (self.x0 <= other.x0 + _GEOM_TOL and self.y0 <= other.y0 + _GEOM_TOL
                and self.x1 >= other.x1 - _GEOM_TOL and self.y1 >= other.y1 - _GEOM_TOL)

    def union(self, other: "BBox") -> "BBox":
        return BBox(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))


def union_bbox(boxes: Iterable[BBox]) -> BBox:
    boxes = list(boxes)
    if not boxes:
        raise InputError("cannot union an empty set of boxes")
    out = boxes[0]
    for b in boxes[1:]:
        out = out.union(b)
    return out


@dataclass(frozen=True)
class Token:
    id: int
    text: str
    bbox: BBox
    line_id: int

    def __post_init__(self) -> None:
        if self.id < 0:
            raise InputError(f"token id must be non-negative, got {self.id}")
        if not self.text:
            raise InputError(f"token {self.id} has empty text")


@dataclass(frozen=True)
class Line:
    id: int
    token_ids: tuple[int, ...]
    bbox: BBox

    def __post_init__(self) -> None:
        if not self.token_ids:
            raise InputError(f"line {self.id} has no tokens")
        if len(set(self.token_ids)) != len(self.token_ids):
            raise InputError(f"line {self.id} lists duplicate token ids")


@dataclass(frozen=True)
class Page:
    """One OCR page. Tokens and lines cross-validate at construction."""

    page_no: int
    width_px: int
    height_px: int
    tokens: tuple[Token, ...]
    lines: tuple[Line, ...]
    _token_index: dict[int, Token] = field(init=False, repr=False, compare=False)
    _line_index: dict[int, Line] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.page_no < 1:
            raise InputError(f"page_no must be >= 1, got {self.page_no}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise InputError("page pixel dimensions must be positive")
        tok_index: dict[int, Token] = {}
        for tok in self.tokens:
            if tok.id in tok_index:
                raise IntegrityError(f"duplicate token id {tok.id} on page {self.page_no}")
            tok_index[tok.id] = tok
        line_index: dict[int, Line] = {}
        for line in self.lines:
            if line.id in line_index:
                raise IntegrityError(f"duplicate line id {line.id} on page {self.page_no}")
            line_index[line.id] = line
        # Line membership must partition the token set.
        seen: set[int] = set()
        for line in self.lines:
            for tid in line.token_ids:
                tok = tok_index.get(tid)
                if tok is None:
                    raise IntegrityError(f"line {line.id} references missing token {tid}")
                if tok.line_id != line.id:
                    raise IntegrityError(
                        f"token {tid} claims line {tok.line_id} but is listed by line {line.id}")
                if tid in seen:
                    raise IntegrityError(f"token {tid} belongs to more than one line")
                seen.add(tid)
                if not line.bbox.contains(tok.bbox):
                    raise IntegrityError(f"line {line.id} bbox does not contain token {tid}")
            xs = [tok_index[t].bbox.x0 for t in line.token_ids]
            if xs != sorted(xs):
                raise IntegrityError(f"line {line.id} token ids are not ordered by x0")
        if seen != set(tok_index):
            orphans = sorted(set(tok_index) - seen)
            raise IntegrityError(f"tokens not covered by any line: {orphans}")
        object.__setattr__(self, "_token_index", tok_index)
        object.__setattr__(self, "_line_index", line_index)

    def token(self, token_id: int) -> Token:
        tok = self._token_index.get(token_id)
        if tok is None:
            raise IntegrityError(f"token id {token_id} not on page {self.page_no}")
        return tok

    def has_token(self, token_id: int) -> bool:
        return token_id in self._token_index

    def line(self, line_id: int) -> Line:
        line = self._line_index.get(line_id)
        if line is None:
            raise IntegrityError(f"line id {line_id} not on page {self.page_no}")
        return line


class TagKind(str, Enum):
    B = "B"
    I = "I"
    O = "O"


@dataclass(frozen=True)
class BioTag:
    """One of the 17 tag values: B-/I- per entity type, plus O."""

    kind: TagKind
    entity_type: EntityType | None = None

    def __post_init__(self) -> None:
        if self.kind is TagKind.O and self.entity_type is not None:
            raise InputError("O tag cannot carry an entity type")
        if self.kind is not TagKind.O and self.entity_type is None:
            raise InputError(f"{self.kind.value} tag requires an entity type")

    def __str__(self) -> str:
        if self.kind is TagKind.O:
            return "O"
        return f"{self.kind.value}-{self.entity_type.value}"

    @classmethod
    def parse(cls, text: str) -> "BioTag":
        if text == "O":
            return cls(TagKind.O)
        if len(text) > 2 and text[1] == "-" and text[0] in ("B", "I"):
            try:
                etype = EntityType(text[2:])
            except ValueError:
                raise InputError(f"unknown entity type in tag {text!r}") from None
            return cls(TagKind(text[0]), etype)
        raise InputError(f"malformed BIO tag {text!r}")


O_TAG = BioTag(TagKind.O)
ALL_TAGS: tuple[BioTag, ...] = (O_TAG,) + tuple(
    BioTag(kind, et) for et in EntityType for kind in (TagKind.B, TagKind.I))


class SpanSource(str, Enum):
    GOLD = "gold"
    PREDICTED = "predicted"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class EntitySpan:
    """A typed set of token ids. Gold, raw predictions, and rule-corrected
    entities all share this shape; only `source` distinguishes them."""

    entity_type: EntityType
    token_ids: tuple[int, ...]
    source: SpanSource

    def __post_init__(self) -> None:
        if not self.token_ids:
            raise InputError("entity span has no tokens")
        if len(set(self.token_ids)) != len(self.token_ids):
            raise InputError(f"entity span lists duplicate token ids: {self.token_ids}")

    @property
    def token_set(self) -> frozenset[int]:
        return frozenset(self.token_ids)


def entity_text(span: EntitySpan, page: Page) -> str:
    """Member token texts joined by single spaces, in the span's stored
    (reading) order. Dangling ids raise IntegrityError."""
    return " ".join(page.token(tid).text for tid in span.token_ids)


def sort_span(span: EntitySpan, reading_order: dict[int, int]) -> EntitySpan:
    """Reorder a span's token ids by reading-order rank."""
    missing = [t for t in span.token_ids if t not in reading_order]
    if missing:
        raise IntegrityError(f"span tokens missing from reading order: {missing}")
    ordered = tuple(sorted(span.token_ids, key=lambda t: reading_order[t]))
    if ordered == span.token_ids:
        return span
    return EntitySpan(span.entity_type, ordered, span.source)
