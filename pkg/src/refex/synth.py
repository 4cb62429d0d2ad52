"""Deterministic synthetic referral pages with gold annotations.

Five layout kinds exercise the grouping and decoding paths; a noise profile
injects the defects the cleanup rules exist for (field labels glued into
gold spans, truncated values, phone numbers inside addresses). Every page is
a pure function of (seed, template): the same inputs produce byte-identical
artifacts. All vocabulary is invented; dates fall in 1930-2010.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import io as refex_io
from .errors import InputError
from .model import (ADDRESS_TYPES, BBox, EntitySpan, EntityType, Line, Page,
                    SpanSource, Token)
from .rules import RuleConfig
from .tagging import FIELD_LABEL_PHRASES

CHAR_W = 0.0055
TOKEN_H = 0.012
TOKEN_GAP = 0.005
ROW_DY = 0.03          # vertical pitch between field blocks
STACK_DY = 0.003       # label-above: value line sits this far below its label
JITTER_CAP = 0.001     # keeps stacked lines chained and rows separated
PAGE_MARGIN_X = 0.06
PAGE_TOP_Y = 0.06
TWO_COLUMN_X = 0.56    # right column start; leaves a wide gutter

FIRST_NAMES = ("Alba", "Boris", "Carmen", "Derek", "Elena", "Felix", "Greta",
               "Hugo", "Irma", "Jonas", "Katya", "Lionel", "Mirta", "Nestor",
               "Opal", "Pavel", "Quinn", "Rosa", "Stefan", "Talia")
LAST_NAMES = ("Abalone", "Birchwood", "Cormorant", "Dunlop", "Ellery",
              "Fairbanks", "Grimaldi", "Hollister", "Ivering", "Juniper",
              "Kestrel", "Loxley", "Marlowe", "Northgate", "Oakhurst",
              "Pemberton", "Quill", "Ransome", "Silverton", "Thackeray")
STREETS = ("Lamar Blvd", "Maple Ave", "Cedar Ln", "Juniper Dr", "Willow Way",
           "Crescent Rd", "Foxglove St", "Harbor Pkwy")
CITIES = ("Brookfield", "Marwick", "Ashgrove", "Pinehurst", "Tallow Creek")
STATES = ("TX", "CT", "OH", "NM", "VT")
CREDENTIAL_POOL = ("MD", "DO", "NP", "PA-C", "DPM")
EXAM_PROCEDURES = ("MRI BRAIN WITHOUT CONTRAST", "CT CHEST WITH CONTRAST",
                   "XRAY LEFT KNEE", "ULTRASOUND ABDOMEN", "MRI LUMBAR SPINE",
                   "ECHO COMPLETE")
EXAM_REASONS = ("Chronic headaches for three months",
                "Persistent lower back pain",
                "Follow up of pulmonary nodule",
                "Intermittent dizziness and nausea",
                "Recurring knee swelling")
HEADER_FILLERS = (("NORTHSHORE", "IMAGING", "REFERRAL"),
                  ("RIVERBEND", "RADIOLOGY", "INTAKE"),
                  ("WESTFIELD", "DIAGNOSTIC", "CENTER"))
FOOTER_FILLERS = (("Please", "review", "and", "confirm"),
                  ("Send", "records", "with", "this", "form"),
                  ("Thank", "you"))


class LayoutKind(str, Enum):
    SINGLE_COLUMN_FORM = "single-column-form"
    TWO_COLUMN = "two-column"
    LABEL_ABOVE = "label-above"
    LABEL_LEFT = "label-left"
    MIXED = "mixed"


@dataclass(frozen=True)
class NoiseProfile:
    bbox_jitter: float = 0.0
    token_dropout: float = 0.0
    label_noise: float = 0.0
    inject_phone: bool = False
    inject_i_start: bool = False

    def __post_init__(self) -> None:
        for name in ("bbox_jitter", "token_dropout", "label_noise"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")


ZERO_NOISE = NoiseProfile()
ALL_FIELDS = tuple(EntityType)


@dataclass(frozen=True)
class PageTemplate:
    kind: LayoutKind
    fields: tuple[EntityType, ...] = ALL_FIELDS
    noise: NoiseProfile = ZERO_NOISE

    def __post_init__(self) -> None:
        if not self.fields:
            raise InputError("template needs at least one field")
        if len(set(self.fields)) != len(self.fields):
            raise InputError("template fields must be unique")
        # Rows sit ROW_DY apart; jitter beyond a quarter of that can fuse them.
        if self.noise.bbox_jitter >= ROW_DY / 4:
            raise InputError(
                f"bbox_jitter must stay below {ROW_DY / 4} (row spacing / 4)")


@dataclass(frozen=True)
class PageFixture:
    page: Page
    annotations: refex_io.AnnotationFile          # as written (may carry label noise)
    clean_annotations: refex_io.AnnotationFile    # pre-noise truth
    injections: dict


class _Builder:
    def __init__(self, rng: random.Random, jitter: float):
        self.rng = rng
        self.jitter = min(jitter, JITTER_CAP)
        self._texts: list[str] = []
        self._boxes: list[BBox] = []
        self._line_of: list[int] = []
        self._droppable: set[int] = set()
        self._next_line = 0

    def add_line(self, texts: Sequence[str], x: float, y: float,
                 droppable: bool = False) -> list[int]:
        if not texts:
            raise InputError("a line needs at least one token")
        dy = self.rng.uniform(-self.jitter, self.jitter) if self.jitter else 0.0
        y0 = round(y + dy, 6)
        y1 = round(y0 + TOKEN_H, 6)
        cursor = x
        ids: list[int] = []
        for text in texts:
            width = 0.004 + CHAR_W * len(text)
            tid = len(self._texts)
            self._texts.append(text)
            self._boxes.append(BBox(round(cursor, 6), y0, round(cursor + width, 6), y1))
            self._line_of.append(self._next_line)
            if droppable:
                self._droppable.add(tid)
            ids.append(tid)
            cursor += width + TOKEN_GAP
        self._next_line += 1
        return ids

    def text(self, tid: int) -> str:
        return self._texts[tid]

    def build(self, page_no: int, dropout: float) -> tuple[Page, int]:
        dropped = {tid for tid in sorted(self._droppable)
                   if dropout and self.rng.random() < dropout}
        tokens: list[Token] = []
        by_line: dict[int, list[Token]] = {}
        for tid, text in enumerate(self._texts):
            if tid in dropped:
                continue
            tok = Token(tid, text, self._boxes[tid], self._line_of[tid])
            tokens.append(tok)
            by_line.setdefault(self._line_of[tid], []).append(tok)
        lines = []
        for lid in sorted(by_line):
            members = sorted(by_line[lid], key=lambda t: (t.bbox.x0, t.id))
            bbox = members[0].bbox
            for tok in members[1:]:
                bbox = bbox.union(tok.bbox)
            lines.append(Line(lid, tuple(t.id for t in members), bbox))
        page = Page(page_no, 1700, 2200, tuple(tokens), tuple(lines))
        return page, len(dropped)


@dataclass
class _Field:
    """Everything the noise stage needs to know about one rendered field."""

    etype: EntityType
    gold_ids: list[int]
    label_ids: list[int]
    label_texts: list[str]
    lead_ids: list[int] = dc_field(default_factory=list)  # street number/cardinal prefix
    has_credential: bool = False
    plain_two_token_name: bool = False


def _pick_name(rng: random.Random) -> list[str]:
    return [rng.choice(FIRST_NAMES), rng.choice(LAST_NAMES)]


def _pick_date(rng: random.Random) -> str:
    return f"{rng.randint(1, 12):02d}/{rng.randint(1, 28):02d}/{rng.randint(1930, 2010)}"


def _pick_address(rng: random.Random) -> tuple[list[str], int]:
    """Value tokens plus the length of the numeric/cardinal lead prefix."""
    number = str(rng.randint(1, 9999))
    tokens = [number]
    lead = 1
    if rng.random() < 0.3:
        tokens.append(rng.choice(("N", "S", "E", "W")))
        lead = 2
    tokens.extend(rng.choice(STREETS).split())
    tokens.extend(rng.choice(CITIES).split())
    tokens.append(rng.choice(STATES))
    tokens.append(str(rng.randint(10000, 99999)))
    return tokens, lead


def _pick_phone(rng: random.Random) -> list[str]:
    area = rng.randint(200, 989)
    mid = rng.randint(200, 999)
    last = rng.randint(0, 9999)
    variant = rng.randrange(6)
    if variant == 0:
        return ["Ph:", f"({area})", f"{mid}-{last:04d}"]
    if variant == 1:
        return ["Phone:", f"{area}-{mid}-{last:04d}"]
    if variant == 2:
        return [f"({area})", f"{mid}-{last:04d}"]
    if variant == 3:
        return [f"{area}.{mid}.{last:04d}"]
    if variant == 4:
        return ["Fax:", f"{area}{mid}{last:04d}"]
    return ["Fax", f"({area})", f"{mid}-{last:04d}"]


def _label_for(rng: random.Random, etype: EntityType) -> list[str]:
    phrases = FIELD_LABEL_PHRASES[etype]
    if etype is EntityType.PATIENT_ADDRESS:
        phrases = phrases[:3]  # the split-row captions are laid out separately
    return rng.choice(phrases).split()


def _render_value(rng: random.Random, etype: EntityType) -> tuple[list[str], dict]:
    """Value tokens and metadata: gold offsets, lead length, credential flag."""
    meta: dict = {"gold_offsets": None, "lead": 0, "has_credential": False,
                  "plain_two_token_name": False}
    if etype is EntityType.PATIENT_NAME:
        tokens = _pick_name(rng)
        meta["plain_two_token_name"] = True
    elif etype is EntityType.PATIENT_DOB:
        tokens = [_pick_date(rng)]
    elif etype is EntityType.PATIENT_GENDER:
        tokens = [rng.choice(("M", "F", "Male", "Female"))]
    elif etype in ADDRESS_TYPES:
        tokens, lead = _pick_address(rng)
        meta["lead"] = lead
    elif etype is EntityType.PHYSICIAN_NAME:
        tokens = _pick_name(rng)
        creds = rng.sample(CREDENTIAL_POOL, rng.randrange(0, 3))
        if creds:
            tokens.extend(creds)
            meta["has_credential"] = True
        else:
            meta["plain_two_token_name"] = True
        if rng.random() < 0.35:
            tokens = ["Dr."] + tokens
            meta["gold_offsets"] = list(range(1, len(tokens)))
    elif etype is EntityType.EXAM_PROCEDURE:
        tokens = rng.choice(EXAM_PROCEDURES).split()
    else:
        tokens = rng.choice(EXAM_REASONS).split()
    return tokens, meta


class _PageAssembler:
    """Lays blocks onto the page and tracks field metadata for noise."""

    def __init__(self, rng: random.Random, template: PageTemplate):
        self.rng = rng
        self.template = template
        self.builder = _Builder(rng, template.noise.bbox_jitter)
        self.fields: list[_Field] = []
        self.phone_ids: list[int] = []
        self.y = PAGE_TOP_Y

    def advance(self) -> float:
        y = self.y
        self.y += ROW_DY
        return y

    def filler(self, texts: Sequence[str], x: float = PAGE_MARGIN_X) -> None:
        self.builder.add_line(list(texts), x, self.advance(), droppable=True)

    def field(self, etype: EntityType, x: float, *, stacked: bool,
              y: float | None = None) -> None:
        rng = self.rng
        label = _label_for(rng, etype)
        value, meta = _render_value(rng, etype)
        phone = (_pick_phone(rng)
                 if self.template.noise.inject_phone and etype in ADDRESS_TYPES
                 else [])
        y0 = self.advance() if y is None else y
        if stacked:
            label_ids = self.builder.add_line(label, x, y0)
            value_ids = self.builder.add_line(value + phone, x, y0 + STACK_DY)
        else:
            ids = self.builder.add_line(label + value + phone, x, y0)
            label_ids = ids[:len(label)]
            value_ids = ids[len(label):]
        phone_ids = value_ids[len(value):]
        value_ids = value_ids[:len(value)]
        self.phone_ids.extend(phone_ids)
        offsets = meta["gold_offsets"]
        gold_ids = [value_ids[k] for k in offsets] if offsets else list(value_ids)
        self.fields.append(_Field(
            etype=etype, gold_ids=gold_ids, label_ids=list(label_ids),
            label_texts=label, lead_ids=gold_ids[:meta["lead"]],
            has_credential=meta["has_credential"],
            plain_two_token_name=meta["plain_two_token_name"]))

    def split_address(self, etype: EntityType) -> None:
        """The two-row address pattern: street on one captioned row, the
        city/state/zip remainder on the next."""
        rng = self.rng
        value, lead = _pick_address(rng)
        street_len = lead + 2  # number (+cardinal) plus the two street words
        phone = _pick_phone(rng) if self.template.noise.inject_phone else []
        row1 = self.builder.add_line(
            ["Address", "line", "1:"] + value[:street_len], PAGE_MARGIN_X, self.advance())
        row2 = self.builder.add_line(
            ["City,", "State,", "Zip:"] + value[street_len:] + phone,
            PAGE_MARGIN_X, self.advance())
        value2_end = len(row2) - len(phone)
        gold_ids = list(row1[3:]) + list(row2[3:value2_end])
        self.phone_ids.extend(row2[value2_end:])
        self.fields.append(_Field(
            etype=etype, gold_ids=gold_ids, label_ids=list(row1[:3]),
            label_texts=["Address", "line", "1:"], lead_ids=gold_ids[:lead]))


def _assemble(rng: random.Random, template: PageTemplate) -> _PageAssembler:
    asm = _PageAssembler(rng, template)
    kind = template.kind
    fields = list(template.fields)
    if kind is LayoutKind.LABEL_LEFT:
        for etype in fields:
            asm.field(etype, PAGE_MARGIN_X, stacked=False)
    elif kind is LayoutKind.LABEL_ABOVE:
        for etype in fields:
            asm.field(etype, PAGE_MARGIN_X, stacked=True)
    elif kind is LayoutKind.SINGLE_COLUMN_FORM:
        asm.filler(rng.choice(HEADER_FILLERS))
        asm.filler(["Date:", _pick_date(rng)])
        for etype in fields:
            asm.field(etype, PAGE_MARGIN_X, stacked=False)
        asm.filler(rng.choice(FOOTER_FILLERS))
    elif kind is LayoutKind.TWO_COLUMN:
        left = [t for t in fields if t in (EntityType.PATIENT_NAME,
                                           EntityType.PATIENT_DOB,
                                           EntityType.PATIENT_GENDER)]
        right = [t for t in fields if t in (EntityType.PHYSICIAN_NAME,
                                            EntityType.EXAM_PROCEDURE,
                                            EntityType.EXAM_REASON)]
        below = [t for t in fields if t not in left and t not in right]
        for i in range(max(len(left), len(right))):
            y = asm.advance()
            if i < len(left):
                asm.field(left[i], PAGE_MARGIN_X, stacked=False, y=y)
            if i < len(right):
                asm.field(right[i], TWO_COLUMN_X, stacked=False, y=y)
        for etype in below:
            asm.field(etype, PAGE_MARGIN_X, stacked=False)
    elif kind is LayoutKind.MIXED:
        asm.filler(rng.choice(HEADER_FILLERS))
        for etype in fields:
            if etype is EntityType.PATIENT_ADDRESS:
                asm.split_address(etype)
            elif etype in (EntityType.PATIENT_NAME, EntityType.PATIENT_DOB):
                asm.field(etype, PAGE_MARGIN_X, stacked=True)
            else:
                asm.field(etype, PAGE_MARGIN_X, stacked=False)
        if EntityType.PATIENT_NAME in template.fields:
            # Second occurrence of the patient name exercises majority voting.
            patient = next(f for f in asm.fields if f.etype is EntityType.PATIENT_NAME)
            repeat_ids = asm.builder.add_line(
                ["Patient:"] + [asm.builder.text(t) for t in patient.gold_ids],
                PAGE_MARGIN_X, asm.advance())
            asm.fields.append(_Field(
                etype=EntityType.PATIENT_NAME, gold_ids=list(repeat_ids[1:]),
                label_ids=[repeat_ids[0]], label_texts=["Patient:"],
                plain_two_token_name=True))
        asm.filler(rng.choice(FOOTER_FILLERS))
    else:
        raise InputError(f"unknown layout kind {kind!r}")
    return asm


_NOISE_GLUE = "glue_label"
_NOISE_TRUNCATE = "truncate_name"
_NOISE_LEAD_DROP = "drop_address_lead"
_NOISE_RETYPE = "retype_physician"


def _noise_plan(rng: random.Random, fields: list[_Field],
                rate: float, rule_cfg: RuleConfig) -> list[tuple[int, str]]:
    """Pick one correctable defect per selected field, deterministically."""
    plan: list[tuple[int, str]] = []
    for idx, fld in enumerate(fields):
        if rate <= 0 or rng.random() >= rate:
            continue
        options: list[str] = []
        if fld.etype in (EntityType.PATIENT_NAME, EntityType.PHYSICIAN_NAME):
            if fld.plain_two_token_name and len(fld.gold_ids) == 2:
                options.append(_NOISE_TRUNCATE)
            if fld.etype is EntityType.PHYSICIAN_NAME and fld.has_credential:
                options.append(_NOISE_RETYPE)
        if fld.etype in ADDRESS_TYPES and fld.lead_ids:
            options.append(_NOISE_LEAD_DROP)
        if (fld.label_ids
                and rule_cfg.is_stop_word(fld.etype, fld.label_texts[-1])):
            options.append(_NOISE_GLUE)
        if options:
            plan.append((idx, rng.choice(options)))
    return plan


def _apply_noise(fields: list[_Field], plan: list[tuple[int, str]],
                 ) -> tuple[list[EntitySpan], list[dict]]:
    injected: list[dict] = []
    spans: list[EntitySpan] = []
    noisy: dict[int, tuple[EntityType, list[int]]] = {}
    for idx, kind in plan:
        fld = fields[idx]
        if kind == _NOISE_GLUE:
            noisy[idx] = (fld.etype, [fld.label_ids[-1]] + fld.gold_ids)
        elif kind == _NOISE_TRUNCATE:
            noisy[idx] = (fld.etype, fld.gold_ids[1:])
        elif kind == _NOISE_LEAD_DROP:
            noisy[idx] = (fld.etype, fld.gold_ids[len(fld.lead_ids):])
        elif kind == _NOISE_RETYPE:
            noisy[idx] = (EntityType.PATIENT_NAME, fld.gold_ids)
        injected.append({"field": idx, "type": fld.etype.value, "kind": kind})
    for idx, fld in enumerate(fields):
        etype, ids = noisy.get(idx, (fld.etype, fld.gold_ids))
        spans.append(EntitySpan(etype, tuple(ids), SpanSource.GOLD))
    return spans, injected


def generate_page(seed: int, template: PageTemplate, page_no: int = 1) -> PageFixture:
    """Deterministic (seed, template) -> page + gold + injection record."""
    # str seeds hash via sha512, stable across processes (tuple seeds are not)
    rng = random.Random(f"refex-page-{seed}")
    asm = _assemble(rng, template)
    page, dropped = asm.builder.build(page_no, template.noise.token_dropout)

    clean_spans = tuple(EntitySpan(f.etype, tuple(f.gold_ids), SpanSource.GOLD)
                        for f in asm.fields)
    plan = _noise_plan(rng, asm.fields, template.noise.label_noise, RuleConfig())
    noisy_spans, injected = _apply_noise(asm.fields, plan)

    clean = refex_io.AnnotationFile(page_no, clean_spans)
    noisy = refex_io.AnnotationFile(page_no, tuple(noisy_spans))
    injections = {
        "template": template.kind.value,
        "phone_token_ids": sorted(asm.phone_ids),
        "label_noise": injected,
        "label_noise_count": len(injected),
        "i_start": template.noise.inject_i_start,
        "dropped_token_count": dropped,
    }
    return PageFixture(page, noisy, clean, injections)


@dataclass(frozen=True)
class CorpusEntry:
    page_file: str
    gold_file: str
    template: str
    page_seed: int
    injections: dict


@dataclass(frozen=True)
class CorpusManifest:
    seed: int
    n_pages: int
    entries: tuple[CorpusEntry, ...]

    def to_dict(self) -> dict:
        return {
            "schema_version": refex_io.SCHEMA_VERSION,
            "seed": self.seed,
            "n_pages": self.n_pages,
            "entries": [
                {"page_file": e.page_file, "gold_file": e.gold_file,
                 "template": e.template, "page_seed": e.page_seed,
                 "injections": e.injections}
                for e in self.entries
            ],
        }


def generate_corpus(seed: int, n_pages: int, templates: Sequence[PageTemplate],
                    out_dir: str | Path | None = None) -> CorpusManifest:
    """Generate n_pages fixtures cycling the template mix via a seeded RNG.
    With out_dir set, writes page/gold files plus manifest.json."""
    if n_pages < 1:
        raise InputError("n_pages must be >= 1")
    if not templates:
        raise InputError("template mix must not be empty")
    master = random.Random(f"refex-corpus-{seed}")
    entries: list[CorpusEntry] = []
    fixtures: list[PageFixture] = []
    for i in range(n_pages):
        template = templates[master.randrange(len(templates))]
        page_seed = master.getrandbits(32)
        fixture = generate_page(page_seed, template, page_no=i + 1)
        fixtures.append(fixture)
        entries.append(CorpusEntry(
            page_file=f"page_{i + 1:04d}.ocr.json",
            gold_file=f"page_{i + 1:04d}.gold.json",
            template=template.kind.value,
            page_seed=page_seed,
            injections=fixture.injections))
    manifest = CorpusManifest(seed, n_pages, tuple(entries))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for fixture, entry in zip(fixtures, manifest.entries):
            refex_io.write_page(fixture.page, out / entry.page_file)
            refex_io.write_annotations(fixture.annotations, out / entry.gold_file)
        refex_io.dump_json(manifest.to_dict(), out / "manifest.json")
    return manifest


DEFAULT_MIX = tuple(PageTemplate(kind) for kind in LayoutKind)
