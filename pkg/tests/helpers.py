"""Small page builders shared across test modules."""

from __future__ import annotations

from refex.grouping import GroupingConfig, group_page
from refex.io import PredictionFile, TokenPrediction
from refex.model import (BBox, BioTag, EntitySpan, EntityType, Line, Page,
                         SpanSource, Token)

CHAR_W = 0.006
TOKEN_H = 0.012
GAP = 0.005


def build_page(rows: list[list[str]], *, page_no: int = 1, x0: float = 0.05,
               y0: float = 0.1, dy: float = 0.03) -> Page:
    """One OCR line per row of texts, rows stacked dy apart."""
    tokens: list[Token] = []
    lines: list[Line] = []
    tid = 0
    for lid, texts in enumerate(rows):
        y = y0 + lid * dy
        cursor = x0
        ids: list[int] = []
        for text in texts:
            w = 0.004 + CHAR_W * len(text)
            tokens.append(Token(tid, text, BBox(cursor, y, cursor + w, y + TOKEN_H), lid))
            ids.append(tid)
            tid += 1
            cursor += w + GAP
        boxes = [tokens[i].bbox for i in ids]
        bbox = BBox(min(b.x0 for b in boxes), min(b.y0 for b in boxes),
                    max(b.x1 for b in boxes), max(b.y1 for b in boxes))
        lines.append(Line(lid, tuple(ids), bbox))
    return Page(page_no, 1000, 1000, tuple(tokens), tuple(lines))


def reading_order(page: Page, cfg: GroupingConfig | None = None) -> dict[int, int]:
    return group_page(page, cfg or GroupingConfig()).reading_order


def span(etype: EntityType, ids, source: SpanSource = SpanSource.PREDICTED) -> EntitySpan:
    return EntitySpan(etype, tuple(ids), source)


def predictions_for(page: Page, tag_strings: list[str]) -> PredictionFile:
    """tag_strings[i] is the tag for token id i, e.g. 'B-PatientName' or 'O'."""
    assert len(tag_strings) == len(page.tokens)
    records = tuple(TokenPrediction(i, BioTag.parse(s)) for i, s in enumerate(tag_strings))
    return PredictionFile(page.page_no, records)
