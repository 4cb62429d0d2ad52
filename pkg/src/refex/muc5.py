"""MUC-5 style scoring of extracted entities against gold annotations.

Pages contribute COR/PAR/INC/MIS/SPU counts per entity type; counts reduce
to precision/recall/F1 in one of two modes. Mode "paper" divides precision
by possible and recall by actual, as some reported figures in this domain
do; mode "standard" (the default) swaps the denominators back to the usual
definition. Both are kept because the counts are identical and only the
division differs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import InputError
from .model import Category, EntitySpan, EntityType

MODES = ("standard", "paper")
DEFAULT_MODE = "standard"


class MucClass(Enum):
    COR = 0
    PAR = 1
    INC = 2


@dataclass(frozen=True)
class MucCounts:
    COR: int = 0
    PAR: int = 0
    INC: int = 0
    MIS: int = 0
    SPU: int = 0

    def __post_init__(self) -> None:
        for name in ("COR", "PAR", "INC", "MIS", "SPU"):
            if getattr(self, name) < 0:
                raise InputError(f"negative count {name}={getattr(self, name)}")

    @property
    def possible(self) -> int:
        return self.COR + self.PAR + self.INC + self.MIS

    @property
    def actual(self) -> int:
        return self.COR + self.PAR + self.INC + self.SPU

    def __add__(self, other: "MucCounts") -> "MucCounts":
        return MucCounts(self.COR + other.COR, self.PAR + other.PAR,
                         self.INC + other.INC, self.MIS + other.MIS,
                         self.SPU + other.SPU)


def classify(pred: EntitySpan, gold: EntitySpan) -> MucClass:
    """COR: same type, same token set. PAR: same type, overlap of at least
    half the gold tokens (boundary inclusive), sets not equal. Else INC."""
    if pred.entity_type is gold.entity_type:
        if pred.token_set == gold.token_set:
            return MucClass.COR
        overlap = len(pred.token_set & gold.token_set)
        if overlap >= 0.5 * len(gold.token_set):
            return MucClass.PAR
    return MucClass.INC


def _overlap(pred: EntitySpan, gold: EntitySpan) -> int:
    return len(pred.token_set & gold.token_set)


def score_page(pred_spans: Iterable[EntitySpan], gold_spans: Iterable[EntitySpan],
               ) -> dict[EntityType, MucCounts]:
    """Score one page's selected entities against its gold spans.

    Patient/physician types are one scoring unit per page: the selected
    value counts COR/PAR/INC against its best-matching gold instance (extra
    identical golds contribute nothing), MIS when only gold exists, SPU when
    only a prediction exists. Exam types are greedily matched one-to-one by
    best class, then largest overlap; leftovers count SPU/MIS individually.
    """
    preds_by_type: dict[EntityType, list[EntitySpan]] = {t: [] for t in EntityType}
    golds_by_type: dict[EntityType, list[EntitySpan]] = {t: [] for t in EntityType}
    for span in pred_spans:
        preds_by_type[span.entity_type].append(span)
    for span in gold_spans:
        golds_by_type[span.entity_type].append(span)

    out: dict[EntityType, MucCounts] = {}
    for etype in EntityType:
        preds = preds_by_type[etype]
        golds = golds_by_type[etype]
        if etype.category is Category.EXAM:
            out[etype] = _score_exam(preds, golds)
        else:
            out[etype] = _score_singleton(etype, preds, golds)
    return out


def _score_singleton(etype: EntityType, preds: list[EntitySpan],
                     golds: list[EntitySpan]) -> MucCounts:
    if len(preds) > 1:
        raise InputError(
            f"{etype.value}: {len(preds)} predictions on one page; selection "
            "must leave at most one")
    if not preds and not golds:
        return MucCounts()
    if not preds:
        return MucCounts(MIS=1)
    if not golds:
        return MucCounts(SPU=1)
    pred = preds[0]
    best = min(
        ((classify(pred, gold), -_overlap(pred, gold), idx)
         for idx, gold in enumerate(golds)),
        key=lambda item: (item[0].value, item[1], item[2]))
    return _one(best[0])


def _score_exam(preds: list[EntitySpan], golds: list[EntitySpan]) -> MucCounts:
    pairs = sorted(
        ((classify(pred, gold), -_overlap(pred, gold), p_idx, g_idx)
         for p_idx, pred in enumerate(preds)
         for g_idx, gold in enumerate(golds)),
        key=lambda item: (item[0].value, item[1], item[2], item[3]))
    counts = MucCounts()
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    for cls, _, p_idx, g_idx in pairs:
        if p_idx in used_pred or g_idx in used_gold:
            continue
        used_pred.add(p_idx)
        used_gold.add(g_idx)
        counts = counts + _one(cls)
    counts = counts + MucCounts(SPU=len(preds) - len(used_pred))
    counts = counts + MucCounts(MIS=len(golds) - len(used_gold))
    return counts


def _one(cls: MucClass) -> MucCounts:
    if cls is MucClass.COR:
        return MucCounts(COR=1)
    if cls is MucClass.PAR:
        return MucCounts(PAR=1)
    return MucCounts(INC=1)


def metrics(counts: MucCounts, mode: str = DEFAULT_MODE) -> dict:
    """Reduce counts to precision/recall/F1 under the given mode.

    A zero denominator pins the metric at 0, except the fully degenerate
    case (possible == actual == 0: nothing to find, nothing predicted) which
    scores 1.0 across the board and is flagged."""
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
    possible = counts.possible
    actual = counts.actual
    numerator = counts.COR + 0.5 * counts.PAR
    if possible == 0 and actual == 0:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0, "degenerate": True}
    if mode == "paper":
        precision = numerator / possible if possible else 0.0
        recall = numerator / actual if actual else 0.0
    else:
        precision = numerator / actual if actual else 0.0
        recall = numerator / possible if possible else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "degenerate": False}


def sum_counts(page_counts: Iterable[Mapping[EntityType, MucCounts]],
               ) -> dict[EntityType, MucCounts]:
    totals = {etype: MucCounts() for etype in EntityType}
    for page in page_counts:
        for etype, counts in page.items():
            totals[etype] = totals[etype] + counts
    return totals


def overall_counts(totals: Mapping[EntityType, MucCounts]) -> MucCounts:
    out = MucCounts()
    for counts in totals.values():
        out = out + counts
    return out


def build_report(page_counts: Iterable[Mapping[EntityType, MucCounts]],
                 mode: str = DEFAULT_MODE, variant: str = "default",
                 pages: int | None = None) -> dict:
    """Aggregate per-page counts into the report artifact."""
    page_list = list(page_counts)
    totals = sum_counts(page_list)
    per_type = {}
    for etype, counts in totals.items():
        entry = {"COR": counts.COR, "PAR": counts.PAR, "INC": counts.INC,
                 "MIS": counts.MIS, "SPU": counts.SPU,
                 "possible": counts.possible, "actual": counts.actual}
        entry.update(metrics(counts, mode))
        per_type[etype.value] = entry
    overall = overall_counts(totals)
    overall_entry = {"COR": overall.COR, "PAR": overall.PAR, "INC": overall.INC,
                     "MIS": overall.MIS, "SPU": overall.SPU,
                     "possible": overall.possible, "actual": overall.actual}
    overall_entry.update(metrics(overall, mode))
    return {
        "schema_version": "1",
        "mode": mode,
        "variant": variant,
        "pages": len(page_list) if pages is None else pages,
        "per_type": per_type,
        "overall": overall_entry,
    }


_CATEGORY_TYPES = {
    Category.PATIENT: [t for t in EntityType if t.category is Category.PATIENT],
    Category.PHYSICIAN: [t for t in EntityType if t.category is Category.PHYSICIAN],
    Category.EXAM: [t for t in EntityType if t.category is Category.EXAM],
}


def render_tables(reports: Mapping[str, dict]) -> str:
    """One fixed-width table per entity category; one row per variant."""
    if not reports:
        raise InputError("no reports to render")
    blocks: list[str] = []
    name_width = max(len("variant"), *(len(v) for v in reports))
    for category, types in _CATEGORY_TYPES.items():
        lines = [f"== {category.value} entities =="]
        header = "variant".ljust(name_width)
        sub = " " * name_width
        for etype in types:
            header += "  " + etype.value.ljust(23)
            sub += "  " + "P      R      F1".ljust(23)
        lines.append(header.rstrip())
        lines.append(sub.rstrip())
        for variant, report in reports.items():
            row = variant.ljust(name_width)
            for etype in types:
                entry = report["per_type"][etype.value]
                cell = (f"{entry['precision']:.3f}  {entry['recall']:.3f}  "
                        f"{entry['f1']:.3f}")
                row += "  " + cell.ljust(23)
            lines.append(row.rstrip())
        blocks.append("\n".join(lines))
    mode = next(iter(reports.values()))["mode"]
    return f"mode: {mode}\n\n" + "\n\n".join(blocks) + "\n"
