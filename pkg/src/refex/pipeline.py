"""End-to-end page processing.

One page flows group -> tag -> decode -> address merge -> domain cleanup ->
per-page selection. Every stage is also reachable on its own; the CLI and the
HTTP service both call these functions, so staged and single-shot runs agree
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import muc5
from .decode import (DecodeConfig, SelectionResult, decode_bio,
                     hybrid_postprocess, merge_addresses, select_per_page)
from .errors import InputError
from .grouping import GroupingConfig, GroupingResult, group_page
from .io import AnnotationFile, PredictionFile, resolve_annotations
from .model import EntitySpan, EntityType, Page
from .muc5 import MucCounts
from .rules import RuleConfig, RuleOutcome
from .tagging import Tagger


@dataclass(frozen=True)
class PipelineConfig:
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    rules: RuleConfig = field(default_factory=RuleConfig)
    hybrid: bool = True
    muc5_mode: str = muc5.DEFAULT_MODE

    def __post_init__(self) -> None:
        if self.muc5_mode not in muc5.MODES:
            raise InputError(f"muc5_mode must be one of {sorted(muc5.MODES)}")


@dataclass(frozen=True)
class PageResult:
    page: Page
    grouping: GroupingResult
    predictions: PredictionFile
    decoded: tuple[EntitySpan, ...]       # after BIO decode + address merge
    entities: tuple[EntitySpan, ...]      # after domain cleanup (== decoded when off)
    rule_outcomes: tuple[RuleOutcome, ...]
    selection: SelectionResult

    @property
    def selected(self) -> tuple[EntitySpan, ...]:
        return self.selection.spans()


def process_predictions(page: Page, grouping: GroupingResult,
                        predictions: PredictionFile,
                        cfg: PipelineConfig | None = None) -> PageResult:
    """Everything downstream of tagging: decode, merge, clean up, select."""
    cfg = cfg or PipelineConfig()
    order = grouping.reading_order
    spans = decode_bio(predictions, order, cfg.decode)
    spans = merge_addresses(spans, order, cfg.decode)
    decoded = tuple(spans)
    if cfg.hybrid:
        kept, outcomes = hybrid_postprocess(decoded, page, order, cfg.rules)
    else:
        kept, outcomes = list(decoded), []
    selection = select_per_page(kept, page, order)
    return PageResult(page=page, grouping=grouping, predictions=predictions,
                      decoded=decoded, entities=tuple(kept),
                      rule_outcomes=tuple(outcomes), selection=selection)


def extract_page(page: Page, tagger: Tagger,
                 cfg: PipelineConfig | None = None) -> PageResult:
    cfg = cfg or PipelineConfig()
    grouping = group_page(page, cfg.grouping)
    predictions = tagger.tag(page, grouping)
    return process_predictions(page, grouping, predictions, cfg)


def extract_from_predictions(page: Page, predictions: PredictionFile,
                             cfg: PipelineConfig | None = None) -> PageResult:
    """Decode externally produced token tags (grouping is recomputed for
    reading order)."""
    cfg = cfg or PipelineConfig()
    grouping = group_page(page, cfg.grouping)
    return process_predictions(page, grouping, predictions, cfg)


def score_result(result: PageResult,
                 gold: AnnotationFile) -> dict[EntityType, MucCounts]:
    resolve_annotations(gold, result.page)
    return muc5.score_page(result.selected, gold.entities)


def score_spans(page: Page, predicted: Sequence[EntitySpan],
                gold: AnnotationFile) -> dict[EntityType, MucCounts]:
    resolve_annotations(gold, page)
    return muc5.score_page(tuple(predicted), gold.entities)


def evaluate_pages(page_counts: Iterable[dict[EntityType, MucCounts]],
                   mode: str = muc5.DEFAULT_MODE,
                   variant: str = "default") -> dict:
    counts = list(page_counts)
    return muc5.build_report(counts, mode=mode, variant=variant,
                             pages=len(counts))
