"""The end-to-end page flow and its staged equivalents."""

import pytest

from helpers import build_page, predictions_for
from refex.errors import InputError
from refex.grouping import group_page
from refex.io import AnnotationFile
from refex.model import EntitySpan, EntityType, SpanSource, entity_text
from refex.muc5 import MucCounts
from refex.pipeline import (PipelineConfig, evaluate_pages, extract_page,
                            extract_from_predictions, process_predictions,
                            score_result, score_spans)
from refex.synth import LayoutKind, PageTemplate, generate_page
from refex.tagging import build_tagger


@pytest.fixture
def form_page():
    return build_page([["Name:", "John", "Smith"],
                       ["DOB:", "01/02/1990"],
                       ["Address:", "500", "Oak", "Dr", "Fax", "512-555-0000"]])


class TestExtractPage:
    def test_heuristic_end_to_end(self, form_page):
        result = extract_page(form_page, build_tagger("heuristic"))
        by_type = {s.entity_type: entity_text(s, form_page)
                   for s in result.selected}
        assert by_type[EntityType.PATIENT_NAME] == "John Smith"
        assert by_type[EntityType.PATIENT_DOB] == "01/02/1990"
        assert by_type[EntityType.PATIENT_ADDRESS] == "500 Oak Dr"

    def test_hybrid_off_keeps_decoded(self, form_page):
        cfg = PipelineConfig(hybrid=False)
        result = extract_page(form_page, build_tagger("heuristic"), cfg)
        assert result.entities == result.decoded
        assert result.rule_outcomes == ()
        addr = next(s for s in result.selected
                    if s.entity_type is EntityType.PATIENT_ADDRESS)
        assert "512-555-0000" in entity_text(addr, form_page)

    def test_hybrid_on_populates_outcomes(self, form_page):
        result = extract_page(form_page, build_tagger("heuristic"))
        assert len(result.rule_outcomes) == len(result.decoded)
        assert any(o.applied_rules for o in result.rule_outcomes)

    def test_staged_equals_monolithic(self, form_page):
        cfg = PipelineConfig()
        mono = extract_page(form_page, build_tagger("heuristic"), cfg)
        grouping = group_page(form_page, cfg.grouping)
        predictions = build_tagger("heuristic").tag(form_page, grouping)
        staged = process_predictions(form_page, grouping, predictions, cfg)
        assert staged.selected == mono.selected
        assert staged.decoded == mono.decoded

    def test_extract_from_predictions(self, form_page):
        pred = predictions_for(form_page, [
            "O", "B-PatientName", "I-PatientName",
            "O", "B-PatientDob",
            "O", "B-PatientAddress", "I-PatientAddress", "I-PatientAddress",
            "O", "O"])
        result = extract_from_predictions(form_page, pred)
        by_type = {s.entity_type: entity_text(s, form_page)
                   for s in result.selected}
        assert by_type[EntityType.PATIENT_ADDRESS] == "500 Oak Dr"

    def test_config_validation(self):
        with pytest.raises(InputError):
            PipelineConfig(muc5_mode="fancy")


class TestScoring:
    def test_score_result_perfect(self):
        fixture = generate_page(8, PageTemplate(LayoutKind.LABEL_LEFT))
        result = extract_page(fixture.page, build_tagger("heuristic"))
        counts = score_result(result, fixture.annotations)
        total = MucCounts()
        for c in counts.values():
            total = total + c
        assert total.PAR == total.INC == total.MIS == total.SPU == 0
        assert total.COR == len(fixture.annotations.entities)

    def test_score_spans_page_mismatch(self, form_page):
        gold = AnnotationFile(99, ())
        with pytest.raises(Exception):
            score_spans(form_page, [], gold)

    def test_evaluate_pages_counts_pages(self):
        pages = [{EntityType.PATIENT_NAME: MucCounts(COR=1)},
                 {EntityType.PATIENT_NAME: MucCounts(MIS=1)}]
        report = evaluate_pages(pages, mode="standard", variant="v")
        assert report["pages"] == 2
        assert report["variant"] == "v"
        assert report["per_type"]["PatientName"]["COR"] == 1
