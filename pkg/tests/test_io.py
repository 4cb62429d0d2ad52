"""JSON artifact readers and writers: round trips and rejection paths."""

import json
import logging

import pytest

from helpers import build_page, predictions_for
from refex import io as rio
from refex.errors import IntegrityError, SchemaError
from refex.model import EntitySpan, EntityType, SpanSource


@pytest.fixture
def page():
    return build_page([["Name:", "John", "Smith"], ["DOB:", "01/02/1990"]])


class TestLoadDump:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            rio.load_json(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            rio.load_json(p)

    def test_non_object_top_level(self, tmp_path):
        p = tmp_path / "arr.json"
        p.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(SchemaError):
            rio.load_json(p)

    def test_dump_is_stable_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        rio.dump_json({"b": 1, "a": [2, 3]}, a)
        rio.dump_json({"a": [2, 3], "b": 1}, b)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().endswith(b"\n")

    def test_dump_creates_parent_dirs(self, tmp_path):
        target = tmp_path / "deep" / "nested" / "x.json"
        rio.dump_json({"k": 1}, target)
        assert json.loads(target.read_text()) == {"k": 1}


class TestPageIo:
    def test_round_trip(self, page, tmp_path):
        p = tmp_path / "page.json"
        rio.write_page(page, p)
        back = rio.read_page(p)
        assert back.page_no == page.page_no
        assert [t.text for t in back.tokens] == [t.text for t in page.tokens]
        assert [ln.token_ids for ln in back.lines] == [ln.token_ids for ln in page.lines]
        rio.write_page(back, tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == p.read_bytes()

    def test_wrong_schema_version(self, page):
        data = rio.page_to_dict(page)
        data["schema_version"] = "2"
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)

    def test_unknown_top_level_field_warns(self, page, caplog):
        data = rio.page_to_dict(page)
        data["vendor_extra"] = {"foo": 1}
        with caplog.at_level(logging.WARNING, logger="refex.io"):
            rio.page_from_dict(data)
        assert "vendor_extra" in caplog.text

    def test_token_with_missing_line_is_integrity_error(self, page):
        data = rio.page_to_dict(page)
        data["tokens"][0]["line_id"] = 99
        with pytest.raises(IntegrityError):
            rio.page_from_dict(data)

    def test_duplicate_line_id(self, page):
        data = rio.page_to_dict(page)
        data["lines"].append(dict(data["lines"][0]))
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)

    def test_empty_line_rejected(self, page):
        data = rio.page_to_dict(page)
        data["lines"].append({"id": 77, "bbox": [0.1, 0.5, 0.2, 0.52]})
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)

    def test_bad_bbox_shape(self, page):
        data = rio.page_to_dict(page)
        data["tokens"][0]["bbox"] = [0.1, 0.2, 0.3]
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)

    def test_missing_required_field(self, page):
        data = rio.page_to_dict(page)
        del data["width_px"]
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)

    def test_bool_is_not_int(self, page):
        data = rio.page_to_dict(page)
        data["page_no"] = True
        with pytest.raises(SchemaError):
            rio.page_from_dict(data)


class TestAnnotationsIo:
    def test_round_trip(self, page, tmp_path):
        spans = (EntitySpan(EntityType.PATIENT_NAME, (1, 2), SpanSource.GOLD),)
        ann = rio.AnnotationFile(page.page_no, spans)
        p = tmp_path / "gold.json"
        rio.write_annotations(ann, p)
        back = rio.read_annotations(p, page)
        assert back.entities[0].entity_type is EntityType.PATIENT_NAME
        assert back.entities[0].token_ids == (1, 2)

    def test_unknown_entity_type_is_hard_error(self, page):
        data = {"schema_version": "1", "page_no": 1,
                "entities": [{"type": "PatientShoeSize", "token_ids": [1]}]}
        with pytest.raises(SchemaError):
            rio.annotations_from_dict(data)

    def test_page_no_mismatch(self, page):
        ann = rio.AnnotationFile(7, ())
        with pytest.raises(IntegrityError):
            rio.resolve_annotations(ann, page)

    def test_dangling_token_id(self, page):
        spans = (EntitySpan(EntityType.PATIENT_NAME, (999,), SpanSource.GOLD),)
        ann = rio.AnnotationFile(page.page_no, spans)
        with pytest.raises(IntegrityError):
            rio.resolve_annotations(ann, page)

    def test_empty_token_ids_rejected(self):
        data = {"schema_version": "1", "page_no": 1,
                "entities": [{"type": "PatientName", "token_ids": []}]}
        with pytest.raises(SchemaError):
            rio.annotations_from_dict(data)


class TestPredictionsIo:
    def test_round_trip(self, page, tmp_path):
        pred = predictions_for(page, ["O", "B-PatientName", "I-PatientName",
                                      "O", "B-PatientDob"])
        p = tmp_path / "tags.json"
        rio.write_predictions(pred, p)
        back = rio.read_predictions(p)
        assert [str(r.tag) for r in back.tags] == [str(r.tag) for r in pred.tags]
        assert all(r.confidence == 1.0 for r in back.tags)

    def test_duplicate_token_rejected(self):
        data = {"schema_version": "1", "page_no": 1,
                "tags": [{"token_id": 0, "tag": "O"}, {"token_id": 0, "tag": "O"}]}
        with pytest.raises(SchemaError):
            rio.predictions_from_dict(data)

    def test_malformed_tag_rejected(self):
        data = {"schema_version": "1", "page_no": 1,
                "tags": [{"token_id": 0, "tag": "B_PatientName"}]}
        with pytest.raises(SchemaError):
            rio.predictions_from_dict(data)

    def test_coverage_missing_token(self, page):
        pred = rio.PredictionFile(page.page_no, tuple(
            rio.TokenPrediction(t.id, rio.BioTag.parse("O"))
            for t in page.tokens[:-1]))
        with pytest.raises(SchemaError):
            rio.check_prediction_coverage(pred, page)

    def test_coverage_stray_token(self, page):
        tags = tuple(rio.TokenPrediction(t.id, rio.BioTag.parse("O"))
                     for t in page.tokens)
        pred = rio.PredictionFile(
            page.page_no, tags + (rio.TokenPrediction(999, rio.BioTag.parse("O")),))
        with pytest.raises(IntegrityError):
            rio.check_prediction_coverage(pred, page)

    def test_coverage_page_mismatch(self, page):
        pred = rio.PredictionFile(9, ())
        with pytest.raises(IntegrityError):
            rio.check_prediction_coverage(pred, page)


class TestEntitiesIo:
    def test_round_trip_keeps_text(self, page, tmp_path):
        spans = [EntitySpan(EntityType.PATIENT_NAME, (1, 2), SpanSource.CORRECTED)]
        p = tmp_path / "ents.json"
        rio.write_entities(page, spans, p)
        back = rio.read_entities(p)
        assert back.entities[0].text == "John Smith"
        assert back.entities[0].span.token_ids == (1, 2)

    def test_text_field_required(self):
        data = {"schema_version": "1", "page_no": 1,
                "entities": [{"type": "PatientName", "token_ids": [1]}]}
        with pytest.raises(SchemaError):
            rio.entities_from_dict(data)


class TestReportIo:
    def _minimal(self):
        rec = {"COR": 1, "PAR": 0, "INC": 0, "MIS": 0, "SPU": 0,
               "possible": 1, "actual": 1,
               "precision": 1.0, "recall": 1.0, "f1": 1.0}
        return {"schema_version": "1", "mode": "standard", "variant": "default",
                "pages": 1, "per_type": {"PatientName": dict(rec)},
                "overall": dict(rec)}

    def test_round_trip(self, tmp_path):
        report = self._minimal()
        p = tmp_path / "report.json"
        rio.write_report(report, p)
        assert rio.read_report(p) == report

    def test_unknown_mode_rejected(self):
        report = self._minimal()
        report["mode"] = "bonus"
        with pytest.raises(SchemaError):
            rio.report_from_dict(report)

    def test_negative_count_rejected(self):
        report = self._minimal()
        report["per_type"]["PatientName"]["COR"] = -1
        with pytest.raises(SchemaError):
            rio.report_from_dict(report)

    def test_unknown_per_type_key_rejected(self):
        report = self._minimal()
        report["per_type"]["Mystery"] = report["per_type"].pop("PatientName")
        with pytest.raises(SchemaError):
            rio.report_from_dict(report)
