"""BIO decoding, address merging, the hybrid pass, and value selection."""

import random

import pytest

from helpers import build_page, predictions_for, reading_order, span
from refex.decode import (DecodeConfig, decode_bio, hybrid_postprocess,
                          merge_addresses, normalize_text, select_per_page)
from refex.errors import InputError, SchemaError
from refex.labels import to_bio
from refex.model import (EntitySpan, EntityType, SpanSource, BioTag, TagKind,
                         entity_text)


def decode(page, tag_strings, **cfg_kwargs):
    order = reading_order(page)
    pred = predictions_for(page, tag_strings)
    cfg = DecodeConfig(**cfg_kwargs) if cfg_kwargs else None
    return decode_bio(pred, order, cfg)


def as_pairs(spans):
    return [(s.entity_type, s.token_ids) for s in spans]


class TestDecodeBio:
    def test_b_after_span_opens_fresh(self):
        page = build_page([["John", "Smith", "x", "01/02/1990"]])
        spans = decode(page, ["B-PatientName", "I-PatientName", "O", "B-PatientDob"])
        assert as_pairs(spans) == [(EntityType.PATIENT_NAME, (0, 1)),
                                   (EntityType.PATIENT_DOB, (3,))]

    def test_bare_i_run_opens_when_allowed(self):
        page = build_page([["500", "Oak"]])
        spans = decode(page, ["I-PatientAddress", "I-PatientAddress"])
        assert as_pairs(spans) == [(EntityType.PATIENT_ADDRESS, (0, 1))]

    def test_bare_i_dropped_when_disallowed(self):
        page = build_page([["500", "Oak"]])
        spans = decode(page, ["I-PatientAddress", "I-PatientAddress"],
                       allow_i_start=False)
        assert spans == []

    def test_adjacent_b_b_two_singles(self):
        page = build_page([["John", "Jane"]])
        spans = decode(page, ["B-PatientName", "B-PatientName"])
        assert as_pairs(spans) == [(EntityType.PATIENT_NAME, (0,)),
                                   (EntityType.PATIENT_NAME, (1,))]

    def test_type_switch_on_i_closes_and_reopens(self):
        page = build_page([["John", "MRI"]])
        spans = decode(page, ["B-PatientName", "I-ExamProcedure"])
        assert as_pairs(spans) == [(EntityType.PATIENT_NAME, (0,)),
                                   (EntityType.EXAM_PROCEDURE, (1,))]

    def test_type_switch_without_i_start_drops_tail(self):
        page = build_page([["John", "MRI"]])
        spans = decode(page, ["B-PatientName", "I-ExamProcedure"],
                       allow_i_start=False)
        assert as_pairs(spans) == [(EntityType.PATIENT_NAME, (0,))]

    def test_span_at_page_end_closes(self):
        page = build_page([["John", "Smith"]])
        spans = decode(page, ["B-PatientName", "I-PatientName"])
        assert as_pairs(spans) == [(EntityType.PATIENT_NAME, (0, 1))]

    def test_all_o_is_empty(self):
        page = build_page([["a", "b"]])
        assert decode(page, ["O", "O"]) == []

    def test_missing_tag_rejected(self):
        page = build_page([["a", "b"]])
        order = reading_order(page)
        pred = predictions_for(page, ["O", "O"])
        partial = type(pred)(pred.page_no, pred.tags[:1])
        with pytest.raises(SchemaError):
            decode_bio(partial, order)

    def test_round_trip_with_to_bio(self):
        rng = random.Random(4242)
        types = [t for t in EntityType]
        for _ in range(60):
            n = rng.randint(4, 18)
            page = build_page([[f"w{i}" for i in range(n)]])
            order = reading_order(page)
            # non-adjacent spans: leave a gap token between picks
            spans, cursor = [], 0
            while cursor < n:
                width = rng.randint(1, 3)
                if cursor + width > n or rng.random() < 0.4:
                    cursor += 1
                    continue
                etype = rng.choice(types)
                spans.append(EntitySpan(etype, tuple(range(cursor, cursor + width)),
                                        SpanSource.GOLD))
                cursor += width + 1
            tags = to_bio(spans, page, order)
            pred = predictions_for(page, [str(tags[t]) for t in range(n)])
            decoded = decode_bio(pred, order)
            assert as_pairs(decoded) == [(s.entity_type, s.token_ids) for s in spans]

    def test_negative_merge_gap_rejected(self):
        with pytest.raises(InputError):
            DecodeConfig(address_merge_gap=-1)


class TestMergeAddresses:
    def _spans(self, *id_groups, etype=EntityType.PATIENT_ADDRESS):
        return [span(etype, ids) for ids in id_groups]

    def test_gap_five_merges(self):
        page = build_page([[f"w{i}" for i in range(10)]])
        order = reading_order(page)
        merged = merge_addresses(self._spans([0, 1], [7, 8]), order)
        assert as_pairs(merged) == [(EntityType.PATIENT_ADDRESS,
                                     (0, 1, 7, 8))]

    def test_gap_six_does_not_merge(self):
        page = build_page([[f"w{i}" for i in range(11)]])
        order = reading_order(page)
        merged = merge_addresses(self._spans([0, 1], [8, 9]), order)
        assert len(merged) == 2

    def test_transitive_chain(self):
        page = build_page([[f"w{i}" for i in range(12)]])
        order = reading_order(page)
        merged = merge_addresses(self._spans([0], [3], [6], [9]), order)
        assert as_pairs(merged) == [(EntityType.PATIENT_ADDRESS, (0, 3, 6, 9))]

    def test_different_types_never_merge(self):
        page = build_page([[f"w{i}" for i in range(4)]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_ADDRESS, [0]),
                 span(EntityType.PHYSICIAN_ADDRESS, [2])]
        assert len(merge_addresses(spans, order)) == 2

    def test_non_address_untouched(self):
        page = build_page([[f"w{i}" for i in range(4)]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_NAME, [0]),
                 span(EntityType.PATIENT_NAME, [1])]
        assert len(merge_addresses(spans, order)) == 2

    def test_input_order_invariance(self):
        rng = random.Random(77)
        page = build_page([[f"w{i}" for i in range(20)]])
        order = reading_order(page)
        spans = self._spans([0, 1], [4], [12, 13], [19])
        want = as_pairs(merge_addresses(spans, order))
        for _ in range(10):
            shuffled = spans[:]
            rng.shuffle(shuffled)
            assert as_pairs(merge_addresses(shuffled, order)) == want

    def test_idempotent(self):
        rng = random.Random(88)
        for _ in range(50):
            n = rng.randint(6, 24)
            page = build_page([[f"w{i}" for i in range(n)]])
            order = reading_order(page)
            spans, cursor = [], 0
            while cursor < n:
                width = rng.randint(1, 3)
                if cursor + width > n:
                    break
                spans.append(span(EntityType.PATIENT_ADDRESS,
                                  list(range(cursor, cursor + width))))
                cursor += width + rng.randint(1, 8)
            once = merge_addresses(spans, order)
            twice = merge_addresses(once, order)
            assert as_pairs(twice) == as_pairs(once)

    def test_merged_tokens_sorted_by_rank(self):
        page = build_page([[f"w{i}" for i in range(6)]])
        order = reading_order(page)
        a = EntitySpan(EntityType.PATIENT_ADDRESS, (4, 3), SpanSource.PREDICTED)
        b = EntitySpan(EntityType.PATIENT_ADDRESS, (0, 1), SpanSource.PREDICTED)
        merged = merge_addresses([a, b], order)
        assert merged[0].token_ids == (0, 1, 3, 4)


class TestHybridPostprocess:
    def test_composite_cleanup(self):
        page = build_page([["Address:", "500", "Oak", "Dr", "Fax", "512-555-0000"]])
        order = reading_order(page)
        kept, outcomes = hybrid_postprocess(
            [span(EntityType.PATIENT_ADDRESS, [0, 1, 2, 3, 4, 5])], page, order)
        assert entity_text(kept[0], page) == "500 Oak Dr"
        assert outcomes[0].applied_rules == ("strip_stop_words", "strip_phone")

    def test_removal_drops_from_kept(self):
        page = build_page([["Name:", "John"]])
        order = reading_order(page)
        kept, outcomes = hybrid_postprocess(
            [span(EntityType.PATIENT_NAME, [0]),
             span(EntityType.PATIENT_NAME, [1])], page, order)
        assert len(kept) == 1
        assert kept[0].token_ids == (1,)
        assert len(outcomes) == 2
        assert outcomes[0].removed


class TestSelection:
    def test_majority_vote(self):
        page = build_page([["John", "Smith"], ["John", "Smith"], ["J.", "Smith"]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_NAME, [0, 1]),
                 span(EntityType.PATIENT_NAME, [2, 3]),
                 span(EntityType.PATIENT_NAME, [4, 5])]
        sel = select_per_page(spans, page, order)
        winner = sel.chosen[EntityType.PATIENT_NAME]
        assert len(winner) == 1
        assert entity_text(winner[0], page) == "John Smith"
        assert sel.vote_tallies[EntityType.PATIENT_NAME] == {
            "john smith": 2, "j. smith": 1}

    def test_vote_normalizes_case_and_space(self):
        page = build_page([["JOHN", "SMITH"], ["john", "smith"]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_NAME, [0, 1]),
                 span(EntityType.PATIENT_NAME, [2, 3])]
        sel = select_per_page(spans, page, order)
        assert sel.vote_tallies[EntityType.PATIENT_NAME] == {"john smith": 2}

    def test_tie_prefers_more_tokens(self):
        page = build_page([["John", "Q.", "Smith"], ["Jane", "Roe"]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_NAME, [0, 1, 2]),
                 span(EntityType.PATIENT_NAME, [3, 4])]
        sel = select_per_page(spans, page, order)
        assert entity_text(sel.chosen[EntityType.PATIENT_NAME][0], page) == "John Q. Smith"

    def test_tie_same_size_prefers_earliest(self):
        page = build_page([["Jane", "Roe"], ["John", "Smith"]])
        order = reading_order(page)
        spans = [span(EntityType.PATIENT_NAME, [2, 3]),
                 span(EntityType.PATIENT_NAME, [0, 1])]
        sel = select_per_page(spans, page, order)
        assert entity_text(sel.chosen[EntityType.PATIENT_NAME][0], page) == "Jane Roe"

    def test_exams_keep_all_unique(self):
        page = build_page([["MRI", "Brain"], ["CT", "Chest"], ["MRI", "Brain"]])
        order = reading_order(page)
        spans = [span(EntityType.EXAM_PROCEDURE, [0, 1]),
                 span(EntityType.EXAM_PROCEDURE, [2, 3]),
                 span(EntityType.EXAM_PROCEDURE, [4, 5])]
        sel = select_per_page(spans, page, order)
        texts = [entity_text(s, page) for s in sel.chosen[EntityType.EXAM_PROCEDURE]]
        assert texts == ["MRI Brain", "CT Chest"]

    def test_spans_ordered_by_entity_type(self):
        page = build_page([["MRI"], ["John"]])
        order = reading_order(page)
        spans = [span(EntityType.EXAM_PROCEDURE, [0]),
                 span(EntityType.PATIENT_NAME, [1])]
        sel = select_per_page(spans, page, order)
        assert [s.entity_type for s in sel.spans()] == [
            EntityType.PATIENT_NAME, EntityType.EXAM_PROCEDURE]

    def test_empty_input(self):
        page = build_page([["a"]])
        sel = select_per_page([], page, reading_order(page))
        assert sel.spans() == []
        assert sel.vote_tallies == {}


class TestNormalizeText:
    @pytest.mark.parametrize("raw,want", [
        ("John  Smith", "john smith"),
        ("  JOHN\tSMITH ", "john smith"),
        ("Straße", "strasse"),
    ])
    def test_examples(self, raw, want):
        assert normalize_text(raw) == want
