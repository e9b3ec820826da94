"""Average precision, mAP evaluation, and the percentile sweep."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hashfind.embeddings import EmbeddingSet
from hashfind.encoding import CodeSet, encode_set
from hashfind.evaluation import SweepReport, average_precision, evaluate, sweep
from hashfind.index import build_index
from hashfind.synthetic import generate_synthetic


def codeset8(values, labels, ids=None, percentile=50.0) -> CodeSet:
    words = np.array([[v] for v in values], dtype=np.uint64)
    ids = ids if ids is not None else [f"r{i}" for i in range(len(values))]
    return CodeSet(ids, labels, words, 8, percentile)


class TestAveragePrecision:
    def test_hand_cases(self):
        assert abs(average_precision([1, 0, 1], 2) - 5.0 / 6.0) <= 1e-12
        assert average_precision([1, 1, 1], 3) == 1.0
        assert average_precision([0, 0, 0], 5) == 0.0
        assert average_precision([0, 1], 1) == 0.5
        # perfect prefix cut short of gtp scores the retrieved fraction
        assert abs(average_precision([1, 1, 1, 1], 5) - 0.8) <= 1e-12

    def test_empty_ranking_scores_zero(self):
        assert average_precision([], 3) == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="gtp"):
            average_precision([1, 0], 0)
        with pytest.raises(ValueError, match="gtp"):
            average_precision([1, 0], -2)
        with pytest.raises(ValueError, match="1-D"):
            average_precision([[1, 0]], 1)

    def test_pushing_a_relevant_item_later_lowers_the_score(self):
        scores = [
            average_precision(rel, 2)
            for rel in ([1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 1, 0], [0, 1, 0, 1])
        ]
        assert scores == sorted(scores, reverse=True)
        assert scores[0] == 1.0

    @settings(max_examples=80, deadline=None)
    @given(
        rel=st.lists(st.booleans(), max_size=60),
        extra=st.integers(0, 5),
    )
    def test_bounded_and_perfect_iff_relevant_prefix(self, rel, extra):
        gtp = sum(rel) + extra
        if gtp == 0:
            return
        ap = average_precision(rel, gtp)
        assert 0.0 <= ap <= 1.0
        perfect = extra == 0 and sum(rel) > 0 and all(rel[: sum(rel)])
        assert (ap == 1.0) == perfect


# two classes, five references each; distances from the two probes below
# are hand-checkable single-word patterns
REF_VALUES = [0x00, 0x01, 0x02, 0x04, 0xFF, 0xF0, 0xE0, 0xC0, 0x0F, 0x1F]
REF_LABELS = ["a"] * 5 + ["b"] * 5


def two_class_index():
    return build_index(codeset8(REF_VALUES, REF_LABELS))


def two_probe_queries():
    return codeset8([0x00, 0xF0], ["a", "b"], ids=["qa", "qb"])


class TestEvaluate:
    def test_truncated_depth_hand_computed(self):
        # probe qa at depth 4 retrieves four of five same-label refs: AP 0.8
        # probe qb retrieves three, then a miss: AP (1+1+1)/5 = 0.6
        report = evaluate(two_class_index(), two_probe_queries(), depth=4)
        assert abs(report.map - 0.7) <= 1e-12
        by_id = {r.query_id: r for r in report.per_query}
        assert abs(by_id["qa"].ap - 0.8) <= 1e-12
        assert abs(by_id["qb"].ap - 0.6) <= 1e-12
        assert by_id["qa"].gtp == 5
        assert by_id["qa"].depth == 4
        assert report.depth == 4

    def test_full_depth_on_single_label_data_is_perfect(self):
        index = build_index(codeset8([0x01, 0x8F, 0x70], ["only"] * 3))
        queries = codeset8([0x03], ["only"], ids=["q0"])
        report = evaluate(index, queries)
        assert report.map == 1.0
        assert report.depth == "full"
        assert report.n_queries_scored == 1

    def test_depth_beyond_size_equals_full(self):
        full = evaluate(two_class_index(), two_probe_queries(), depth="full")
        deep = evaluate(two_class_index(), two_probe_queries(), depth=400)
        assert deep.map == full.map
        assert deep.depth == 400

    def test_depth_one_scores_only_the_top_hit(self):
        report = evaluate(two_class_index(), two_probe_queries(), depth=1)
        # both probes have an exact same-label match at rank 1, gtp 5
        assert abs(report.map - 0.2) <= 1e-12

    def test_rejects_bad_depth(self):
        with pytest.raises(ValueError, match="depth"):
            evaluate(two_class_index(), two_probe_queries(), depth=0)

    def test_unmatched_labels_skipped_with_warning(self):
        queries = codeset8([0x00, 0x3C], ["a", "mystery"], ids=["qa", "qx"])
        with pytest.warns(UserWarning, match="skipped 1 of 2"):
            report = evaluate(two_class_index(), queries)
        assert report.skipped_query_ids == ["qx"]
        assert report.n_queries_scored == 1
        assert [r.query_id for r in report.per_query] == ["qa"]

    def test_no_scorable_query_is_an_error(self):
        queries = codeset8([0x00], ["mystery"], ids=["qx"])
        with pytest.raises(ValueError, match="no scorable query"):
            evaluate(two_class_index(), queries)

    def test_embedding_queries_encoded_at_index_percentile(self):
        reference = generate_synthetic(3, 20, 8, separation=5.0, noise=0.4, seed=51)
        queries = generate_synthetic(3, 5, 8, separation=5.0, noise=0.4, seed=52)
        index = build_index(encode_set(reference, 70.0))
        from_embeddings = evaluate(index, queries)
        from_codes = evaluate(index, encode_set(queries, 70.0))
        assert from_embeddings.map == from_codes.map
        assert from_embeddings.percentile == 70.0
        # an explicit percentile re-encodes the queries differently
        other = evaluate(index, queries, percentile=30.0)
        assert other.percentile == 30.0

    def test_embedding_dimension_mismatch_names_both(self):
        queries = generate_synthetic(2, 2, 12, separation=5.0, noise=0.4, seed=53)
        with pytest.raises(ValueError, match=r"12.*8"):
            evaluate(two_class_index(), queries)

    def test_precoded_queries_with_conflicting_percentile(self):
        queries = two_probe_queries()  # encoded at 50
        with pytest.raises(ValueError, match="conflicting"):
            evaluate(two_class_index(), queries, percentile=60.0)
        # restating the matching percentile is allowed
        report = evaluate(two_class_index(), queries, percentile=50.0)
        assert report.percentile == 50.0

    def test_rejects_other_query_types(self):
        with pytest.raises(TypeError, match="EmbeddingSet or CodeSet"):
            evaluate(two_class_index(), [[0.1, 0.2]])

    def test_consistent_label_renaming_keeps_the_score(self):
        renames = {"a": "north", "b": "south"}
        index = build_index(codeset8(REF_VALUES, [renames[l] for l in REF_LABELS]))
        queries = codeset8([0x00, 0xF0], ["north", "south"], ids=["qa", "qb"])
        renamed = evaluate(index, queries, depth=4)
        original = evaluate(two_class_index(), two_probe_queries(), depth=4)
        assert renamed.map == original.map

    def test_per_class_breakdown(self):
        report = evaluate(two_class_index(), two_probe_queries(), depth=4)
        assert list(report.per_class_map) == ["a", "b"]
        assert abs(report.per_class_map["a"] - 0.8) <= 1e-12
        assert abs(report.per_class_map["b"] - 0.6) <= 1e-12
        assert report.map == pytest.approx(
            np.mean([r.ap for r in report.per_query]), abs=0
        )

    def test_report_pins_reference_fingerprint(self):
        index = two_class_index()
        report = evaluate(index, two_probe_queries())
        assert report.reference_fingerprint == index.fingerprint.hex()

    def test_json_and_csv_outputs(self, tmp_path):
        report = evaluate(two_class_index(), two_probe_queries(), depth=4)
        payload = report.to_json_dict()
        assert set(payload) == {
            "map", "n_queries_scored", "percentile", "depth",
            "reference_fingerprint", "per_class_map", "skipped_query_ids",
            "per_query",
        }
        assert payload["per_query"][0] == {
            "query_id": "qa", "label": "a", "ap": payload["per_query"][0]["ap"],
            "gtp": 5, "depth": 4,
        }
        report.save_json(tmp_path / "report.json")
        assert json.loads((tmp_path / "report.json").read_text()) == payload

        report.save_per_query_csv(tmp_path / "per_query.csv")
        lines = (tmp_path / "per_query.csv").read_text().splitlines()
        assert lines[0] == "query_id,label,ap,gtp"
        assert lines[1].startswith("qa,a,0.8")
        assert len(lines) == 3


class TestSweep:
    def separable(self):
        reference = generate_synthetic(3, 15, 8, separation=6.0, noise=0.2, seed=54)
        queries = generate_synthetic(3, 4, 8, separation=6.0, noise=0.2, seed=55)
        return reference, queries

    def test_single_point_matches_evaluate(self):
        reference, queries = self.separable()
        curve = sweep(reference, queries, [50.0])
        index = build_index(encode_set(reference, 50.0))
        report = evaluate(index, encode_set(queries, 50.0))
        assert curve.points == [(50.0, report.map)]
        assert curve.argmax_percentiles == [50.0]
        assert curve.best_map == report.map

    def test_points_sorted_and_deduplicated(self):
        reference, queries = self.separable()
        curve = sweep(reference, queries, [80, 20, 50, 20.0, 80])
        assert [q for q, _ in curve.points] == [20.0, 50.0, 80.0]

    def test_constant_embeddings_make_a_flat_curve(self):
        vectors = np.full((6, 8), 0.5)
        labels = ["u", "u", "u", "v", "v", "v"]
        reference = EmbeddingSet([f"r{i}" for i in range(6)], labels, vectors)
        queries = EmbeddingSet(["q0", "q1"], ["u", "v"], np.full((2, 8), 0.5))
        curve = sweep(reference, queries, [0, 25, 50, 75, 100])
        maps = [m for _, m in curve.points]
        assert len(set(maps)) == 1
        assert curve.argmax_percentiles == [0.0, 25.0, 50.0, 75.0, 100.0]

    def test_empty_percentile_list_rejected(self):
        reference, queries = self.separable()
        with pytest.raises(ValueError, match="empty"):
            sweep(reference, queries, [])

    def test_depth_recorded(self):
        reference, queries = self.separable()
        assert sweep(reference, queries, [50], depth=3).depth == 3
        assert sweep(reference, queries, [50], depth=None).depth == "full"

    def test_report_serialization(self, tmp_path):
        curve = SweepReport(points=[(10.0, 0.5), (20.0, 0.75)],
                            argmax_percentiles=[20.0], depth="full")
        assert curve.best_map == 0.75
        payload = curve.to_json_dict()
        assert payload["best_map"] == 0.75
        assert payload["points"][0] == {"percentile": 10.0, "map": 0.5}
        curve.save_json(tmp_path / "curve.json")
        assert json.loads((tmp_path / "curve.json").read_text()) == payload
        curve.save_csv(tmp_path / "curve.csv")
        assert (tmp_path / "curve.csv").read_text().splitlines() == [
            "percentile,map", "10.0,0.5", "20.0,0.75",
        ]
