# -*- coding: utf-8 -*-
import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from evaluation import (OTHER_QTYPE, EvalReport, average_precision, breakdown_report, hits_at_1, idf_weights,
                        map_mrr, reciprocal_rank, word_count_rankings)


def test_hits_at_1():
    assert hits_at_1([["a", "b"], ["c"]], [{"a"}, {"b"}]) == 50.0
    assert hits_at_1([["x", "a"]], [{"a", "x"}]) == 100.0


def test_hits_at_1_counts_empty_as_miss():
    assert hits_at_1([[], ["a"]], [{"a"}, set()]) == 0.0
    assert hits_at_1([], []) == 0.0


def test_hits_at_1_length_mismatch():
    with pytest.raises(ValueError):
        hits_at_1([["a"]], [])


def test_average_precision_oracle():
    # gold at ranks 1 and 3: (1/1 + 2/3) / 2
    assert math.isclose(average_precision(["a", "x", "b"], {"a", "b"}), (1 + 2 / 3) / 2)
    # one gold item never ranked
    assert math.isclose(average_precision(["a"], {"a", "z"}), 0.5)
    assert average_precision(["a"], set()) == 0.0


def test_reciprocal_rank():
    assert reciprocal_rank(["x", "y", "a"], {"a"}) == pytest.approx(1 / 3)
    assert reciprocal_rank(["x"], {"a"}) == 0.0


def test_map_mrr():
    mean_ap, mrr = map_mrr([["a", "b"], ["b", "a"]], [{"a"}, {"a"}])
    assert mean_ap == pytest.approx(0.75)
    assert mrr == pytest.approx(0.75)


def test_metrics_ignore_example_order():
    rankings = [["a", "b"], ["b", "a"], ["c"]]
    golds = [{"a"}, {"a"}, {"d"}]
    forward = (hits_at_1(rankings, golds), map_mrr(rankings, golds))
    backward = (hits_at_1(rankings[::-1], golds[::-1]), map_mrr(rankings[::-1], golds[::-1]))
    assert forward == backward


def _examples(*pairs):
    return [SimpleNamespace(qtype=qtype, gold=frozenset(gold)) for qtype, gold in pairs]


def test_breakdown_report_groups_by_type():
    examples = _examples(("Movie to Year", {0}), ("Movie to Year", {1}), ("Actor to Movie", {2}))
    report = breakdown_report([[0, 1], [0, 1], [2]], examples, fingerprint="fp")
    assert report.overall_hits1 == pytest.approx(200 / 3)
    assert report.per_type["Movie to Year"] == {"hits1": 50.0, "n": 2}
    assert report.per_type["Actor to Movie"] == {"hits1": 100.0, "n": 1}
    # Display order follows the known question types.
    assert list(report.per_type) == ["Actor to Movie", "Movie to Year"]
    assert report.fingerprint == "fp"


def test_breakdown_report_buckets_unknown_types():
    report = breakdown_report([[0]], _examples(("Mystery Type", {0})))
    assert list(report.per_type) == [OTHER_QTYPE]


def test_report_json_round_trip():
    report = breakdown_report([[0, 1]], _examples(("Movie to Genre", {1})), fingerprint="abc")
    report.extra["word_count"] = {"hits1": 10.0, "map": 0.2, "mrr": 0.3}
    restored = EvalReport.from_json(json.loads(report.dumps()))
    assert restored == report


def test_report_text_lists_rows_and_overall():
    report = breakdown_report([[1], [0]], _examples(("Movie to Genre", {1}), ("Movie to Tags", {1})))
    text = report.to_text("test")
    assert text.splitlines()[0] == "test"
    assert "Movie to Genre" in text and "Overall" in text
    assert "50.00" in text


def test_word_count_rankings():
    questions = [["who", "directed", "heat"]]
    candidates = [[["heat", "was", "directed", "by", "mann"], ["alien", "is", "scary"], ["heat", "is", "hot"]]]
    assert word_count_rankings(questions, candidates) == [[0, 2, 1]]


def test_idf_weighted_word_count_prefers_rare_words():
    questions = [["common", "rare"]]
    candidates = [[["common"], ["rare"]]]
    idf = idf_weights([["common"], ["common"], ["common", "x"], ["rare"]])
    assert idf["rare"] > idf["common"]
    assert word_count_rankings(questions, candidates, idf) == [[1, 0]]
    assert word_count_rankings(questions, candidates) == [[0, 1]]


def _oracle_average_precision(ranking, gold):
    # precision at each gold item's rank, summed over the gold set
    position = {item: k for k, item in enumerate(ranking, start=1)}
    ranks = sorted(position[g] for g in gold if g in position)
    return sum((i + 1) / r for i, r in enumerate(ranks)) / len(gold)


def _oracle_reciprocal_rank(ranking, gold):
    ranks = [k for k, item in enumerate(ranking, start=1) if item in gold]
    return 1.0 / min(ranks) if ranks else 0.0


def test_metrics_match_independent_formulas_on_random_rankings():
    rng = np.random.default_rng(2024)
    rankings, golds = [], []
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        ranking = [int(c) for c in rng.permutation(n)[:int(rng.integers(1, n + 1))]]
        # gold may include ids that were never ranked
        gold = {int(g) for g in rng.choice(n + 3, size=int(rng.integers(1, 4)), replace=False)}
        rankings.append(ranking)
        golds.append(gold)
        assert abs(average_precision(ranking, gold) - _oracle_average_precision(ranking, gold)) <= 1e-12
        assert abs(reciprocal_rank(ranking, gold) - _oracle_reciprocal_rank(ranking, gold)) <= 1e-12

    hits = sum(r[0] in g for r, g in zip(rankings, golds))
    assert hits_at_1(rankings, golds) == 100.0 * hits / len(rankings)
    mean_ap, mrr = map_mrr(rankings, golds)
    assert abs(mean_ap - np.mean([_oracle_average_precision(r, g) for r, g in zip(rankings, golds)])) <= 1e-12
    assert abs(mrr - np.mean([_oracle_reciprocal_rank(r, g) for r, g in zip(rankings, golds)])) <= 1e-12
