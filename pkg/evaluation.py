# -*- coding: utf-8 -*-
"""
Ranking metrics and per-question-type reports.

hits@1 (percent) is the headline metric for entity answers; MAP and MRR cover
ranked answer-sentence selection. EvalReport bundles them with a per-type
breakdown and a fingerprint naming the corpus and checkpoint it came from.
Also holds the word-overlap ranking baselines for sentence selection.
"""

import json
import logging
import math
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Any, Collection, Dict, Hashable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

OTHER_QTYPE = "other"


# --- Metrics ---
def hits_at_1(predictions: Sequence[Sequence[Hashable]], golds: Sequence[Collection[Hashable]]) -> float:
    """
    100 × fraction of examples whose top-ranked prediction is in the gold set.

    An empty ranking (or empty gold set) counts as a miss and is logged.
    """
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} rankings for {len(golds)} gold sets.")
    if not predictions:
        logger.warning("hits_at_1 called with no examples")
        return 0.0
    hits, flagged = 0, 0
    for ranking, gold in zip(predictions, golds):
        if not ranking or not gold:
            flagged += 1
            continue
        if ranking[0] in gold:
            hits += 1
    if flagged:
        logger.warning(f"hits_at_1: {flagged} examples had an empty ranking or gold set (counted as misses)")
    return 100.0 * hits / len(predictions)


def average_precision(ranking: Sequence[Hashable], gold: Collection[Hashable]) -> float:
    """Mean of precision@k over the ranks k of gold items; unranked gold items add zero."""
    if not gold:
        return 0.0
    found, total = 0, 0.0
    for k, item in enumerate(ranking, start=1):
        if item in gold:
            found += 1
            total += found / k
    return total / len(gold)


def reciprocal_rank(ranking: Sequence[Hashable], gold: Collection[Hashable]) -> float:
    for k, item in enumerate(ranking, start=1):
        if item in gold:
            return 1.0 / k
    return 0.0


def map_mrr(rankings: Sequence[Sequence[Hashable]], golds: Sequence[Collection[Hashable]]) -> Tuple[float, float]:
    """(MAP, MRR) over the examples; every gold id counts as relevant."""
    if len(rankings) != len(golds):
        raise ValueError(f"{len(rankings)} rankings for {len(golds)} gold sets.")
    if not rankings:
        return 0.0, 0.0
    ap = [average_precision(r, g) for r, g in zip(rankings, golds)]
    rr = [reciprocal_rank(r, g) for r, g in zip(rankings, golds)]
    return math.fsum(ap) / len(ap), math.fsum(rr) / len(rr)


# --- Reports ---
@dataclass
class EvalReport:
    overall_hits1: float
    per_type: "OrderedDict[str, Dict[str, float]]"
    map: float
    mrr: float
    n: int
    fingerprint: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        data = {
            "overall_hits1": self.overall_hits1,
            "per_type": {k: dict(v) for k, v in self.per_type.items()},
            "map": self.map,
            "mrr": self.mrr,
            "n": self.n,
            "fingerprint": self.fingerprint,
        }
        if self.extra:
            data["extra"] = self.extra
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "EvalReport":
        per_type = OrderedDict((k, dict(v)) for k, v in data["per_type"].items())
        return cls(data["overall_hits1"], per_type, data["map"], data["mrr"], data["n"],
                   data.get("fingerprint", ""), data.get("extra", {}))

    def to_text(self, title: str = "") -> str:
        """Aligned text table: one row per question type, then the overall row."""
        width = max([len("Question Type"), len("Overall")] + [len(k) for k in self.per_type])
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'Question Type':<{width}}  {'hits@1':>7}  {'n':>6}")
        lines.append("-" * (width + 17))
        for qtype, row in self.per_type.items():
            lines.append(f"{qtype:<{width}}  {row['hits1']:>7.2f}  {int(row['n']):>6}")
        lines.append("-" * (width + 17))
        lines.append(f"{'Overall':<{width}}  {self.overall_hits1:>7.2f}  {self.n:>6}")
        lines.append(f"MAP {self.map:.4f}  MRR {self.mrr:.4f}")
        if self.fingerprint:
            lines.append(f"fingerprint {self.fingerprint}")
        return "\n".join(lines) + "\n"


def breakdown_report(predictions: Sequence[Sequence[Hashable]], examples: Sequence[Any],
                     fingerprint: str = "", known_types: Optional[Sequence[str]] = None) -> EvalReport:
    """
    Overall and per-question-type hits@1 plus MAP/MRR.

    Args:
        predictions: One ranking per example.
        examples: Objects with `qtype` and `gold` attributes.
        fingerprint: Corpus/checkpoint fingerprint to stamp on the report.
        known_types: Valid qtypes (in display order); anything else is bucketed under 'other'.

    Returns:
        EvalReport.
    """
    if known_types is None:
        from datagen import ALL_QUESTION_TYPES
        known_types = ALL_QUESTION_TYPES
    known = list(known_types)
    golds = [ex.gold for ex in examples]

    buckets: Dict[str, List[int]] = {}
    unknown = Counter()
    for i, ex in enumerate(examples):
        qtype = ex.qtype if ex.qtype in known else OTHER_QTYPE
        if qtype == OTHER_QTYPE:
            unknown[ex.qtype] += 1
        buckets.setdefault(qtype, []).append(i)
    if unknown:
        logger.warning(f"Unknown question types bucketed under '{OTHER_QTYPE}': {dict(unknown)}")

    per_type: "OrderedDict[str, Dict[str, float]]" = OrderedDict()
    for qtype in known + [OTHER_QTYPE]:
        idx = buckets.get(qtype)
        if not idx:
            continue
        per_type[qtype] = {
            "hits1": hits_at_1([predictions[i] for i in idx], [golds[i] for i in idx]),
            "n": len(idx),
        }
    mean_ap, mrr = map_mrr(predictions, golds)
    return EvalReport(hits_at_1(predictions, golds) if examples else 0.0, per_type, mean_ap, mrr,
                      len(examples), fingerprint)


# --- Word-Overlap Baselines ---
def idf_weights(token_lists: Sequence[Sequence[str]]) -> Dict[str, float]:
    """log(N / df) over a collection of token lists."""
    df = Counter()
    for tokens in token_lists:
        df.update(set(tokens))
    n = max(len(token_lists), 1)
    return {t: math.log(n / c) for t, c in df.items()}


def word_count_rankings(questions: Sequence[Sequence[str]], candidate_tokens: Sequence[Sequence[Sequence[str]]],
                        idf: Optional[Dict[str, float]] = None) -> List[List[int]]:
    """
    Ranks each example's candidate sentences by the number of distinct
    question words they contain (IDF-weighted when `idf` is given); ties by index.
    """
    rankings = []
    for question, candidates in zip(questions, candidate_tokens):
        q_words = set(question)
        scores = []
        for tokens in candidates:
            shared = q_words & set(tokens)
            scores.append(sum(idf.get(t, 0.0) for t in shared) if idf is not None else float(len(shared)))
        rankings.append(sorted(range(len(candidates)), key=lambda i: (-scores[i], i)))
    return rankings
