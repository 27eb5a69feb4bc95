# -*- coding: utf-8 -*-
"""
`eval`: scores a checkpoint on one split of a corpus.
"""

import logging
import os
from typing import Any, Dict, List

from checkpoint import load_checkpoint
from comparison_logic import write_comparison_workbook
from datagen import SPLITS
from evaluation import hits_at_1, idf_weights, map_mrr, word_count_rankings
from experiment import Experiment
from featurize import sentence_id
from commands.common import (dump_rankings, evaluate_split, experiment_from_checkpoint, report_fingerprint,
                             write_report)

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('eval', help="Evaluate a checkpoint on a corpus split")
    parser.add_argument('checkpoint', metavar='CKPT', help="Checkpoint file written by train")
    parser.add_argument('--corpus', dest='corpus_dir', help="Corpus directory (default: the checkpoint's)")
    parser.add_argument('--split', choices=SPLITS, default='test')
    parser.add_argument('--out', dest='output_dir', help="Report directory (default: the checkpoint's directory)")
    parser.add_argument('--xlsx', action='store_true', help="Also write the report as an .xlsx workbook")
    parser.add_argument('--word-count', action='store_true',
                        help="Add the word-overlap baselines (sentence selection only)")
    parser.add_argument('--dump-top', type=int, default=10, metavar='K',
                        help="Candidates kept per example in the rankings dump")
    parser.set_defaults(func=run)


def word_count_scores(experiment: Experiment, split: str) -> Dict[str, Dict[str, float]]:
    """hits@1/MAP/MRR of plain and IDF-weighted word overlap over each example's candidate sentences."""
    sentence_tokens = {sentence_id(doc, i): tokens
                       for doc in experiment.corpus.docs for i, tokens in enumerate(doc.sentences)}
    encoded = experiment.encoded[split]
    questions = experiment.question_tokens[split]
    candidate_tokens = [[sentence_tokens[sid] for sid in experiment.candidate_ids(split, i)]
                        for i in range(len(encoded))]
    golds = [ex.gold for ex in encoded]
    idf = idf_weights(list(sentence_tokens.values()))
    scores = {}
    for name, weights in (("word_count", None), ("word_count_idf", idf)):
        rankings: List[List[int]] = word_count_rankings(questions, candidate_tokens, weights)
        mean_ap, mrr = map_mrr(rankings, golds)
        scores[name] = {"hits1": hits_at_1(rankings, golds), "map": mean_ap, "mrr": mrr}
    return scores


def run(args, settings: Dict[str, Any]) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    experiment = experiment_from_checkpoint(ckpt, args.corpus_dir, splits=(args.split,))
    out_dir = args.output_dir or os.path.dirname(os.path.abspath(args.checkpoint))
    report, rankings = evaluate_split(experiment, ckpt.params, args.split,
                                      report_fingerprint(experiment, ckpt.fingerprint))

    if args.word_count:
        if experiment.config.sentence_mode:
            report.extra.update(word_count_scores(experiment, args.split))
        else:
            logger.warning("--word-count applies to sentence selection only; skipped")

    title = f"{args.split} ({experiment.kind.value}, {experiment.config.representation})"
    write_report(report, out_dir, f"report_{args.split}", title=title)
    dump_rankings(os.path.join(out_dir, f"rankings_{args.split}.jsonl"), experiment, args.split, rankings,
                  top_k=args.dump_top)
    if args.xlsx:
        write_comparison_workbook(os.path.join(out_dir, f"report_{args.split}.xlsx"), {title: report})

    print(report.to_text(title), end="")
    for name, row in report.extra.items():
        print(f"{name}: hits@1 {row['hits1']:.2f}  MAP {row['map']:.4f}  MRR {row['mrr']:.4f}")
    return 0
