# -*- coding: utf-8 -*-
"""
Helpers shared by the subcommands: experiment resolution from settings and
flags, checkpoint-backed experiment loading, split evaluation and report
writing.
"""

import dataclasses
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

from checkpoint import Checkpoint, check_compatible
from datagen import load_corpus
from evaluation import EvalReport, breakdown_report
from experiment import Experiment, ExperimentConfig, build_vocabulary, prepare_experiment
from model import ModelKind, ModelParams, rank_examples
from utils import ensure_dir, write_jsonl

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
LAST_CHECKPOINT_FILE = "last.ckpt"
TRAIN_LOG_FILE = "train_log.jsonl"
CONFIG_SNAPSHOT = "config.ini"


def add_experiment_flags(parser):
    parser.add_argument('--corpus', dest='corpus_dir', help="Corpus directory (overrides [Experiment] corpus_dir)")
    parser.add_argument('--out', dest='output_dir', help="Output directory (overrides [Experiment] output_dir)")


def resolve_experiment_config(settings: Dict[str, Any], args) -> ExperimentConfig:
    """[Experiment] settings with the command-line flags applied."""
    config: ExperimentConfig = settings['experiment']
    changes = {}
    for name in ('corpus_dir', 'output_dir'):
        value = getattr(args, name, None)
        if value:
            changes[name] = value
    baseline = getattr(args, 'baseline', None)
    if baseline:
        changes['baseline'] = ModelKind(baseline)
    return dataclasses.replace(config, **changes).validate()


def experiment_from_checkpoint(checkpoint: Checkpoint, corpus_dir: Optional[str] = None,
                               splits: Sequence[str] = ()) -> Experiment:
    """
    Rebuilds the checkpoint's experiment over a corpus, refusing corpora whose
    vocabulary hash differs from the checkpoint's.

    Raises:
        CheckpointError: Vocabulary mismatch.
    """
    data = dict(checkpoint.experiment)
    if corpus_dir:
        data['corpus_dir'] = corpus_dir
    config = ExperimentConfig.from_dict(data)
    corpus = load_corpus(config.corpus_dir)
    check_compatible(checkpoint, build_vocabulary(corpus, config))
    return prepare_experiment(config, checkpoint.params.hyper, corpus, vocab=checkpoint.vocab,
                              index_arrays=checkpoint.index_arrays, splits=splits)


def report_fingerprint(experiment: Experiment, checkpoint_fingerprint: str) -> str:
    return f"corpus:{experiment.corpus_fingerprint} checkpoint:{checkpoint_fingerprint}"


def evaluate_split(experiment: Experiment, params: ModelParams, split: str,
                   fingerprint: str = "") -> Tuple[EvalReport, List[List[int]]]:
    """Ranks every example of `split` and builds its per-type report."""
    encoded = experiment.encoded[split]
    rankings = rank_examples(params, encoded, experiment.store, experiment.candidates)
    report = breakdown_report(rankings, encoded, fingerprint)
    return report, rankings


def write_report(report: EvalReport, out_dir: str, name: str, title: str = "") -> Tuple[str, str]:
    """Writes <name>.json and <name>.txt; returns both paths."""
    ensure_dir(out_dir)
    json_path = os.path.join(out_dir, f"{name}.json")
    text_path = os.path.join(out_dir, f"{name}.txt")
    with open(json_path, 'w', encoding='utf-8') as handle:
        handle.write(report.dumps() + "\n")
    with open(text_path, 'w', encoding='utf-8') as handle:
        handle.write(report.to_text(title))
    logger.info(f"Report written: {json_path}")
    return json_path, text_path


def dump_rankings(path: str, experiment: Experiment, split: str, rankings: List[List[int]], top_k: int = 10):
    """One JSON line per example: question, qtype, top-k candidate ids, gold ids."""
    rows = []
    for i, (ex, ranking) in enumerate(zip(experiment.examples(split), rankings)):
        ids = experiment.candidate_ids(split, i)
        gold = sorted(ids[g] for g in experiment.encoded[split][i].gold)
        rows.append({"question": ex.text, "qtype": ex.qtype, "ranking": [ids[r] for r in ranking[:top_k]],
                     "gold": gold})
    write_jsonl(path, rows)

