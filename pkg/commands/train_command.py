# -*- coding: utf-8 -*-
"""
`train`: fits a model on a corpus and writes the experiment directory:
model.ckpt (best on dev), last.ckpt (final, for --resume), train_log.jsonl,
the dev report and a snapshot of the resolved configuration.
"""

import dataclasses
import json
import logging
import os
import shutil
from typing import Any, Dict, Optional, Tuple

from checkpoint import check_compatible, checkpoint_fingerprint, load_checkpoint, save_checkpoint
from config import resolve_settings, save_config
from datagen import load_corpus
from experiment import (Experiment, ExperimentConfig, build_vocabulary, hash_recall_by_split,
                        prepare_experiment)
from model import EpochRecord, HyperParams, ModelKind, TrainResult, best_in_history, train
from evaluation import EvalReport
from utils import ensure_dir
from commands.common import (CHECKPOINT_FILE, CONFIG_SNAPSHOT, LAST_CHECKPOINT_FILE, TRAIN_LOG_FILE,
                             add_experiment_flags, evaluate_split, report_fingerprint,
                             resolve_experiment_config, write_report)

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('train', help="Train a KV-MemNN (or baseline) on a corpus")
    add_experiment_flags(parser)
    parser.add_argument('--baseline', choices=[k.value for k in ModelKind],
                        help="Model kind (overrides [Experiment] baseline)")
    parser.add_argument('--resume', metavar='CKPT', help="Continue training from a checkpoint")
    parser.add_argument('--epochs', type=int, help="Override [Training] epochs")
    parser.set_defaults(func=run)


def keep_prior_best(resume: str, best_path: str) -> bool:
    """
    Makes `best_path` hold the best-on-dev checkpoint saved next to `resume`.
    Returns False when there is none to keep.
    """
    source = os.path.join(os.path.dirname(os.path.abspath(resume)), CHECKPOINT_FILE)
    if not os.path.isfile(source):
        logger.warning(f"No {CHECKPOINT_FILE} next to {resume}; writing a new one from this run")
        return False
    if os.path.abspath(source) != os.path.abspath(best_path):
        shutil.copyfile(source, best_path)
    return True


def run_training(config: ExperimentConfig, hyper: HyperParams, progress: bool = False,
                 resume: Optional[str] = None) -> Tuple[Experiment, TrainResult, Optional[EvalReport]]:
    """
    Trains and writes every artifact into config.output_dir.

    With `resume`, the checkpoint's experiment, vocabulary, index and params
    are reused; epochs continue from its epoch count and `hyper.epochs` more
    are run. model.ckpt is only replaced when a new epoch beats the best dev
    score stored in the checkpoint's history.

    Raises:
        CheckpointError: Resume checkpoint does not fit the corpus.
        FloatingPointError: Training diverged.
    """
    out_dir = ensure_dir(config.output_dir)
    prior_history, start_epoch = [], 0
    if resume:
        ckpt = load_checkpoint(resume)
        config = ExperimentConfig.from_dict({**ckpt.experiment, 'output_dir': config.output_dir})
        hyper = dataclasses.replace(ckpt.params.hyper, epochs=hyper.epochs)
        corpus = load_corpus(config.corpus_dir)
        check_compatible(ckpt, build_vocabulary(corpus, config))
        experiment = prepare_experiment(config, hyper, corpus, vocab=ckpt.vocab, index_arrays=ckpt.index_arrays)
        params = ckpt.params
        params.hyper = hyper
        start_epoch, prior_history = ckpt.epochs_completed, list(ckpt.history)
        logger.info(f"Resuming from {resume} at epoch {start_epoch}")
    else:
        experiment = prepare_experiment(config, hyper)
        params = experiment.init_params()

    if experiment.kind is not ModelKind.EMBEDDINGS:
        for split, recall in hash_recall_by_split(experiment).items():
            logger.info(f"Hash recall ({split}): {recall:.3f}")

    dev = experiment.encoded['dev'] or None
    prior_best, prior_best_epoch = best_in_history(prior_history, experiment.selection)
    if dev and prior_best_epoch is not None:
        logger.info(f"Best dev {experiment.selection} before resume: {prior_best:.4f} (epoch {prior_best_epoch})")

    log_path = os.path.join(out_dir, TRAIN_LOG_FILE)
    log_handle = open(log_path, 'a' if resume else 'w', encoding='utf-8')

    def on_epoch(record: EpochRecord):
        log_handle.write(json.dumps(record.to_dict()) + "\n")
        log_handle.flush()

    try:
        result = train(params, experiment.encoded['train'], experiment.store, experiment.candidates, hyper,
                       dev=dev, start_epoch=start_epoch, selection=experiment.selection,
                       on_epoch=on_epoch, progress=progress, best_metric=prior_best)
    finally:
        log_handle.close()

    epochs_completed = start_epoch + hyper.epochs
    history = prior_history + [r.to_dict() for r in result.history]
    best_path = os.path.join(out_dir, CHECKPOINT_FILE)
    kept = bool(resume and dev and prior_best_epoch is not None and result.best_epoch is None
                and keep_prior_best(resume, best_path))
    if kept:
        logger.info(f"No resumed epoch beat epoch {prior_best_epoch}; keeping {best_path}")
        result.params, result.best_epoch = load_checkpoint(best_path).params, prior_best_epoch

    snapshots = [(LAST_CHECKPOINT_FILE, result.final_params)]
    if not kept:
        snapshots.append((CHECKPOINT_FILE, result.params))
    index_arrays = experiment.store.index_arrays()
    for path, snapshot in snapshots:
        save_checkpoint(os.path.join(out_dir, path), snapshot, experiment.kind, config.to_dict(),
                        experiment.vocab, index_arrays, experiment.corpus_fingerprint, epochs_completed,
                        [EpochRecord(**r) for r in history])

    report = None
    if dev:
        ckpt_fp = checkpoint_fingerprint(best_path)
        report, _ = evaluate_split(experiment, result.params, 'dev', report_fingerprint(experiment, ckpt_fp))
        write_report(report, out_dir, 'report_dev', title=f"dev ({experiment.kind.value}, {config.representation})")
    return experiment, result, report


def run(args, settings: Dict[str, Any]) -> int:
    config = resolve_experiment_config(settings, args)
    hyper: HyperParams = settings['hyper']
    if args.epochs is not None:
        hyper = dataclasses.replace(hyper, epochs=args.epochs).validate()
    experiment, result, report = run_training(config, hyper, settings.get('progress', False), args.resume)
    # the experiment carries the config and hyper-parameters that actually ran
    save_config(os.path.join(experiment.config.output_dir, CONFIG_SNAPSHOT),
                resolve_settings(settings, experiment.config, experiment.hyper))
    print(f"Trained {experiment.kind.value} ({experiment.config.representation}) for "
          f"{len(result.history)} epochs; best epoch {result.best_epoch}")
    if report is not None:
        print(report.to_text("dev"), end="")
    return 0
