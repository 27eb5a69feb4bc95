# -*- coding: utf-8 -*-
"""
`inspect`: answers one free-text question with a checkpoint and shows the
memory it read: the number of hashed slots, the top-addressed slots of every
hop with their probabilities, and the top-ranked answers.
"""

import logging
from typing import Any, Dict, List, Mapping

import numpy as np

from checkpoint import load_checkpoint
from experiment import Experiment, SentenceCandidates
from featurize import Bank, Document, MemorySlot, bow, entity_token, mark_numbers, tokenize
from model import Prediction, predict
from commands.common import experiment_from_checkpoint

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('inspect', help="Answer one question and show the memory it addressed")
    parser.add_argument('checkpoint', metavar='CKPT', help="Checkpoint file written by train")
    parser.add_argument('question', help="Question text, e.g. \"who directed Blade Runner?\"")
    parser.add_argument('--corpus', dest='corpus_dir', help="Corpus directory (default: the checkpoint's)")
    parser.add_argument('--top-k', type=int, default=5, help="Slots and answers shown per list")
    parser.set_defaults(func=run)


def describe_slot(slot: MemorySlot, experiment: Experiment, docs_by_token: Mapping[str, Document]) -> str:
    source = slot.provenance.source
    if source.startswith("triple:"):
        triple = experiment.corpus.kb.triples[int(source.split(":")[1])]
        if source.endswith(":rev"):
            triple = triple.reversed()
        return f"{triple.subject} {triple.relation} {triple.object}"
    doc = docs_by_token.get(source)
    if doc is None:
        return source
    p = slot.provenance
    return f"[{doc.title} #{p.sentence}] " + " ".join(doc.sentences[p.sentence][p.start:p.end])


def inspect_question(experiment: Experiment, params, text: str, top_k: int = 5) -> List[str]:
    """
    Returns the printable report lines for one question. A question with no
    in-vocabulary word still runs: hashing falls back to the first memory slots.

    Raises:
        ValueError: Sentence mode reached no candidate sentence.
    """
    config = experiment.config
    tokens = tokenize(text, experiment.corpus.kb.entity_dictionary())
    if config.number_feature:
        tokens = mark_numbers(tokens)
    question = bow(tokens, experiment.vocab, Bank.QUESTION)
    unknown = [t for t in tokens if t not in experiment.vocab]
    if question.nnz == 0:
        logger.warning(f"No word of '{text}' is in the model's vocabulary; answering from the fallback slots")
    elif unknown:
        logger.warning(f"Out-of-vocabulary words ignored: {unknown}")

    store = experiment.store
    slot_ids = (store.hash_ids(question.indices) if config.hashing else list(range(len(store)))) \
        if experiment.hops > 0 else []
    if config.sentence_mode:
        candidates = SentenceCandidates(experiment.corpus, experiment.vocab, config.number_feature,
                                        config.exact_match).build(store, slot_ids, tokens)
        if len(candidates) == 0:
            raise ValueError(f"No candidate sentence reached by '{text}'.")
    else:
        candidates = experiment.candidates
    prediction: Prediction = predict(params, question, store, candidates, slot_ids)

    docs_by_token = {entity_token(d.title): d for d in experiment.corpus.docs}
    lines = [f"question tokens: {' '.join(tokens)}", f"memory slots N = {len(prediction.slot_ids)}"]
    for h, step in enumerate(prediction.trace.hops, start=1):
        lines.append(f"hop {h}:")
        order = np.argsort(-step.addressing, kind="stable")[:top_k]
        for j in order:
            slot = store.slots[prediction.slot_ids[j]]
            lines.append(f"  {step.addressing[j]:.4f}  {describe_slot(slot, experiment, docs_by_token)}")
    lines.append("answers:")
    for rank, (cid, score) in enumerate(zip(prediction.ranked_ids(candidates)[:top_k], prediction.scores),
                                        start=1):
        lines.append(f"  {rank}. {cid}  {score:.4f}")
    return lines


def run(args, settings: Dict[str, Any]) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    experiment = experiment_from_checkpoint(ckpt, args.corpus_dir)
    for line in inspect_question(experiment, ckpt.params, args.question, args.top_k):
        print(line)
    return 0
