# -*- coding: utf-8 -*-
"""
Wires a corpus into a runnable experiment: vocabulary, memory slots for the
chosen representation, the hashed memory store, candidate sets and the
encoded train/dev/test examples. Shared by the train, eval, inspect and
ladder commands so every command featurizes a corpus the same way.
"""

import logging
import os
from collections import Counter, OrderedDict
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from datagen import SPLITS, QAExample, SynthCorpus, corpus_files, load_corpus
from featurize import (Bank, Document, KBTriple, MemorySlot, Vocabulary, bow, entity_token,
                       exact_match_features, kb_slots, mark_numbers, relation_tokens,
                       sentence_id, sentence_slots, window_sentence_slots, window_slots)
from memory_store import MemoryStore, build_index, hash_recall
from model import CandidateSet, EncodedExample, HyperParams, ModelKind, ModelParams, memnn_slots
from utils import fingerprint_files

logger = logging.getLogger(__name__)

KB_REPRESENTATIONS = ("kb_triple",)
DOC_REPRESENTATIONS = ("sentence", "window", "window_center", "window_title",
                       "window_center_title", "window_sentence")
REPRESENTATIONS = KB_REPRESENTATIONS + DOC_REPRESENTATIONS
CENTER_ENCODED = ("window_center", "window_center_title")
SENTENCE_MODE = "window_sentence"


@dataclass
class ExperimentConfig:
    source: str = "kb"
    representation: str = "kb_triple"
    baseline: ModelKind = ModelKind.KV_MEMNN
    corpus_dir: str = "corpus"
    output_dir: str = "runs/default"
    hashing: bool = True
    number_feature: bool = False
    exact_match: bool = False

    def validate(self) -> "ExperimentConfig":
        """
        Raises:
            ValueError: Unknown source/representation/baseline, a representation
                that does not fit the source, or exact_match outside sentence mode.
        """
        if self.source not in ("kb", "doc"):
            raise ValueError(f"source must be 'kb' or 'doc', got '{self.source}'.")
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"Unknown representation '{self.representation}'; expected one of {REPRESENTATIONS}.")
        if self.source == "kb" and self.representation not in KB_REPRESENTATIONS:
            raise ValueError(f"Representation '{self.representation}' needs source=doc.")
        if self.source == "doc" and self.representation not in DOC_REPRESENTATIONS:
            raise ValueError(f"Representation '{self.representation}' needs source=kb.")
        self.baseline = ModelKind(self.baseline)
        if self.exact_match and self.representation != SENTENCE_MODE:
            raise ValueError(f"exact_match only applies to representation={SENTENCE_MODE}.")
        return self

    @property
    def sentence_mode(self) -> bool:
        return self.representation == SENTENCE_MODE

    @property
    def center_encoded(self) -> bool:
        return self.representation in CENTER_ENCODED

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["baseline"] = ModelKind(self.baseline).value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        return cls(**dict(data)).validate()


@dataclass
class Experiment:
    config: ExperimentConfig
    hyper: HyperParams
    corpus: SynthCorpus
    vocab: Vocabulary
    store: MemoryStore
    candidates: Optional[CandidateSet]
    encoded: Dict[str, List[EncodedExample]]
    question_tokens: Dict[str, List[List[str]]]
    corpus_fingerprint: str
    skipped: Counter = field(default_factory=Counter)

    @property
    def kind(self) -> ModelKind:
        return self.config.baseline

    @property
    def hops(self) -> int:
        return 0 if self.kind is ModelKind.EMBEDDINGS else self.hyper.hops

    @property
    def selection(self) -> str:
        return "mrr" if self.config.sentence_mode else "hits1"

    def examples(self, split: str) -> List[QAExample]:
        return self.corpus.split(split)

    def init_params(self) -> ModelParams:
        return ModelParams.initialize(self.vocab.dim, self.hyper, hops=self.hops)

    def candidate_ids(self, split: str, index: int) -> List[str]:
        ex = self.encoded[split][index]
        return (ex.candidates or self.candidates).ids


# --- Tokens ---
def question_tokens(example: QAExample, number_feature: bool) -> List[str]:
    tokens = list(example.question)
    return mark_numbers(tokens) if number_feature else tokens


def _featurized_docs(docs: Sequence[Document], number_feature: bool) -> List[Document]:
    if not number_feature:
        return list(docs)
    return [Document(d.title, [mark_numbers(s) for s in d.sentences], list(d.text)) for d in docs]


def build_vocabulary(corpus: SynthCorpus, config: ExperimentConfig) -> Vocabulary:
    """
    Dictionary over the training questions, the knowledge source, every
    relation token and every KB entity. Dev/test-only words stay out of it.
    """
    number_docs = config.number_feature and config.sentence_mode
    streams: List[List[str]] = [question_tokens(ex, config.number_feature) for ex in corpus.train]
    if config.source == "kb":
        streams.extend([entity_token(t.subject), t.relation, entity_token(t.object)] for t in corpus.kb.triples)
    else:
        for doc in _featurized_docs(corpus.docs, number_docs):
            streams.extend(doc.sentences)
    entities = [entity_token(n) for n in corpus.kb.entity_names()]
    return Vocabulary.build(streams, entities=entities, extra_tokens=relation_tokens(),
                            center_encoded=config.center_encoded)


# --- Slots ---
def build_slots(corpus: SynthCorpus, config: ExperimentConfig, vocab: Vocabulary, window: int,
                skipped: Optional[Counter] = None) -> List[MemorySlot]:
    """Memory slots of the configured representation (key == value for the MemNN baseline)."""
    rep = config.representation
    if rep == "kb_triple":
        slots = kb_slots(corpus.kb.triples, vocab, skipped)
    else:
        docs = _featurized_docs(corpus.docs, config.number_feature and config.sentence_mode)
        slots = []
        for doc in docs:
            if rep == "sentence":
                slots.extend(sentence_slots(doc, vocab))
            elif rep == SENTENCE_MODE:
                slots.extend(window_sentence_slots(doc, window, vocab))
            else:
                slots.extend(window_slots(doc, window, vocab, center_encoding=config.center_encoded,
                                          title=rep in ("window_title", "window_center_title")))
    if config.baseline is ModelKind.MEMNN:
        slots = memnn_slots(slots)
    logger.info(f"Built {len(slots)} memory slots ({rep}, {config.baseline.value})")
    return slots


def entity_candidates(corpus: SynthCorpus, vocab: Vocabulary) -> CandidateSet:
    """Every KB entity; answers use the value bank when values are center encoded."""
    bank = Bank.VALUE_CENTER if vocab.center_encoded else Bank.KEY
    ids = sorted(t for t in (entity_token(n) for n in corpus.kb.entity_names()) if t in vocab)
    return CandidateSet.from_vectors(ids, [bow([t], vocab, bank) for t in ids], mode="entity")


# --- Gold Support ---
def _triple_of(source: str, triples: Sequence[KBTriple]) -> KBTriple:
    return triples[int(source.split(":")[1])]


def gold_sentences(example: QAExample, corpus: SynthCorpus,
                   docs_by_token: Mapping[str, Document]) -> Set[Tuple[str, int]]:
    """
    (document token, sentence index) pairs realizing any gold supporting fact:
    sentences of the movie's document that mention the fact's object.
    """
    found: Set[Tuple[str, int]] = set()
    for source in example.gold_slot:
        triple = _triple_of(source, corpus.kb.triples)
        doc_token = entity_token(triple.subject)
        doc = docs_by_token.get(doc_token)
        if doc is None:
            continue
        obj = entity_token(triple.object)
        for s_idx, tokens in enumerate(doc.sentences):
            if obj in tokens:
                found.add((doc_token, s_idx))
    return found


def gold_slot_ids(example: QAExample, corpus: SynthCorpus, store: MemoryStore,
                  source_map: Mapping[str, List[int]], docs_by_token: Mapping[str, Document],
                  config: ExperimentConfig) -> FrozenSet[int]:
    """Slots that hold a gold supporting fact of `example`."""
    if config.source == "kb":
        return frozenset(i for src in example.gold_slot for i in source_map.get(src, ()))
    sentences = gold_sentences(example, corpus, docs_by_token)
    if not sentences:
        return frozenset()
    answers = example.answer_tokens | {entity_token(example.subject)}
    ids = set()
    for (doc_token, s_idx) in sentences:
        for slot_id in source_map.get(doc_token, ()):
            slot = store.slots[slot_id]
            if slot.provenance.sentence != s_idx:
                continue
            if config.sentence_mode or slot.value_candidates & answers:
                ids.add(slot_id)
    return frozenset(ids)


def gold_slot_map(examples: Sequence[QAExample], corpus: SynthCorpus, store: MemoryStore,
                  config: ExperimentConfig) -> Dict[int, FrozenSet[int]]:
    """Example index -> gold supporting slot ids (examples without any are left out)."""
    source_map = store.slots_by_source()
    docs_by_token = {entity_token(d.title): d for d in corpus.docs}
    mapping = {}
    for i, ex in enumerate(examples):
        ids = gold_slot_ids(ex, corpus, store, source_map, docs_by_token, config)
        if ids:
            mapping[i] = ids
    return mapping


# --- Encoding ---
class SentenceCandidates:
    """Per-example candidate sentences: those of the documents reached by hashing."""

    def __init__(self, corpus: SynthCorpus, vocab: Vocabulary, number_feature: bool, exact_match: bool):
        self.vocab = vocab
        self.exact_match = exact_match
        self.docs_by_token = {entity_token(d.title): d for d in corpus.docs}
        featurized = _featurized_docs(corpus.docs, number_feature)
        self.tokens: Dict[str, List[str]] = {}
        self.vectors: Dict[str, Any] = {}
        for doc in featurized:
            for s_idx, sentence in enumerate(doc.sentences):
                sid = sentence_id(doc, s_idx)
                self.tokens[sid] = sentence
                self.vectors[sid] = bow(sentence, vocab, Bank.KEY)

    def build(self, store: MemoryStore, slot_ids: Sequence[int], q_tokens: Sequence[str]) -> CandidateSet:
        ids = list(OrderedDict.fromkeys(sid for i in slot_ids for sid in sorted(store.slots[i].value_candidates)))
        vectors = []
        for sid in ids:
            vec = self.vectors[sid]
            if self.exact_match:
                vec = vec + exact_match_features(q_tokens, self.tokens[sid], self.vocab)
            vectors.append(vec)
        return CandidateSet.from_vectors(ids, vectors, mode="sentence")

    def gold_ids(self, example: QAExample, corpus: SynthCorpus) -> Set[str]:
        return {f"{doc_token}#{s_idx}" for doc_token, s_idx in gold_sentences(example, corpus, self.docs_by_token)}


def encode_split(examples: Sequence[QAExample], config: ExperimentConfig, vocab: Vocabulary,
                 store: MemoryStore, candidates: Optional[CandidateSet], corpus: SynthCorpus,
                 sentence_candidates: Optional[SentenceCandidates] = None) -> Tuple[List[EncodedExample],
                                                                                    List[List[str]]]:
    """
    Featurizes questions and resolves each example's memory and gold candidates.

    Returns:
        (encoded examples, the question tokens used for hashing)
    """
    encoded, token_lists = [], []
    all_slots = list(range(len(store)))
    unreachable = 0
    for ex in examples:
        tokens = question_tokens(ex, config.number_feature)
        question = bow(tokens, vocab, Bank.QUESTION)
        if question.nnz == 0:
            logger.warning(f"Question '{ex.text}' is entirely out of vocabulary")
        slot_ids = store.hash_ids(question.indices) if config.hashing else all_slots
        if config.sentence_mode:
            cand = sentence_candidates.build(store, slot_ids, tokens)
            gold = cand.gold_indices(sentence_candidates.gold_ids(ex, corpus))
        else:
            cand = None
            gold = candidates.gold_indices(ex.answer_tokens)
        if not gold:
            unreachable += 1
        encoded.append(EncodedExample(question, gold, list(slot_ids), ex.qtype, cand))
        token_lists.append(tokens)
    if unreachable:
        logger.warning(f"{unreachable}/{len(examples)} examples have no gold answer among their candidates")
    return encoded, token_lists


def prepare_experiment(config: ExperimentConfig, hyper: HyperParams, corpus: Optional[SynthCorpus] = None,
                       vocab: Optional[Vocabulary] = None,
                       index_arrays: Optional[Mapping[str, np.ndarray]] = None,
                       splits: Sequence[str] = SPLITS) -> Experiment:
    """
    Loads the corpus (unless given) and builds every structure a command needs.

    Args:
        config: Experiment configuration.
        hyper: Hyper-parameters (window, hash threshold, max slots are used here).
        corpus: Pre-loaded corpus.
        vocab: Vocabulary to reuse (from a checkpoint) instead of building one.
        index_arrays: Serialized inverted index to restore instead of rebuilding.
        splits: Which splits to encode (others are left empty).

    Raises:
        ValueError: Invalid configuration.
        FileNotFoundError: Missing corpus directory or file.
        CorpusFormatError: Malformed corpus.
    """
    config.validate()
    hyper.validate()
    if corpus is None:
        if not os.path.isdir(config.corpus_dir):
            raise FileNotFoundError(f"Corpus directory not found: {config.corpus_dir}")
        corpus = load_corpus(config.corpus_dir)
    fingerprint = fingerprint_files(corpus_files(config.corpus_dir)) if os.path.isdir(config.corpus_dir) else ""
    vocab = vocab or build_vocabulary(corpus, config)
    skipped: Counter = Counter()
    slots = build_slots(corpus, config, vocab, hyper.window, skipped)
    if index_arrays is not None:
        store = MemoryStore.from_index_arrays(slots, vocab, hyper.hash_threshold, hyper.max_slots, index_arrays)
    else:
        store = build_index(slots, vocab, hyper.hash_threshold, hyper.max_slots)

    candidates, sentence_candidates = None, None
    if config.sentence_mode:
        sentence_candidates = SentenceCandidates(corpus, vocab, config.number_feature, config.exact_match)
    else:
        candidates = entity_candidates(corpus, vocab)

    encoded: Dict[str, List[EncodedExample]] = {s: [] for s in SPLITS}
    tokens: Dict[str, List[List[str]]] = {s: [] for s in SPLITS}
    for split in splits:
        encoded[split], tokens[split] = encode_split(corpus.split(split), config, vocab, store, candidates,
                                                     corpus, sentence_candidates)
    return Experiment(config, hyper, corpus, vocab, store, candidates, encoded, tokens, fingerprint, skipped)


def hash_recall_by_split(experiment: Experiment) -> Dict[str, float]:
    """
    Fraction of each split's questions whose gold supporting slot survives hashing.
    Splits that are empty or were not encoded are left out.
    """
    recall = {}
    for split in SPLITS:
        examples = experiment.examples(split)
        # unencoded splits have no hashed question tokens to measure
        if not examples or not experiment.question_tokens[split]:
            continue
        gold = gold_slot_map(examples, experiment.corpus, experiment.store, experiment.config)
        recall[split] = hash_recall(experiment.store, experiment.question_tokens[split], gold)
    return recall
