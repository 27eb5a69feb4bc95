# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from datagen import SPLITS
from experiment import (DOC_REPRESENTATIONS, ExperimentConfig, build_slots, build_vocabulary, entity_candidates,
                        gold_sentences, gold_slot_map, hash_recall_by_split, prepare_experiment)
from featurize import entity_token, relation_tokens
from model import HyperParams, ModelKind

HYPER = HyperParams(d=8, hops=1, window=3, hash_threshold=math.inf, max_slots=10_000, epochs=1, seed=2)


def _config(corpus_dir, **changes):
    data = {"corpus_dir": corpus_dir, "output_dir": "unused"}
    data.update(changes)
    return ExperimentConfig(**data).validate()


def _window_centers(corpus, vocab):
    return sum(1 for doc in corpus.docs for s in doc.sentences for t in s if t in vocab.entities)


# --- Configuration ---
def test_config_rejects_mismatched_representation():
    with pytest.raises(ValueError):
        ExperimentConfig(source="kb", representation="sentence").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(source="doc", representation="kb_triple").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(source="doc", representation="window", exact_match=True).validate()
    with pytest.raises(ValueError):
        ExperimentConfig(baseline="lstm").validate()


def test_config_dict_round_trip():
    config = ExperimentConfig(source="doc", representation="window_center_title", baseline=ModelKind.MEMNN)
    assert ExperimentConfig.from_dict(config.to_dict()) == config
    assert config.to_dict()["baseline"] == "memnn"


# --- Vocabulary and Slots ---
def test_vocabulary_covers_training_questions_and_entities(small_corpus, small_corpus_dir):
    vocab = build_vocabulary(small_corpus, _config(small_corpus_dir))
    for ex in small_corpus.train:
        assert all(t in vocab for t in ex.question)
    for name in small_corpus.kb.entity_names():
        assert entity_token(name) in vocab.entities
    assert all(t in vocab for t in relation_tokens())


def test_kb_triple_slots_double_the_kb(small_corpus, small_corpus_dir):
    config = _config(small_corpus_dir)
    vocab = build_vocabulary(small_corpus, config)
    assert len(build_slots(small_corpus, config, vocab, 3)) == 2 * len(small_corpus.kb.triples)


@pytest.mark.parametrize("representation", DOC_REPRESENTATIONS)
def test_document_slot_counts(small_corpus, small_corpus_dir, representation):
    config = _config(small_corpus_dir, source="doc", representation=representation)
    vocab = build_vocabulary(small_corpus, config)
    slots = build_slots(small_corpus, config, vocab, 3)
    n_sentences = sum(len(doc.sentences) for doc in small_corpus.docs)
    n_windows = _window_centers(small_corpus, vocab)
    expected = {
        "sentence": n_sentences,
        "window": n_windows,
        "window_center": n_windows,
        "window_title": 2 * n_windows,
        "window_center_title": 2 * n_windows,
        "window_sentence": n_windows,
    }[representation]
    assert len(slots) == expected
    assert vocab.center_encoded == (representation in ("window_center", "window_center_title"))


def test_memnn_slots_use_keys_as_values(small_corpus, small_corpus_dir):
    config = _config(small_corpus_dir, baseline=ModelKind.MEMNN)
    vocab = build_vocabulary(small_corpus, config)
    for slot in build_slots(small_corpus, config, vocab, 3):
        assert slot.key == slot.value


def test_entity_candidates_follow_value_bank(small_corpus, small_corpus_dir):
    plain = build_vocabulary(small_corpus, _config(small_corpus_dir))
    candidates = entity_candidates(small_corpus, plain)
    assert candidates.ids == sorted(candidates.ids)
    assert len(candidates) == len(small_corpus.kb.entity_names())
    centered = build_vocabulary(small_corpus, _config(small_corpus_dir, source="doc",
                                                      representation="window_center"))
    shifted = entity_candidates(small_corpus, centered)
    assert np.all(shifted.features.indices >= centered.base_size)


def test_gold_sentences_mention_the_answer(small_corpus):
    docs_by_token = {entity_token(d.title): d for d in small_corpus.docs}
    for ex in small_corpus.train[:50]:
        found = gold_sentences(ex, small_corpus, docs_by_token)
        assert found
        for doc_token, s_idx in found:
            sentence = docs_by_token[doc_token].sentences[s_idx]
            assert any(entity_token(a) in sentence for a in ex.answers + (ex.subject,))


# --- Prepared Experiments ---
def test_prepare_kb_experiment(small_corpus_dir):
    experiment = prepare_experiment(_config(small_corpus_dir), HYPER)
    assert experiment.corpus_fingerprint
    assert experiment.selection == "hits1"
    for split in SPLITS:
        encoded = experiment.encoded[split]
        assert len(encoded) == len(experiment.examples(split))
        assert all(ex.gold for ex in encoded)
        assert all(ex.candidates is None for ex in encoded)
    # Every question names its subject, which keys its gold triples.
    assert hash_recall_by_split(experiment) == {split: 1.0 for split in SPLITS if experiment.examples(split)}


def test_gold_slot_map_points_at_supporting_triples(small_corpus, small_corpus_dir):
    experiment = prepare_experiment(_config(small_corpus_dir), HYPER, small_corpus, splits=("train",))
    mapping = gold_slot_map(small_corpus.train, small_corpus, experiment.store, experiment.config)
    assert len(mapping) == len(small_corpus.train)
    for i, slot_ids in mapping.items():
        sources = {experiment.store.slots[s].provenance.source for s in slot_ids}
        assert sources == set(small_corpus.train[i].gold_slot)


def test_prepare_only_encodes_requested_splits(small_corpus, small_corpus_dir):
    experiment = prepare_experiment(_config(small_corpus_dir), HYPER, small_corpus, splits=("test",))
    assert experiment.encoded["train"] == []
    assert len(experiment.encoded["test"]) == len(small_corpus.test)


def test_hash_recall_leaves_out_unencoded_splits(small_corpus, small_corpus_dir):
    experiment = prepare_experiment(_config(small_corpus_dir), HYPER, small_corpus, splits=("test",))
    assert hash_recall_by_split(experiment) == {"test": 1.0}


def test_hash_recall_is_a_fraction(small_corpus, small_corpus_dir):
    hyper = HyperParams(d=8, hops=1, window=3, hash_threshold=5, max_slots=20)
    config = _config(small_corpus_dir, source="doc", representation="window")
    recall = hash_recall_by_split(prepare_experiment(config, hyper, small_corpus))
    assert recall and all(0.0 <= r <= 1.0 for r in recall.values())


def test_sentence_mode_candidates(small_corpus, small_corpus_dir):
    config = _config(small_corpus_dir, source="doc", representation="window_sentence", exact_match=True)
    experiment = prepare_experiment(config, HYPER, small_corpus, splits=("dev",))
    assert experiment.selection == "mrr"
    assert experiment.candidates is None
    for i, ex in enumerate(experiment.encoded["dev"]):
        assert ex.candidates.mode == "sentence"
        assert all("#" in cid for cid in experiment.candidate_ids("dev", i))


def test_embeddings_baseline_has_no_hops(small_corpus, small_corpus_dir):
    config = _config(small_corpus_dir, baseline=ModelKind.EMBEDDINGS)
    experiment = prepare_experiment(config, HYPER, small_corpus, splits=())
    assert experiment.hops == 0
    assert experiment.init_params().hops == 0


def test_prepare_missing_corpus(tmp_path):
    with pytest.raises(FileNotFoundError):
        prepare_experiment(_config(str(tmp_path / "nowhere")), HYPER)
