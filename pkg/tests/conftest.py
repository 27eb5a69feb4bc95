# -*- coding: utf-8 -*-
"""Shared fixtures: a toy vocabulary and memory, and a small generated corpus."""

import os

import numpy as np
import pytest

from datagen import GenConfig, emit_corpus, generate_corpus
from featurize import Bank, KBTriple, Vocabulary, bow, entity_token, kb_slots, relation_tokens
from model import CandidateSet, HyperParams, ModelParams


SMALL_GEN = GenConfig(n_movies=30, n_actors=40, n_directors=10, n_writers=15, n_tags=20, n_genres=5,
                      n_languages=4, templates_per_relation=1, conjunction_rate=0.0, coreference_rate=0.0,
                      seed=7, patterns_per_question=1)


@pytest.fixture
def toy_triples():
    return [
        KBTriple("Blade Runner", "directed_by", "Ridley Scott"),
        KBTriple("Blade Runner", "release_year", "1982"),
        KBTriple("Alien", "directed_by", "Ridley Scott"),
        KBTriple("Alien", "release_year", "1979"),
        KBTriple("Heat", "directed_by", "Michael Mann"),
    ]


@pytest.fixture
def toy_vocab(toy_triples):
    streams = [["who", "directed", "blade_runner"], ["when", "was", "alien", "released"]]
    streams += [[entity_token(t.subject), t.relation, entity_token(t.object)] for t in toy_triples]
    entities = ["blade_runner", "alien", "heat", "ridley_scott", "michael_mann", "1982", "1979"]
    return Vocabulary.build(streams, entities=entities, extra_tokens=relation_tokens())


@pytest.fixture
def toy_slots(toy_triples, toy_vocab):
    return kb_slots(toy_triples, toy_vocab)


@pytest.fixture
def toy_candidates(toy_vocab):
    ids = sorted(toy_vocab.entities)
    return CandidateSet.from_vectors(ids, [bow([t], toy_vocab, Bank.KEY) for t in ids])


@pytest.fixture
def small_hyper():
    return HyperParams(d=8, hops=2, window=3, hash_threshold=1000, max_slots=100, lr=0.1, epochs=5, seed=3)


@pytest.fixture
def random_params(toy_vocab, small_hyper):
    def make(tied=True, hops=2, seed=0, scale=0.5):
        rng = np.random.default_rng(seed)
        d, dim = small_hyper.d, toy_vocab.dim
        A = rng.normal(0, scale, size=(d, dim))
        B = None if tied else rng.normal(0, scale, size=(d, dim))
        R = [np.eye(d) + rng.normal(0, scale / 2, size=(d, d)) for _ in range(hops)]
        return ModelParams(A, B, R, small_hyper)
    return make


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(SMALL_GEN)


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory, small_corpus):
    directory = str(tmp_path_factory.mktemp("corpus"))
    emit_corpus(small_corpus, directory)
    return directory


@pytest.fixture
def config_path(tmp_path):
    return os.path.join(str(tmp_path), "config.ini")
