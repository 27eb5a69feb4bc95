# -*- coding: utf-8 -*-
import dataclasses
import os
from collections import Counter, defaultdict

import pytest

from datagen import (ALL_QUESTION_TYPES, CARDINALITY, KB_FILE, LADDER_PRESETS, MANIFEST_FILE, OBJECT_ROLES,
                     POPULARITY_BINS, QA_FILES, QUESTION_TYPES, SPLITS, TWO_HOP_TYPE, GenConfig, KBIndex,
                     QuestionClass, SynthKB, assign_splits, emit_corpus, generate_corpus, generate_documents,
                     generate_kb, generate_questions, invert_documents, ladder_config, load_corpus,
                     load_document_templates, load_question_bank, recommended_hash_threshold, template_words)
from featurize import KBTriple, entity_token, split_words
from utils import CorpusFormatError, read_json

from conftest import SMALL_GEN


# --- Template Banks ---
def test_question_bank_has_every_class_with_three_patterns():
    bank = load_question_bank()
    assert set(bank) == set(ALL_QUESTION_TYPES)
    assert len(QUESTION_TYPES) == 13
    for qclass in bank.values():
        assert len(qclass.patterns) >= 3
    assert bank[TWO_HOP_TYPE].two_hop


def test_document_templates_cover_every_relation():
    templates = load_document_templates()
    assert set(templates) == set(OBJECT_ROLES)
    for bank in templates.values():
        assert len(bank) >= 8


# --- KB ---
def test_single_movie_kb_has_every_relation():
    config = GenConfig(n_movies=1, n_actors=5, n_directors=1, n_writers=3, n_tags=6, n_genres=2, n_languages=1)
    kb = generate_kb(config)
    assert len(kb.triples) >= 9
    assert {t.relation for t in kb.triples} == set(OBJECT_ROLES)


def test_kb_cardinalities_match_scan():
    kb = generate_kb(SMALL_GEN)
    counts = Counter((t.subject, t.relation) for t in kb.triples)
    assert len(kb.movies) == SMALL_GEN.n_movies
    for movie in kb.movies:
        for relation, (low, high) in CARDINALITY.items():
            assert low <= counts[(movie, relation)] <= high
    for t in kb.triples:
        if t.relation in ("has_imdb_rating", "has_imdb_votes"):
            assert t.object in POPULARITY_BINS


def test_kb_is_deterministic():
    assert generate_kb(SMALL_GEN).triples == generate_kb(SMALL_GEN).triples
    other = dataclasses.replace(SMALL_GEN, seed=SMALL_GEN.seed + 1)
    assert generate_kb(other).triples != generate_kb(SMALL_GEN).triples


def test_generated_names_avoid_template_words():
    kb = generate_kb(SMALL_GEN)
    forbidden = template_words(load_question_bank(), load_document_templates())
    for role in ("movie", "director", "writer", "actor", "tag"):
        for name in kb.pools[role]:
            assert not forbidden & set(split_words(name)), name


def test_entity_tokens_are_unique_across_roles():
    kb = generate_kb(SMALL_GEN)
    names = kb.entity_names()
    assert len({entity_token(n) for n in names}) == len(names)


def test_invalid_config_lists_problems():
    with pytest.raises(ValueError) as info:
        GenConfig(n_actors=1, conjunction_rate=1.5).validate()
    assert "n_actors" in str(info.value) and "conjunction_rate" in str(info.value)
    with pytest.raises(ValueError):
        GenConfig(train_fraction=0.5).validate()


# --- Questions ---
def test_pattern_substitution_and_gold():
    kb = SynthKB([KBTriple("Zorbu", "directed_by", "Kaita Brenol"),
                  KBTriple("Zorbu", "release_year", "1982")])
    bank = {"Movie to Director": QuestionClass("Movie to Director", "movie", ("directed_by",),
                                               ("who directed [@movie]?", "[@movie] director?",
                                                "director of [@movie]?"))}
    config = dataclasses.replace(SMALL_GEN, patterns_per_question=0)
    examples = [ex for ex in generate_questions(kb, config, bank) if ex.text == "who directed Zorbu?"]
    assert len(examples) == 1
    ex = examples[0]
    assert ex.answers == ("Kaita Brenol",)
    assert ex.qtype == "Movie to Director"
    assert ex.question == ("who", "directed", "zorbu")
    assert ex.gold_slot == frozenset({"triple:0"})


def test_multi_answer_questions():
    kb = SynthKB([KBTriple(m, "starred_actors", "Pel Voru") for m in ("Aka", "Bem", "Cid")])
    bank = {"Actor to Movie": QuestionClass("Actor to Movie", "actor", ("!starred_actors",),
                                            ("what movies did [@actor] star in?", "x [@actor]", "y [@actor]"))}
    examples = generate_questions(kb, SMALL_GEN, bank)
    assert examples and all(ex.answers == ("Aka", "Bem", "Cid") for ex in examples)
    assert examples[0].gold_slot == frozenset({"triple:0:rev", "triple:1:rev", "triple:2:rev"})


def test_splits_are_disjoint(small_corpus):
    owners = defaultdict(set)
    texts = defaultdict(set)
    for split in SPLITS:
        for ex in small_corpus.split(split):
            owners[(ex.qtype, ex.subject)].add(split)
            texts[ex.text].add(split)
    assert all(len(s) == 1 for s in owners.values())
    assert all(len(s) == 1 for s in texts.values())
    assert small_corpus.train and small_corpus.test


def test_split_assignment_is_stable_and_stratified():
    subjects = [f"Subject {i}" for i in range(100)]
    splits = assign_splits(SMALL_GEN, "Movie to Year", subjects)
    assert splits == assign_splits(SMALL_GEN, "Movie to Year", list(reversed(subjects)))
    assert Counter(splits.values()) == {"train": 80, "dev": 10, "test": 10}
    other = assign_splits(dataclasses.replace(SMALL_GEN, seed=SMALL_GEN.seed + 1), "Movie to Year", subjects)
    assert other != splits


def test_small_question_families_reach_dev_and_test():
    assert sorted(assign_splits(SMALL_GEN, "Director to Year", ["a", "b", "c"]).values()) == ["dev", "test", "train"]
    assert set(assign_splits(SMALL_GEN, "Director to Year", ["a", "b"]).values()) == {"train"}


def test_two_hop_family_has_dev_and_test_questions():
    config = dataclasses.replace(SMALL_GEN, n_movies=60, n_directors=40, two_hop_questions=True)
    questions = [ex for ex in generate_questions(generate_kb(config), config) if ex.qtype == TWO_HOP_TYPE]
    subjects = {split: {ex.subject for ex in questions if ex.split == split} for split in SPLITS}
    n = sum(len(s) for s in subjects.values())
    assert len(subjects["dev"]) == max(1, round(0.1 * n))
    assert len(subjects["test"]) == max(1, round(0.1 * n))


def test_every_question_is_answerable_from_kb_and_documents(small_corpus):
    triples = small_corpus.kb.triples
    docs = {entity_token(d.title): d for d in small_corpus.docs}
    for split in SPLITS:
        for ex in small_corpus.split(split):
            assert ex.gold_slot
            assert entity_token(ex.subject) in ex.question
            for source in ex.gold_slot:
                triple = triples[int(source.split(":")[1])]
                doc = docs[entity_token(triple.subject)]
                assert any(entity_token(triple.object) in sentence for sentence in doc.sentences)


def test_two_hop_questions_are_optional():
    kb = generate_kb(SMALL_GEN)
    assert not any(ex.qtype == TWO_HOP_TYPE for ex in generate_questions(kb, SMALL_GEN))
    config = dataclasses.replace(SMALL_GEN, two_hop_questions=True)
    two_hop = [ex for ex in generate_questions(kb, config) if ex.qtype == TWO_HOP_TYPE]
    assert two_hop
    index = KBIndex(kb)
    for ex in two_hop:
        years = {y for movie, _ in index.follow(ex.subject, "!directed_by")
                 for y, _ in index.follow(movie, "release_year")}
        assert set(ex.answers) == years
        assert len(ex.gold_slot) >= 2


# --- Documents ---
def test_one_template_documents_invert_to_kb(small_corpus):
    assert len(small_corpus.docs) == SMALL_GEN.n_movies
    for doc in small_corpus.docs:
        assert all(doc.title in sentence for sentence in doc.text)
    recovered = invert_documents(small_corpus.docs, templates_per_relation=1)
    assert Counter(recovered) == Counter(small_corpus.kb.triples)


def test_document_rates_match_configuration():
    config = GenConfig(n_movies=300, n_actors=300, n_directors=60, n_writers=100, n_tags=80, seed=3,
                       conjunction_rate=0.5, coreference_rate=0.8)
    stats = Counter()
    generate_documents(generate_kb(config), config, stats=stats)
    assert stats["sentences"] >= 1000
    conj = stats["conjunctions"] / stats["conjunction_opportunities"]
    coref = stats["coreferences"] / stats["coreference_opportunities"]
    assert abs(conj - 0.5) <= 0.03
    assert abs(coref - 0.8) <= 0.03


def test_coreference_never_touches_first_sentence():
    config = dataclasses.replace(SMALL_GEN, coreference_rate=1.0)
    for doc in generate_documents(generate_kb(config), config):
        title = entity_token(doc.title)
        assert title in doc.sentences[0]
        assert all(title not in s and "it" in s for s in doc.sentences[1:])


def test_full_conjunction_merges_pairs():
    config = dataclasses.replace(SMALL_GEN, conjunction_rate=1.0)
    stats = Counter()
    docs = generate_documents(generate_kb(config), config, stats=stats)
    assert stats["sentences"] == sum((n + 1) // 2 for n in
                                     Counter(t.subject for t in generate_kb(config).triples).values())
    assert all(" and " in s for s in docs[0].text[:-1])


# --- Emission ---
def test_emit_then_load_round_trips(small_corpus, small_corpus_dir):
    assert load_corpus(small_corpus_dir) == small_corpus


def test_emit_is_byte_identical(tmp_path, small_corpus):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    paths_a = emit_corpus(generate_corpus(SMALL_GEN), a)
    paths_b = emit_corpus(small_corpus, b)
    for pa, pb in zip(paths_a, paths_b):
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read(), os.path.basename(pa)


def test_manifest_and_line_counts(small_corpus, small_corpus_dir):
    manifest = read_json(os.path.join(small_corpus_dir, MANIFEST_FILE))
    assert manifest["seed"] == SMALL_GEN.seed
    assert manifest["config"] == SMALL_GEN.to_dict()
    assert manifest["recommended_hash_threshold"] == recommended_hash_threshold(SMALL_GEN.n_movies)
    for split in SPLITS:
        with open(os.path.join(small_corpus_dir, QA_FILES[split]), encoding="utf-8") as handle:
            assert sum(1 for _ in handle) == len(small_corpus.split(split)) == manifest["counts"][split]


def test_load_rejects_unknown_relation(tmp_path, small_corpus):
    directory = str(tmp_path)
    emit_corpus(small_corpus, directory)
    with open(os.path.join(directory, KB_FILE), "a", encoding="utf-8") as handle:
        handle.write("Zorbu\tproduced_by\tSomeone\n")
    with pytest.raises(CorpusFormatError):
        load_corpus(directory)


def test_load_rejects_unknown_question_type(tmp_path, small_corpus):
    directory = str(tmp_path)
    emit_corpus(small_corpus, directory)
    with open(os.path.join(directory, QA_FILES["test"]), "a", encoding="utf-8") as handle:
        handle.write("who is this?\tNobody\tMovie to Budget\n")
    with pytest.raises(CorpusFormatError):
        load_corpus(directory)


def test_load_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(str(tmp_path / "missing"))


# --- Ladder ---
def test_ladder_presets():
    assert list(LADDER_PRESETS)[0] == "kb"
    label, config, source = ladder_config(SMALL_GEN, "one_template_conj")
    assert source == "doc"
    assert (config.templates_per_relation, config.conjunction_rate, config.coreference_rate) == (1, 0.5, 0.0)
    assert config.n_movies == SMALL_GEN.n_movies
    with pytest.raises(ValueError):
        ladder_config(SMALL_GEN, "nope")


def test_recommended_hash_threshold():
    assert recommended_hash_threshold(17000) == 1000
    assert recommended_hash_threshold(100) == 100
