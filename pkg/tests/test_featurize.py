# -*- coding: utf-8 -*-
import itertools
from collections import Counter

import numpy as np
import pytest

from featurize import (NUMBER_TOKEN, TITLE_TOKEN, WINDOW_TOKEN, Bank, Document, EntityDictionary, KBTriple,
                       Vocabulary, binary_weighting, bow, entity_token, kb_slots, mark_numbers, relation_tokens,
                       sentence_slots, tokenize, window_sentence_slots, window_slots)


def _doc_vocab(sentences, entities, title="T", center_encoded=False):
    return Vocabulary.build(sentences, entities=entities, extra_tokens=[entity_token(title)],
                            center_encoded=center_encoded)


def _key_tokens(vocab, vec):
    return sorted(vocab.token(i) for i in vec.indices)


# --- Tokenization ---
def test_tokenize_collapses_entity():
    entities = EntityDictionary(["Blade Runner"])
    assert tokenize("Who directed Blade Runner?", entities) == ["who", "directed", "blade_runner"]


def test_tokenize_empty():
    assert tokenize("", EntityDictionary(["X"])) == []


def test_tokenize_prefers_longest_entity():
    entities = EntityDictionary(["San Jose", "San Jose State"])
    assert tokenize("San Jose State wins", entities) == ["san_jose_state", "wins"]
    assert tokenize("San Jose wins", entities) == ["san_jose", "wins"]


def test_tokenize_is_idempotent():
    entities = EntityDictionary(["Blade Runner", "Ridley Scott"])
    once = tokenize("Ridley Scott directed Blade Runner in 1982.", entities)
    assert tokenize(" ".join(once), entities) == once


def test_entity_dictionary_rejects_empty_name():
    with pytest.raises(ValueError):
        EntityDictionary(["ok", "  "])


def test_mark_numbers():
    assert mark_numbers(["released", "in", "1982"]) == ["released", "in", NUMBER_TOKEN]
    assert mark_numbers(["how", "many", "films"]) == [NUMBER_TOKEN, "films"]
    assert mark_numbers(["no", "digits", "here"]) == ["no", "digits", "here"]


# --- Bag of Words ---
def test_bow_counts():
    vocab = Vocabulary(["a", "b"])
    assert bow(["a", "b", "a"], vocab).entries() == [(0, 2.0), (1, 1.0)]
    assert bow([], vocab).nnz == 0


def test_bow_drops_oov_and_supports_binary_hook():
    vocab = Vocabulary(["a", "b"])
    assert bow(["a", "zzz", "a"], vocab, weighting=binary_weighting).entries() == [(0, 1.0)]


def test_bow_center_bank_offsets_ids():
    vocab = Vocabulary([f"t{i}" for i in range(10)], center_encoded=True)
    assert vocab.dim == 20
    assert bow(["t3"], vocab, Bank.VALUE_CENTER).entries() == [(13, 1.0)]


def test_bow_center_bank_requires_center_vocab():
    with pytest.raises(ValueError):
        bow(["a"], Vocabulary(["a"]), Bank.VALUE_CENTER)


def test_vocabulary_ids_do_not_depend_on_stream_order():
    a = Vocabulary.build([["x", "y"], ["z"]])
    b = Vocabulary.build([["z"], ["y", "x"]])
    assert a.id_to_token == b.id_to_token
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != a.with_center_encoding(True).fingerprint()


# --- KB Slots ---
def test_kb_slots_doubles_and_reverses(toy_triples, toy_vocab):
    slots = kb_slots(toy_triples, toy_vocab)
    assert len(slots) == 2 * len(toy_triples)
    forward, backward = slots[0], slots[1]
    assert _key_tokens(toy_vocab, forward.key) == ["blade_runner", "directed_by"]
    assert forward.value_candidates == {"ridley_scott"}
    assert _key_tokens(toy_vocab, backward.key) == ["!directed_by", "ridley_scott"]
    assert backward.value_candidates == {"blade_runner"}
    assert backward.provenance.source == "triple:0:rev"


def test_kb_slots_empty(toy_vocab):
    assert kb_slots([], toy_vocab) == []


def test_kb_slots_skips_unknown_entities(toy_vocab):
    skipped = Counter()
    slots = kb_slots([KBTriple("Unknown Film", "directed_by", "Ridley Scott")], toy_vocab, skipped)
    assert slots == []
    assert skipped["kb_unknown_entity"] == 1


def test_triple_reversed_twice_is_identity():
    triple = KBTriple("Blade Runner", "directed_by", "Ridley Scott")
    assert triple.reversed().relation == "!directed_by"
    assert triple.reversed().reversed() == triple


def test_reversed_relation_is_its_own_token():
    tokens = relation_tokens()
    assert "directed_by" in tokens and "!directed_by" in tokens
    assert len(set(tokens)) == 18


# --- Document Slots ---
def test_sentence_slots_key_equals_value():
    sentences = [["t", "is", "good"], ["e", "starred"], ["nothing", "here"]]
    vocab = _doc_vocab(sentences, ["e", "t"])
    slots = sentence_slots(Document("T", sentences), vocab)
    assert len(slots) == 3
    for slot in slots:
        assert slot.key == slot.value
    assert slots[1].value_candidates == {"e"}
    assert slots[2].value_candidates == frozenset()


def test_window_single_slot():
    sentences = [["a", "e", "b"]]
    vocab = _doc_vocab(sentences, ["e"])
    slots = window_slots(Document("T", sentences), 3, vocab)
    assert len(slots) == 1
    assert _key_tokens(vocab, slots[0].key) == ["a", "b", "e"]
    assert slots[0].value_candidates == {"e"}


def test_window_title_adds_title_slot():
    sentences = [["a", "e", "b"]]
    vocab = _doc_vocab(sentences, ["e", "t"])
    slots = window_slots(Document("T", sentences), 3, vocab, title=True)
    assert len(slots) == 2
    assert _key_tokens(vocab, slots[0].key) == sorted(["a", "e", "b", WINDOW_TOKEN])
    assert _key_tokens(vocab, slots[1].key) == sorted(["a", "e", "b", TITLE_TOKEN, "t"])
    assert slots[1].value_candidates == {"t"}


def test_window_counts_match_position_scan():
    sentence = ["w0", "e1", "w2", "e2", "w4", "w5", "e3", "w7", "e4", "w9"]
    entities = ["e1", "e2", "e3", "e4"]
    vocab = _doc_vocab([sentence], entities + ["t"])
    doc = Document("T", [sentence])
    expected = [i for i, tok in enumerate(sentence) if tok in entities]
    plain = window_slots(doc, 7, vocab)
    assert len(plain) == len(expected) == 4
    assert len(window_slots(doc, 7, vocab, title=True)) == 8
    for slot, center in zip(plain, expected):
        lo, hi = max(0, center - 3), min(len(sentence), center + 4)
        assert (slot.provenance.start, slot.provenance.end) == (lo, hi)
        assert _key_tokens(vocab, slot.key) == sorted(sentence[lo:hi])


def test_windows_stay_inside_sentences():
    sentences = [["a", "e"], ["f", "b"]]
    vocab = _doc_vocab(sentences, ["e", "f"])
    slots = window_slots(Document("T", sentences), 5, vocab)
    assert _key_tokens(vocab, slots[0].key) == ["a", "e"]
    assert _key_tokens(vocab, slots[1].key) == ["b", "f"]


def test_center_encoding_only_moves_the_center_bank():
    sentences = [["a", "e", "b", "f", "c"]]
    plain_vocab = _doc_vocab(sentences, ["e", "f"])
    center_vocab = plain_vocab.with_center_encoding(True)
    doc = Document("T", sentences)
    plain = window_slots(doc, 3, plain_vocab)
    centered = window_slots(doc, 3, center_vocab, center_encoding=True)
    D = center_vocab.base_size
    for p, c in zip(plain, centered):
        folded = sorted(itertools.chain.from_iterable(
            [int(i) % D] * int(w) for i, w in zip(c.key.indices, c.key.weights)))
        original = sorted(itertools.chain.from_iterable(
            [int(i)] * int(w) for i, w in zip(p.key.indices, p.key.weights)))
        assert folded == original
        assert np.all(c.value.indices >= D)


def test_window_rejects_even_size():
    sentences = [["a", "e"]]
    vocab = _doc_vocab(sentences, ["e"])
    with pytest.raises(ValueError):
        window_slots(Document("T", sentences), 4, vocab)


def test_window_sentence_slots_share_sentence_value():
    sentences = [["e", "met", "f"], ["nothing"]]
    vocab = _doc_vocab(sentences, ["e", "f"])
    slots = window_sentence_slots(Document("T", sentences), 3, vocab)
    assert len(slots) == 2
    assert slots[0].value == slots[1].value == bow(sentences[0], vocab, Bank.KEY)
    assert slots[0].value_candidates == {"t#0"}


def test_document_rejects_empty_sentence():
    with pytest.raises(ValueError):
        Document("T", [["a"], []])
