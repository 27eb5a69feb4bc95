# -*- coding: utf-8 -*-
"""
Memory slot storage and key hashing.

The MemoryStore holds every MemorySlot of a knowledge source and an inverted
index from (base) token id to the slots whose KEY contains that token. Tokens
appearing in F or more slot keys are treated as stop words and get no postings.
Hashing a question returns the slots sharing at least one indexed word with it,
capped at n_max, with a fallback so the model always has something to address.
"""

import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np

from featurize import MemorySlot, Vocabulary

logger = logging.getLogger(__name__)

DEFAULT_MAX_SLOTS = 1000


def key_token_ids(slot: MemorySlot, vocab: Vocabulary) -> np.ndarray:
    """Distinct base-dictionary ids of a slot key (center-bank ids fold onto their word)."""
    return np.unique(slot.key.indices % vocab.base_size)


class MemoryStore:
    """
    All memory slots plus the stop-word-filtered inverted index over their keys.
    """

    def __init__(self, slots: Sequence[MemorySlot], vocab: Vocabulary, threshold: float,
                 max_slots: int, inverted_index: Dict[int, np.ndarray],
                 full_index: Dict[int, np.ndarray]):
        self.slots: List[MemorySlot] = list(slots)
        self.vocab = vocab
        self.threshold = threshold
        self.max_slots = max_slots
        self.inverted_index = inverted_index
        self.full_index = full_index

    def __len__(self) -> int:
        return len(self.slots)

    def key_frequency(self, token_id: int) -> int:
        postings = self.full_index.get(token_id)
        return 0 if postings is None else int(postings.size)

    def slots_by_source(self) -> Dict[str, List[int]]:
        """Provenance source id -> slot ids (e.g. 'triple:12:rev' -> [25])."""
        mapping: Dict[str, List[int]] = defaultdict(list)
        for slot_id, slot in enumerate(self.slots):
            mapping[slot.provenance.source].append(slot_id)
        return dict(mapping)

    # --- Hashing ---
    def hash_ids(self, question_ids: Iterable[int]) -> List[int]:
        """Hashes a question given its dictionary ids (see hash_query)."""
        # center-bank ids fold onto their base word
        q_tokens = sorted(set(int(i) % self.vocab.base_size for i in question_ids))
        selected = self._rank_union([self.inverted_index[t] for t in q_tokens if t in self.inverted_index])
        if selected:
            return selected
        # no indexed word matched: overlap on every key word
        selected = self._rank_union([self.full_index[t] for t in q_tokens if t in self.full_index])
        if selected:
            logger.debug(f"Hash fallback: no sub-threshold word shared; {len(selected)} slots by raw overlap")
            return selected
        logger.debug("Hash fallback: question shares no key word; using the first slots")
        return list(range(min(self.max_slots, len(self.slots))))

    def _rank_union(self, postings: List[np.ndarray]) -> List[int]:
        if not postings:
            return []
        # overlap = number of question words the slot key shares
        slot_ids, overlap = np.unique(np.concatenate(postings), return_counts=True)
        if slot_ids.size > self.max_slots:
            # Most shared question words first, then lower slot id.
            order = np.lexsort((slot_ids, -overlap))[:self.max_slots]
            slot_ids = np.sort(slot_ids[order])
        return [int(s) for s in slot_ids]

    # --- Serialization ---
    def index_arrays(self) -> Dict[str, np.ndarray]:
        tokens = np.array(sorted(self.inverted_index), dtype=np.int64)
        lengths = [self.inverted_index[int(t)].size for t in tokens]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        postings = (np.concatenate([self.inverted_index[int(t)] for t in tokens]).astype(np.int64)
                    if tokens.size else np.zeros(0, dtype=np.int64))
        return {"index_tokens": tokens, "index_offsets": offsets, "index_postings": postings}

    @classmethod
    def from_index_arrays(cls, slots: Sequence[MemorySlot], vocab: Vocabulary, threshold: float,
                          max_slots: int, arrays: Mapping[str, np.ndarray]) -> "MemoryStore":
        """
        Restores a serialized inverted index over `slots`; the unfiltered index is rebuilt.

        Raises:
            ValueError: If a postings entry does not reference a valid slot.
        """
        tokens, offsets, postings = arrays["index_tokens"], arrays["index_offsets"], arrays["index_postings"]
        if postings.size and (postings.min() < 0 or postings.max() >= len(slots)):
            raise ValueError("Serialized index references slots outside the memory.")
        index = {int(t): postings[offsets[k]:offsets[k + 1]].copy() for k, t in enumerate(tokens)}
        # the unfiltered index backs the fallback
        return cls(slots, vocab, threshold, max_slots, index, _full_index(slots, vocab))


def _full_index(slots: Sequence[MemorySlot], vocab: Vocabulary) -> Dict[int, np.ndarray]:
    postings: Dict[int, List[int]] = defaultdict(list)
    for slot_id, slot in enumerate(slots):
        for token_id in key_token_ids(slot, vocab):
            postings[int(token_id)].append(slot_id)
    return {t: np.array(ids, dtype=np.int64) for t, ids in postings.items()}


def build_index(slots: Sequence[MemorySlot], vocab: Vocabulary, threshold: float = 1000,
                max_slots: int = DEFAULT_MAX_SLOTS) -> MemoryStore:
    """
    Builds the inverted index over slot keys.

    A token is indexed iff the number of slot keys containing it is below
    `threshold` (F). Pass math.inf to disable stop-word filtering.

    Raises:
        ValueError: If threshold < 1 or max_slots < 1.
    """
    if threshold < 1:
        raise ValueError(f"Hash threshold F must be >= 1, got {threshold}.")
    if max_slots < 1:
        raise ValueError(f"max_slots must be >= 1, got {max_slots}.")
    full = _full_index(slots, vocab)
    # F or more holders makes a stop word
    index = {t: ids for t, ids in full.items() if ids.size < threshold}
    logger.info(f"Built memory index: {len(slots)} slots, {len(index)}/{len(full)} key tokens below F={threshold}")
    return MemoryStore(slots, vocab, threshold, max_slots, index, full)


def hash_query(store: MemoryStore, question_tokens: Sequence[str]) -> List[int]:
    """
    Slot ids sharing at least one sub-threshold word with the question.

    Sorted ascending; capped at store.max_slots keeping the slots that share
    the most question words (ties by lower id). If nothing matches, falls back
    to raw (unfiltered) overlap, then to the first max_slots slots.
    """
    ids = [i for i in (store.vocab.id(t) for t in question_tokens) if i is not None]
    return store.hash_ids(ids)


def hash_recall(store: MemoryStore, examples: Sequence[Sequence[str]],
                gold_slot_map: Mapping[int, Iterable[int]]) -> float:
    """
    Fraction of annotated examples whose gold supporting slot survives hashing.

    Args:
        store: Hashed memory.
        examples: Question token lists.
        gold_slot_map: Example index -> gold slot ids; examples without an entry are ignored.

    Returns:
        Recall in [0, 1] (0.0 when nothing is annotated).
    """
    hits, total = 0, 0
    for i, tokens in enumerate(examples):
        gold = set(gold_slot_map.get(i, ()))
        if not gold:
            continue
        total += 1
        if gold & set(hash_query(store, tokens)):
            hits += 1
    if total == 0:
        logger.warning("hash_recall called without gold slot annotations")
        return 0.0
    return hits / total


def parse_threshold(value: str) -> float:
    """'inf' / 'none' / '0' disable the stop-word filter; otherwise a positive integer."""
    text = str(value).strip().lower()
    if text in ("inf", "infinity", "none", "0", ""):
        return math.inf
    threshold = int(text)
    if threshold < 1:
        raise ValueError(f"Hash threshold must be >= 1 or 'inf', got {value}.")
    return threshold
