# -*- coding: utf-8 -*-
"""
Dictionaries, tokenization and memory-slot construction.

Turns questions, KB triples and documents into bag-of-words SparseVecs and
MemorySlot (key, value) pairs under every supported representation:
KB triple, sentence level, window level, window + center encoding,
window + title, and window key / sentence value.
"""

import enum
import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from numerics import SparseVec

logger = logging.getLogger(__name__)

# --- Reserved Tokens ---
WINDOW_TOKEN = "_window_"
TITLE_TOKEN = "_title_"
NUMBER_TOKEN = "_number_"
MATCH_TOKEN = "_match_"
RESERVED_TOKENS = (WINDOW_TOKEN, TITLE_TOKEN, NUMBER_TOKEN, MATCH_TOKEN)

KB_RELATIONS = (
    "directed_by", "written_by", "starred_actors", "release_year", "in_language",
    "has_genre", "has_tags", "has_imdb_rating", "has_imdb_votes",
)
REVERSE_PREFIX = "!"

_WORD_PATTERN = re.compile(r"[a-z0-9_]+")
_NUMBER_PATTERN = re.compile(r"^[0-9]+(?:[.,][0-9]+)*$")


class Bank(enum.Enum):
    """Which copy of the dictionary a bag-of-words lands in."""
    QUESTION = "question"
    KEY = "key"
    VALUE_CENTER = "value-center"


# --- Tokenization ---
def split_words(text: str) -> List[str]:
    """Lowercased word pieces with punctuation stripped (apostrophes vanish, 'who's' -> 'whos')."""
    return _WORD_PATTERN.findall(text.lower().replace("'", "").replace("’", ""))


def entity_token(name: str) -> str:
    """Single dictionary token for an entity name, e.g. 'Blade Runner' -> 'blade_runner'."""
    words = split_words(name)
    if not words:
        raise ValueError(f"Entity name '{name}' has no word characters.")
    return "_".join(words)


def relation_tokens() -> List[str]:
    """Every relation token, forward and reversed ('!directed_by' is its own entry)."""
    return list(KB_RELATIONS) + [REVERSE_PREFIX + r for r in KB_RELATIONS]


class EntityDictionary:
    """
    Multi-word entity phrases with a longest-match lookup table keyed by first word.
    """

    def __init__(self, names: Iterable[str]):
        self.names: FrozenSet[str] = frozenset(n for n in names)
        if any(not n.strip() for n in self.names):
            raise ValueError("EntityDictionary cannot hold an empty entity name.")
        self._phrase_to_token: Dict[Tuple[str, ...], str] = {}
        self._by_first: Dict[str, List[Tuple[str, ...]]] = {}
        for name in self.names:
            phrase = tuple(split_words(name))
            if not phrase:
                raise ValueError(f"Entity name '{name}' has no word characters.")
            self._phrase_to_token[phrase] = "_".join(phrase)
            self._by_first.setdefault(phrase[0], []).append(phrase)
        for phrases in self._by_first.values():
            phrases.sort(key=len, reverse=True)

    @property
    def tokens(self) -> FrozenSet[str]:
        return frozenset(self._phrase_to_token.values())

    def __len__(self) -> int:
        return len(self.names)

    def longest_match(self, words: Sequence[str], start: int) -> Optional[Tuple[int, str]]:
        """Returns (phrase length, entity token) of the longest entity starting at `start`."""
        for phrase in self._by_first.get(words[start], ()):
            if tuple(words[start:start + len(phrase)]) == phrase:
                return len(phrase), self._phrase_to_token[phrase]
        return None


def tokenize(text: str, entities: Optional[EntityDictionary] = None) -> List[str]:
    """
    Lowercases, strips punctuation, and collapses entity phrases into single
    entity tokens (greedy longest match, left to right).
    """
    words = split_words(text)
    if not entities or not words:
        return words
    tokens: List[str] = []
    i = 0
    while i < len(words):
        match = entities.longest_match(words, i)
        if match:
            length, token = match
            tokens.append(token)
            i += length
        else:
            tokens.append(words[i])
            i += 1
    return tokens


def mark_numbers(tokens: Sequence[str]) -> List[str]:
    """Replaces numbers and the bigram 'how many' with the `_number_` feature."""
    marked: List[str] = []
    i = 0
    while i < len(tokens):
        if tokens[i] == "how" and i + 1 < len(tokens) and tokens[i + 1] == "many":
            marked.append(NUMBER_TOKEN)
            i += 2
            continue
        marked.append(NUMBER_TOKEN if _NUMBER_PATTERN.match(tokens[i]) else tokens[i])
        i += 1
    return marked


# --- Vocabulary ---
class Vocabulary:
    """
    Bijective token <-> id map over [0, D) plus corpus frequency counts.

    With center encoding the effective dim is 2D and id + D addresses the
    second ("center/value") copy of a token.
    """

    def __init__(self, tokens: Sequence[str], counts: Optional[Counter] = None,
                 entities: Iterable[str] = (), center_encoded: bool = False):
        if len(set(tokens)) != len(tokens):
            raise ValueError("Vocabulary tokens must be unique.")
        self.id_to_token: List[str] = list(tokens)
        self.token_to_id: Dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        self.counts: Counter = Counter(counts or {})
        self.entities: FrozenSet[str] = frozenset(entities)
        self.center_encoded = center_encoded

    @classmethod
    def build(cls, token_streams: Iterable[Iterable[str]], entities: Iterable[str] = (),
              extra_tokens: Iterable[str] = (), center_encoded: bool = False) -> "Vocabulary":
        """
        Single pass over the token streams. Reserved tokens come first, then
        every other token in sorted order so ids do not depend on stream order.
        """
        counts: Counter = Counter()
        for stream in token_streams:
            counts.update(stream)
        entity_set = frozenset(entities)
        others = (set(counts) | entity_set | set(extra_tokens)) - set(RESERVED_TOKENS)
        tokens = list(RESERVED_TOKENS) + sorted(others)
        logger.info(f"Built vocabulary: {len(tokens)} tokens ({len(entity_set)} entities), "
                    f"center_encoded={center_encoded}")
        return cls(tokens, counts, entity_set, center_encoded)

    @property
    def base_size(self) -> int:
        return len(self.id_to_token)

    @property
    def dim(self) -> int:
        return 2 * self.base_size if self.center_encoded else self.base_size

    def __len__(self) -> int:
        return self.base_size

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id(self, token: str) -> Optional[int]:
        return self.token_to_id.get(token)

    def token(self, idx: int) -> str:
        """Token for an id in either bank; second-bank tokens are shown with a '^' prefix."""
        base = idx % self.base_size
        prefix = "^" if idx >= self.base_size else ""
        return prefix + self.id_to_token[base]

    def with_center_encoding(self, center_encoded: bool) -> "Vocabulary":
        return Vocabulary(self.id_to_token, self.counts, self.entities, center_encoded)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(("center" if self.center_encoded else "plain").encode("utf-8"))
        for token in self.id_to_token:
            digest.update(b"\x00" + token.encode("utf-8"))
        return digest.hexdigest()[:16]


# --- Bag of Words ---
WeightingHook = Callable[[int, float], float]


def binary_weighting(token_id: int, count: float) -> float:
    """Presence instead of counts."""
    return 1.0


def bow(tokens: Sequence[str], vocab: Vocabulary, bank: Bank = Bank.QUESTION,
        weighting: Optional[WeightingHook] = None) -> SparseVec:
    """
    Bag-of-words over `vocab` with raw counts (or a weighting hook).

    Out-of-vocabulary tokens are dropped. The value-center bank shifts ids into
    the second dictionary copy and is only valid for center-encoded vocabularies.

    Raises:
        ValueError: bank=VALUE_CENTER on a vocabulary without center encoding.
    """
    if bank is Bank.VALUE_CENTER and not vocab.center_encoded:
        raise ValueError("The value-center bank requires a center-encoded vocabulary.")
    offset = vocab.base_size if bank is Bank.VALUE_CENTER else 0
    counts: Dict[int, float] = {}
    dropped = 0
    for token in tokens:
        idx = vocab.id(token)
        if idx is None:
            dropped += 1
            continue
        counts[idx + offset] = counts.get(idx + offset, 0.0) + 1.0
    if dropped:
        logger.debug(f"bow dropped {dropped} out-of-vocabulary tokens")
    if weighting is not None:
        counts = {i: weighting(i, c) for i, c in counts.items()}
    return SparseVec.from_counts(counts, vocab.dim)


# --- Knowledge and Slot Types ---
@dataclass(frozen=True)
class KBTriple:
    """'subject relation object'; reversed relations carry a '!' prefix."""
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        if not self.subject.strip() or not self.object.strip():
            raise ValueError(f"KBTriple subject/object must be nonempty: {self}")
        if self.relation.lstrip(REVERSE_PREFIX) not in KB_RELATIONS:
            raise ValueError(f"Unknown relation '{self.relation}'.")

    @property
    def is_reversed(self) -> bool:
        return self.relation.startswith(REVERSE_PREFIX)

    def reversed(self) -> "KBTriple":
        relation = self.relation[1:] if self.is_reversed else REVERSE_PREFIX + self.relation
        return KBTriple(self.object, relation, self.subject)


@dataclass
class Document:
    """Title plus tokenized sentences; `text` keeps the surface strings when known."""
    title: str
    sentences: List[List[str]]
    text: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("Document title must be nonempty.")
        for i, sentence in enumerate(self.sentences):
            if not sentence:
                raise ValueError(f"Document '{self.title}' has an empty sentence at position {i}.")

    @classmethod
    def from_text(cls, title: str, sentences: Sequence[str], entities: EntityDictionary) -> "Document":
        return cls(title, [tokenize(s, entities) for s in sentences], list(sentences))


@dataclass(frozen=True)
class Provenance:
    source: str
    sentence: int = -1
    start: int = 0
    end: int = 0


@dataclass(frozen=True)
class MemorySlot:
    key: SparseVec
    value: SparseVec
    value_candidates: FrozenSet[str]
    provenance: Provenance


def sentence_id(doc: Document, index: int) -> str:
    return f"{entity_token(doc.title)}#{index}"


def triple_source(index: int, reversed_: bool = False) -> str:
    return f"triple:{index}:rev" if reversed_ else f"triple:{index}"


# --- Slot Builders ---
def kb_slots(triples: Sequence[KBTriple], vocab: Vocabulary,
             skipped: Optional[Counter] = None) -> List[MemorySlot]:
    """
    Two slots per triple: (subject + relation -> object) and the reversed
    (object + !relation -> subject). Triples with an entity or relation
    missing from the vocabulary are skipped and counted.
    """
    slots: List[MemorySlot] = []
    n_skipped = 0
    for i, triple in enumerate(triples):
        subject, obj = entity_token(triple.subject), entity_token(triple.object)
        reverse = triple.reversed()
        needed = (subject, obj, triple.relation, reverse.relation)
        if any(t not in vocab for t in needed):
            n_skipped += 1
            continue
        for relation, head, tail, rev in ((triple.relation, subject, obj, False),
                                          (reverse.relation, obj, subject, True)):
            slots.append(MemorySlot(
                key=bow([head, relation], vocab, Bank.KEY),
                value=bow([tail], vocab, Bank.KEY),
                value_candidates=frozenset([tail]),
                provenance=Provenance(triple_source(i, rev)),
            ))
    if n_skipped:
        logger.warning(f"kb_slots skipped {n_skipped} triples with unknown entities or relations")
        if skipped is not None:
            skipped["kb_unknown_entity"] += n_skipped
    return slots


def sentence_slots(doc: Document, vocab: Vocabulary) -> List[MemorySlot]:
    """One slot per sentence; key and value are the same bag of words."""
    slots: List[MemorySlot] = []
    source = entity_token(doc.title)
    for s_idx, tokens in enumerate(doc.sentences):
        vec = bow(tokens, vocab, Bank.KEY)
        if vec.nnz == 0:
            logger.warning(f"Sentence {s_idx} of '{doc.title}' is entirely out of vocabulary; no slot emitted")
            continue
        slots.append(MemorySlot(
            key=vec,
            value=vec,
            value_candidates=frozenset(t for t in tokens if t in vocab.entities),
            provenance=Provenance(source, s_idx, 0, len(tokens)),
        ))
    return slots


def _check_window(W: int):
    if W < 1 or W % 2 == 0:
        raise ValueError(f"Window size must be odd and >= 1, got {W}.")


def _window_counts(tokens: Sequence[str], center: int, W: int, vocab: Vocabulary,
                   center_encoding: bool) -> Tuple[Dict[int, float], int, int]:
    """Key counts of the window around `center`, truncated at the sentence edges."""
    half = W // 2
    lo, hi = max(0, center - half), min(len(tokens), center + half + 1)
    counts: Dict[int, float] = {}
    for pos in range(lo, hi):
        idx = vocab.id(tokens[pos])
        if idx is None:
            continue
        if pos == center and center_encoding:
            idx += vocab.base_size
        counts[idx] = counts.get(idx, 0.0) + 1.0
    return counts, lo, hi


def window_slots(doc: Document, W: int, vocab: Vocabulary, center_encoding: bool = False,
                 title: bool = False) -> List[MemorySlot]:
    """
    Entity-centered windows of W tokens within each sentence.

    Key = window bag of words (center token in the second bank under center
    encoding), value = the center entity. With `title`, each window also yields
    a (window + _title_ + title -> title) slot and plain keys get `_window_`.

    Raises:
        ValueError: W even or < 1, or center encoding on a plain vocabulary.
    """
    _check_window(W)
    if center_encoding and not vocab.center_encoded:
        raise ValueError("Center encoding requires a center-encoded vocabulary.")
    value_bank = Bank.VALUE_CENTER if center_encoding else Bank.KEY
    title_tok = entity_token(doc.title)
    title_id = vocab.id(title_tok)
    if title and title_id is None:
        raise ValueError(f"Document title token '{title_tok}' is not in the vocabulary.")
    window_id, title_marker_id = vocab.id(WINDOW_TOKEN), vocab.id(TITLE_TOKEN)

    slots: List[MemorySlot] = []
    for s_idx, tokens in enumerate(doc.sentences):
        for center, token in enumerate(tokens):
            if token not in vocab.entities or token not in vocab:
                continue
            counts, lo, hi = _window_counts(tokens, center, W, vocab, center_encoding)
            provenance = Provenance(title_tok, s_idx, lo, hi)
            plain = dict(counts)
            if title:
                plain[window_id] = plain.get(window_id, 0.0) + 1.0
            slots.append(MemorySlot(
                key=SparseVec.from_counts(plain, vocab.dim),
                value=bow([token], vocab, value_bank),
                value_candidates=frozenset([token]),
                provenance=provenance,
            ))
            if title:
                titled = dict(counts)
                titled[title_marker_id] = titled.get(title_marker_id, 0.0) + 1.0
                titled[title_id] = titled.get(title_id, 0.0) + 1.0
                slots.append(MemorySlot(
                    key=SparseVec.from_counts(titled, vocab.dim),
                    value=bow([title_tok], vocab, value_bank),
                    value_candidates=frozenset([title_tok]),
                    provenance=provenance,
                ))
    return slots


def window_sentence_slots(doc: Document, W: int, vocab: Vocabulary) -> List[MemorySlot]:
    """Entity-centered window keys whose value is the whole containing sentence."""
    _check_window(W)
    slots: List[MemorySlot] = []
    title_tok = entity_token(doc.title)
    for s_idx, tokens in enumerate(doc.sentences):
        sentence_vec = bow(tokens, vocab, Bank.KEY)
        sid = sentence_id(doc, s_idx)
        for center, token in enumerate(tokens):
            if token not in vocab.entities or token not in vocab:
                continue
            counts, lo, hi = _window_counts(tokens, center, W, vocab, False)
            slots.append(MemorySlot(
                key=SparseVec.from_counts(counts, vocab.dim),
                value=sentence_vec,
                value_candidates=frozenset([sid]),
                provenance=Provenance(title_tok, s_idx, lo, hi),
            ))
    return slots


def exact_match_features(question_tokens: Sequence[str], sentence_tokens: Sequence[str],
                         vocab: Vocabulary) -> SparseVec:
    """`_match_` weighted by the number of distinct words shared by question and sentence."""
    shared = set(question_tokens) & set(sentence_tokens)
    if not shared:
        return SparseVec.empty(vocab.dim)
    return SparseVec.from_counts({vocab.id(MATCH_TOKEN): float(len(shared))}, vocab.dim)
