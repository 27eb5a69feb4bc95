# -*- coding: utf-8 -*-
"""
Synthetic movie-domain benchmark generation.

Builds a nine-relation movie KB, question/answer pairs by substituting
entities into a shipped pattern bank (13 question classes plus an optional
two-hop family), and one synthetic document per movie realized from a
template bank with controllable template count, conjunction rate and
coreference rate. Corpora are written to / read from a directory of
kb.tsv, docs.jsonl, qa_{train,dev,test}.tsv and manifest.json.
"""

import dataclasses
import logging
import math
import os
import random
import re
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from featurize import (KB_RELATIONS, REVERSE_PREFIX, Document, EntityDictionary, KBTriple,
                       entity_token, split_words, tokenize, triple_source)
from utils import (CorpusFormatError, ensure_dir, read_json, read_jsonl, read_tsv,
                   stable_unit_hash, write_json, write_jsonl, write_tsv)

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "corpus_templates")
QUESTION_PATTERNS_FILE = os.path.join(TEMPLATE_DIR, "question_patterns.json")
DOCUMENT_TEMPLATES_FILE = os.path.join(TEMPLATE_DIR, "document_templates.json")

SPLITS = ("train", "dev", "test")
KB_FILE = "kb.tsv"
DOCS_FILE = "docs.jsonl"
MANIFEST_FILE = "manifest.json"
QA_FILES = {split: f"qa_{split}.tsv" for split in SPLITS}

# Display order of the per-type report rows.
QUESTION_TYPES = (
    "Writer to Movie", "Tag to Movie", "Director to Movie", "Actor to Movie",
    "Movie to Year", "Movie to Writer", "Movie to Tags", "Movie to Language",
    "Movie to IMDb Votes", "Movie to IMDb Rating", "Movie to Genre",
    "Movie to Director", "Movie to Actors",
)
TWO_HOP_TYPE = "Director to Year"
ALL_QUESTION_TYPES = QUESTION_TYPES + (TWO_HOP_TYPE,)

POPULARITY_BINS = ("unheard of", "unknown", "well known", "highly watched", "famous")
YEARS = tuple(str(y) for y in range(1950, 2020))
GENRES = ("Drama", "Comedy", "Thriller", "Horror", "Romance", "Western", "Documentary",
          "Animation", "Musical", "Mystery", "Adventure", "Fantasy", "Crime", "War")
LANGUAGES = ("English", "French", "German", "Spanish", "Italian", "Japanese", "Hindi",
             "Korean", "Russian", "Swedish", "Mandarin", "Portuguese")

# Relation -> role of its object; movies are always the subject.
OBJECT_ROLES = OrderedDict([
    ("directed_by", "director"), ("written_by", "writer"), ("starred_actors", "actor"),
    ("release_year", "year"), ("in_language", "language"), ("has_genre", "genre"),
    ("has_tags", "tag"), ("has_imdb_rating", "rating"), ("has_imdb_votes", "votes"),
])

# Per-movie object count ranges (inclusive).
CARDINALITY = {
    "directed_by": (1, 1), "written_by": (1, 3), "starred_actors": (2, 5),
    "release_year": (1, 1), "in_language": (1, 1), "has_genre": (1, 2),
    "has_tags": (2, 6), "has_imdb_rating": (1, 1), "has_imdb_votes": (1, 1),
}

# Name, GenConfig overrides, knowledge source. Rows of the synthetic-document ablation.
LADDER_PRESETS = OrderedDict([
    ("kb", ("KB", {}, "kb")),
    ("one_template", ("One Template Sentence",
                      {"templates_per_relation": 1, "conjunction_rate": 0.0, "coreference_rate": 0.0}, "doc")),
    ("all_templates", ("All Templates Sentences",
                       {"templates_per_relation": 100, "conjunction_rate": 0.0, "coreference_rate": 0.0}, "doc")),
    ("one_template_coref", ("One Template + Coreference",
                            {"templates_per_relation": 1, "conjunction_rate": 0.0, "coreference_rate": 0.8}, "doc")),
    ("one_template_conj", ("One Template + Conjunction",
                           {"templates_per_relation": 1, "conjunction_rate": 0.5, "coreference_rate": 0.0}, "doc")),
    ("all_templates_conj_coref", ("All Templates + Conj. + Coref.",
                                  {"templates_per_relation": 100, "conjunction_rate": 0.5,
                                   "coreference_rate": 0.8}, "doc")),
])


# --- Configuration ---
@dataclass(frozen=True)
class GenConfig:
    n_movies: int = 500
    n_actors: int = 600
    n_directors: int = 150
    n_writers: int = 250
    n_tags: int = 120
    n_genres: int = 12
    n_languages: int = 10
    templates_per_relation: int = 100
    conjunction_rate: float = 0.5
    coreference_rate: float = 0.8
    seed: int = 1
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    patterns_per_question: int = 0   # 0 = every pattern
    two_hop_questions: bool = False

    def validate(self) -> "GenConfig":
        """
        Raises:
            ValueError: Listing every invalid field.
        """
        problems = []
        minimum = {"n_movies": 1, "n_directors": 1, "n_writers": 1, "n_actors": 2,
                   "n_tags": 2, "n_genres": 1, "n_languages": 1}
        for name, low in minimum.items():
            value = getattr(self, name)
            if value < low:
                problems.append(f"{name}={value} (need >= {low} so every movie can be populated)")
        if not 1 <= self.templates_per_relation <= 100:
            problems.append(f"templates_per_relation={self.templates_per_relation} (need 1..100)")
        for name in ("conjunction_rate", "coreference_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name}={value} (need 0..1)")
        fractions = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
            problems.append(f"split fractions {fractions} (need nonnegative, summing to 1)")
        if self.patterns_per_question < 0:
            problems.append(f"patterns_per_question={self.patterns_per_question} (need >= 0)")
        if problems:
            raise ValueError("Invalid generation config: " + "; ".join(problems))
        return self

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GenConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown generation config fields: {sorted(unknown)}")
        return cls(**data)


# --- Data Types ---
@dataclass
class SynthKB:
    triples: List[KBTriple]

    @property
    def movies(self) -> List[str]:
        return list(OrderedDict.fromkeys(t.subject for t in self.triples))

    @property
    def pools(self) -> "OrderedDict[str, List[str]]":
        """Role -> entity names in first-appearance order ('movie', 'director', ...)."""
        pools: "OrderedDict[str, OrderedDict]" = OrderedDict((role, OrderedDict()) for role in
                                                             ["movie"] + list(OBJECT_ROLES.values()))
        for triple in self.triples:
            pools["movie"][triple.subject] = None
            pools[OBJECT_ROLES[triple.relation]][triple.object] = None
        return OrderedDict((role, list(names)) for role, names in pools.items())

    def entity_names(self) -> List[str]:
        return list(OrderedDict.fromkeys(n for t in self.triples for n in (t.subject, t.object)))

    def entity_dictionary(self) -> EntityDictionary:
        return EntityDictionary(self.entity_names())


@dataclass(frozen=True)
class QAExample:
    question: Tuple[str, ...]
    text: str
    answers: Tuple[str, ...]
    qtype: str
    subject: str
    gold_slot: FrozenSet[str]
    split: str = "train"

    def __post_init__(self):
        if not self.answers:
            raise ValueError(f"Question '{self.text}' has no answers.")
        if self.qtype not in ALL_QUESTION_TYPES:
            raise ValueError(f"Unknown question type '{self.qtype}'.")
        if not self.question:
            raise ValueError("Question has no tokens.")
        if self.split not in SPLITS:
            raise ValueError(f"Unknown split '{self.split}'.")

    @property
    def answer_tokens(self) -> FrozenSet[str]:
        return frozenset(entity_token(a) for a in self.answers)


@dataclass
class SynthCorpus:
    kb: SynthKB
    docs: List[Document]
    train: List[QAExample]
    dev: List[QAExample]
    test: List[QAExample]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def split(self, name: str) -> List[QAExample]:
        if name not in SPLITS:
            raise ValueError(f"Unknown split '{name}'; expected one of {SPLITS}.")
        return getattr(self, name)


@dataclass(frozen=True)
class QuestionClass:
    qtype: str
    slot: str
    relations: Tuple[str, ...]
    patterns: Tuple[str, ...]
    two_hop: bool = False

    @property
    def placeholder(self) -> str:
        return f"[@{self.slot}]"


# --- Template Banks ---
def load_question_bank(path: str = QUESTION_PATTERNS_FILE) -> "OrderedDict[str, QuestionClass]":
    """
    Reads the question pattern bank.

    Raises:
        CorpusFormatError: Unknown qtype, fewer than 3 patterns, missing placeholder.
    """
    data = read_json(path)
    bank: "OrderedDict[str, QuestionClass]" = OrderedDict()
    for qtype in ALL_QUESTION_TYPES:
        if qtype not in data:
            raise CorpusFormatError(path, f"missing question class '{qtype}'")
    for qtype, entry in data.items():
        if qtype not in ALL_QUESTION_TYPES:
            raise CorpusFormatError(path, f"unknown question class '{qtype}'")
        qclass = QuestionClass(qtype, entry["slot"], tuple(entry["relations"]),
                               tuple(entry["patterns"]), bool(entry.get("two_hop", False)))
        if len(qclass.patterns) < 3:
            raise CorpusFormatError(path, f"'{qtype}' needs at least 3 patterns")
        for pattern in qclass.patterns:
            if pattern.count(qclass.placeholder) != 1:
                raise CorpusFormatError(path, f"pattern '{pattern}' must contain {qclass.placeholder} once")
        for relation in qclass.relations:
            if relation.lstrip(REVERSE_PREFIX) not in KB_RELATIONS:
                raise CorpusFormatError(path, f"'{qtype}' uses unknown relation '{relation}'")
        bank[qtype] = qclass
    return bank


def load_document_templates(path: str = DOCUMENT_TEMPLATES_FILE) -> Dict[str, List[str]]:
    """
    Reads the document template bank (relation -> templates with {movie} and {object}).

    Raises:
        CorpusFormatError: Missing relation, or a template that is not exactly
            one {movie} and one {object}, starts with {object}, or uses 'and'/'it'.
    """
    data = read_json(path)
    for relation in KB_RELATIONS:
        if not data.get(relation):
            raise CorpusFormatError(path, f"no templates for relation '{relation}'")
    for relation, templates in data.items():
        for template in templates:
            if template.count("{movie}") != 1 or template.count("{object}") != 1:
                raise CorpusFormatError(path, f"template '{template}' needs one {{movie}} and one {{object}}")
            if template.startswith("{object}"):
                raise CorpusFormatError(path, f"template '{template}' may not start with {{object}}")
            if {"and", "it"} & set(split_words(template.replace("{movie}", " ").replace("{object}", " "))):
                raise CorpusFormatError(path, f"template '{template}' may not use 'and' or 'it'")
    return {relation: list(data[relation]) for relation in KB_RELATIONS}


def template_words(question_bank: Dict[str, QuestionClass], doc_templates: Dict[str, List[str]]) -> Set[str]:
    """Every word the banks can emit; generated names must avoid them."""
    words: Set[str] = {"and", "it", "a", "an", "the"}
    for qclass in question_bank.values():
        for pattern in qclass.patterns:
            words.update(split_words(pattern.replace(qclass.placeholder, " ")))
    for templates in doc_templates.values():
        for template in templates:
            words.update(split_words(template.replace("{movie}", " ").replace("{object}", " ")))
    return words


# --- Entity Names ---
_ONSETS = ("b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gr", "kl", "pr", "st", "tr", "sh", "ch")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ea", "ou", "io")
_CODAS = ("", "", "n", "r", "l", "s", "m", "th", "nd", "x", "k")


class NameFactory:
    """
    Pronounceable names from onset-vowel-coda syllables. Every word is used by
    at most one entity, so no entity phrase can overlap another.
    """

    MAX_ATTEMPTS = 10000

    def __init__(self, rng: random.Random, forbidden: Iterable[str]):
        self.rng = rng
        self.used: Set[str] = set(forbidden)

    def _syllable(self) -> str:
        return self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) + self.rng.choice(_CODAS)

    def word(self, syllables: Tuple[int, int] = (1, 2)) -> str:
        """
        Raises:
            ValueError: If no unused word is found (name space exhausted).
        """
        for _ in range(self.MAX_ATTEMPTS):
            candidate = "".join(self._syllable() for _ in range(self.rng.randint(*syllables)))
            if len(candidate) >= 3 and candidate not in self.used:
                self.used.add(candidate)
                return candidate
        raise ValueError("Entity name space exhausted; reduce the entity pool sizes.")

    def reserve(self, name: str) -> bool:
        """Claims the words of a fixed name; False if any word is already taken."""
        words = split_words(name)
        if any(w in self.used for w in words):
            return False
        self.used.update(words)
        return True

    def title(self) -> str:
        return " ".join(self.word().capitalize() for _ in range(self.rng.randint(1, 3)))

    def person(self) -> str:
        return f"{self.word().capitalize()} {self.word((2, 2)).capitalize()}"

    def tag(self) -> str:
        return self.word((2, 3))


def _fixed_then_generated(factory: NameFactory, fixed: Sequence[str], count: int) -> List[str]:
    names = [n for n in fixed if factory.reserve(n)][:count]
    while len(names) < count:
        names.append(factory.word((2, 2)).capitalize())
    return names


# --- Knowledge Base ---
def generate_kb(config: GenConfig, forbidden_words: Optional[Iterable[str]] = None) -> SynthKB:
    """
    Samples the movie KB.

    Each movie gets 1 director, 1-3 writers, 2-5 actors, 1 year, 1 language,
    1-2 genres, 2-6 tags, 1 rating bin and 1 vote bin. Triples are emitted
    movie by movie in relation order. Deterministic under config.seed.

    Raises:
        ValueError: Invalid config or pools too small to populate a movie.
    """
    config.validate()
    if forbidden_words is None:
        forbidden_words = template_words(load_question_bank(), load_document_templates())
    rng = random.Random(f"{config.seed}:kb")
    factory = NameFactory(rng, forbidden_words)
    for fixed in POPULARITY_BINS:
        factory.reserve(fixed)

    # Fixed names claim their words before any name is generated.
    pools = {
        "genre": _fixed_then_generated(factory, GENRES, config.n_genres),
        "language": _fixed_then_generated(factory, LANGUAGES, config.n_languages),
        "year": list(YEARS),
        "rating": list(POPULARITY_BINS),
        "votes": list(POPULARITY_BINS),
    }
    pools["director"] = [factory.person() for _ in range(config.n_directors)]
    pools["writer"] = [factory.person() for _ in range(config.n_writers)]
    pools["actor"] = [factory.person() for _ in range(config.n_actors)]
    pools["tag"] = [factory.tag() for _ in range(config.n_tags)]
    movies = [factory.title() for _ in range(config.n_movies)]

    triples: List[KBTriple] = []
    for movie in movies:
        for relation, role in OBJECT_ROLES.items():
            low, high = CARDINALITY[relation]
            pool = pools[role]
            if len(pool) < low:
                raise ValueError(f"Pool '{role}' has {len(pool)} entities; each movie needs {low}.")
            k = rng.randint(low, min(high, len(pool)))
            for obj in rng.sample(pool, k):
                triples.append(KBTriple(movie, relation, obj))
    logger.info(f"Generated KB: {len(movies)} movies, {len(triples)} triples")
    return SynthKB(triples)


class KBIndex:
    """(entity, relation) -> [(neighbor, triple index)] in both directions."""

    def __init__(self, kb: SynthKB):
        self.edges: Dict[Tuple[str, str], List[Tuple[str, int]]] = {}
        for i, t in enumerate(kb.triples):
            self.edges.setdefault((t.subject, t.relation), []).append((t.object, i))
            self.edges.setdefault((t.object, REVERSE_PREFIX + t.relation), []).append((t.subject, i))
        self.subjects: Dict[str, List[str]] = {}
        for (entity, relation) in self.edges:
            self.subjects.setdefault(relation, []).append(entity)

    def follow(self, entity: str, relation: str) -> List[Tuple[str, str]]:
        """(neighbor, supporting triple source) pairs along one edge label."""
        reversed_ = relation.startswith(REVERSE_PREFIX)
        return [(n, triple_source(i, reversed_)) for n, i in self.edges.get((entity, relation), [])]

    def support(self, qclass: QuestionClass, subject: str) -> Tuple[Tuple[str, ...], FrozenSet[str]]:
        """Answers (sorted) and supporting triple sources of a question about `subject`."""
        frontier, sources = {subject}, set()
        for relation in qclass.relations:
            reached = set()
            for entity in sorted(frontier):
                for neighbor, source in self.follow(entity, relation):
                    reached.add(neighbor)
                    sources.add(source)
            frontier = reached
        return tuple(sorted(frontier)), frozenset(sources)


# --- Questions ---
def assign_splits(config: GenConfig, qtype: str, subjects: Iterable[str]) -> Dict[str, str]:
    """
    Splits the subjects of one question class. Subjects are ordered by a
    seeded hash of (qtype, subject) and cut at the split fractions, so every
    wording of a question lands in one split and every class reaches dev and
    test. A class with three or more subjects gets at least one dev and one
    test subject when those fractions are nonzero.
    """
    ordered = sorted(set(subjects), key=lambda s: (stable_unit_hash(f"{config.seed}:{qtype}:{s}"), s))
    n = len(ordered)
    n_dev, n_test = round(config.dev_fraction * n), round(config.test_fraction * n)
    if n >= 3:
        n_dev = max(n_dev, 1) if config.dev_fraction > 0 else 0
        n_test = max(n_test, 1) if config.test_fraction > 0 else 0
    n_test = min(n_test, n)
    n_dev = n - n_test if config.train_fraction == 0 else min(n_dev, n - n_test)
    n_train = n - n_dev - n_test
    labels = ["train"] * n_train + ["dev"] * n_dev + ["test"] * n_test
    return dict(zip(ordered, labels))


def generate_questions(kb: SynthKB, config: GenConfig,
                       question_bank: Optional[Dict[str, QuestionClass]] = None) -> List[QAExample]:
    """
    Instantiates every pattern (or `patterns_per_question` sampled ones) of
    every question class with every applicable subject entity.

    The two-hop family is included only with config.two_hop_questions.

    Raises:
        ValueError: Empty KB.
    """
    if not kb.triples:
        raise ValueError("Cannot generate questions from an empty KB.")
    bank = question_bank or load_question_bank()
    rng = random.Random(f"{config.seed}:questions")
    index = KBIndex(kb)
    entities = kb.entity_dictionary()

    examples: List[QAExample] = []
    for qtype, qclass in bank.items():
        if qclass.two_hop and not config.two_hop_questions:
            continue
        answerable = OrderedDict()
        for subject in index.subjects.get(qclass.relations[0], []):
            answers, gold_slot = index.support(qclass, subject)
            if answers:
                answerable[subject] = (answers, gold_slot)
        splits = assign_splits(config, qtype, answerable)
        for subject, (answers, gold_slot) in answerable.items():
            patterns = list(qclass.patterns)
            if 0 < config.patterns_per_question < len(patterns):
                patterns = [patterns[i] for i in sorted(rng.sample(range(len(patterns)),
                                                                   config.patterns_per_question))]
            split = splits[subject]
            for pattern in patterns:
                text = pattern.replace(qclass.placeholder, subject)
                tokens = tokenize(text, entities)
                if entity_token(subject) not in tokens:
                    raise ValueError(f"Entity '{subject}' did not survive tokenization of '{text}'.")
                examples.append(QAExample(tuple(tokens), text, answers, qtype, subject, gold_slot, split))
    counts = Counter(ex.split for ex in examples)
    logger.info(f"Generated {len(examples)} questions: " + ", ".join(f"{s}={counts[s]}" for s in SPLITS))
    return examples


# --- Documents ---
def _sentence_case(text: str) -> str:
    return text[:1].upper() + text[1:] + "."


def _join_objects(objects: Sequence[str]) -> str:
    if len(objects) == 1:
        return objects[0]
    return ", ".join(objects[:-1]) + " and " + objects[-1]


def generate_documents(kb: SynthKB, config: GenConfig,
                       doc_templates: Optional[Dict[str, List[str]]] = None,
                       stats: Optional[Counter] = None) -> List[Document]:
    """
    One synthetic document per movie, titled with the movie name.

    Facts are shuffled and realized one per sentence by a template drawn
    uniformly from the first `templates_per_relation` of the relation's
    templates. Each consecutive pair is merged with 'and' with probability
    conjunction_rate (at most two facts per sentence; same-relation pairs share
    one template with a joined object list). Sentences after the first replace
    every movie mention with 'it' with probability coreference_rate.

    Args:
        stats: Optional Counter receiving sentences, facts, conjunction and
            coreference opportunity / application counts.
    """
    templates = doc_templates or load_document_templates()
    rng = random.Random(f"{config.seed}:documents")
    n_templates = {relation: min(config.templates_per_relation, len(bank)) for relation, bank in templates.items()}
    clamped = sorted(r for r, bank in templates.items() if len(bank) < config.templates_per_relation)
    # 100 is the "all templates" setting; only smaller requests are worth a warning.
    if clamped and config.templates_per_relation < 100:
        logger.warning(f"templates_per_relation={config.templates_per_relation} clamped to the bank size for {clamped}")

    stats = stats if stats is not None else Counter()
    facts_by_movie: "OrderedDict[str, List[KBTriple]]" = OrderedDict()
    for triple in kb.triples:
        facts_by_movie.setdefault(triple.subject, []).append(triple)
    entities = kb.entity_dictionary()

    docs: List[Document] = []
    for movie, facts in facts_by_movie.items():
        facts = list(facts)
        rng.shuffle(facts)
        groups: List[List[KBTriple]] = []
        i = 0
        while i < len(facts):
            if i + 1 < len(facts):
                stats["conjunction_opportunities"] += 1
                if rng.random() < config.conjunction_rate:
                    stats["conjunctions"] += 1
                    groups.append(facts[i:i + 2])
                    i += 2
                    continue
            groups.append([facts[i]])
            i += 1

        sentences: List[str] = []
        for s_idx, group in enumerate(groups):
            mention = movie
            if s_idx > 0:
                stats["coreference_opportunities"] += 1
                if rng.random() < config.coreference_rate:
                    stats["coreferences"] += 1
                    mention = "it"
            clauses = []
            if len(group) == 2 and group[0].relation == group[1].relation:
                group_objects = [[group[0].object, group[1].object]]
                relations = [group[0].relation]
            else:
                group_objects = [[t.object] for t in group]
                relations = [t.relation for t in group]
            for relation, objects in zip(relations, group_objects):
                template = templates[relation][rng.randrange(n_templates[relation])]
                clauses.append(template.format(movie=mention, object=_join_objects(objects)))
            sentences.append(_sentence_case(" and ".join(clauses)))
        stats["facts"] += len(facts)
        stats["sentences"] += len(sentences)
        docs.append(Document.from_text(movie, sentences, entities))
    logger.info(f"Generated {len(docs)} documents, {stats['sentences']} sentences")
    return docs


def _template_regex(template: str) -> "re.Pattern":
    parts = re.split(r"(\{movie\}|\{object\})", template)
    pattern = "".join("(?P<movie>.+?)" if p == "{movie}" else "(?P<object>.+?)" if p == "{object}"
                      else re.escape(p) for p in parts)
    return re.compile(pattern + r"\.", re.IGNORECASE)


def invert_documents(docs: Sequence[Document], templates_per_relation: int = 1,
                     doc_templates: Optional[Dict[str, List[str]]] = None) -> List[KBTriple]:
    """
    Recovers KB triples from documents generated without conjunctions or
    coreference by matching each sentence against the template bank.

    Raises:
        ValueError: A sentence matches no template (or several relations).
    """
    templates = doc_templates or load_document_templates()
    compiled = [(relation, _template_regex(t)) for relation, bank in templates.items()
                for t in bank[:templates_per_relation]]
    triples: List[KBTriple] = []
    for doc in docs:
        for sentence in doc.text:
            found = set()
            for relation, regex in compiled:
                match = regex.fullmatch(sentence)
                if match and match.group("movie") == doc.title:
                    found.add((relation, match.group("object")))
            if len(found) != 1:
                raise ValueError(f"Sentence '{sentence}' of '{doc.title}' matched {len(found)} facts.")
            relation, obj = found.pop()
            triples.append(KBTriple(doc.title, relation, obj))
    return triples


# --- Corpus ---
def recommended_hash_threshold(n_movies: int) -> int:
    """Stop-word threshold F scaled from 1000 at ~17k movies, never below 100."""
    return max(100, int(round(1000 * n_movies / 17000)))


def generate_corpus(config: GenConfig) -> SynthCorpus:
    config.validate()
    question_bank = load_question_bank()
    doc_templates = load_document_templates()
    kb = generate_kb(config, template_words(question_bank, doc_templates))
    examples = generate_questions(kb, config, question_bank)
    stats: Counter = Counter()
    docs = generate_documents(kb, config, doc_templates, stats)
    splits = {s: [ex for ex in examples if ex.split == s] for s in SPLITS}
    manifest = build_manifest(config, kb, docs, splits, stats)
    return SynthCorpus(kb, docs, splits["train"], splits["dev"], splits["test"], manifest)


def build_manifest(config: GenConfig, kb: SynthKB, docs: Sequence[Document],
                   splits: Dict[str, List[QAExample]], stats: Counter) -> Dict[str, Any]:
    def rate(applied: str, opportunities: str) -> float:
        return stats[applied] / stats[opportunities] if stats[opportunities] else 0.0

    return {
        "config": config.to_dict(),
        "seed": config.seed,
        "counts": {
            "movies": len(kb.movies),
            "entities": len(kb.entity_names()),
            "triples": len(kb.triples),
            "documents": len(docs),
            "questions": sum(len(v) for v in splits.values()),
            **{s: len(splits[s]) for s in SPLITS},
        },
        "document_stats": {k: int(stats[k]) for k in sorted(stats)},
        "measured_conjunction_rate": rate("conjunctions", "conjunction_opportunities"),
        "measured_coreference_rate": rate("coreferences", "coreference_opportunities"),
        "recommended_hash_threshold": recommended_hash_threshold(len(kb.movies)),
    }


def emit_corpus(corpus: SynthCorpus, directory: str) -> List[str]:
    """
    Writes kb.tsv, docs.jsonl, qa_{train,dev,test}.tsv and manifest.json.

    Returns:
        The written file paths.

    Raises:
        OSError: If the directory is not writable.
    """
    ensure_dir(directory)
    paths = [os.path.join(directory, KB_FILE), os.path.join(directory, DOCS_FILE)]
    write_tsv(paths[0], ([t.subject, t.relation, t.object] for t in corpus.kb.triples))
    write_jsonl(paths[1], ({"title": d.title, "sentences": list(d.text)} for d in corpus.docs))
    for split in SPLITS:
        path = os.path.join(directory, QA_FILES[split])
        write_tsv(path, ([ex.text, "|".join(ex.answers), ex.qtype] for ex in corpus.split(split)))
        paths.append(path)
    paths.append(os.path.join(directory, MANIFEST_FILE))
    write_json(paths[-1], corpus.manifest)
    logger.info(f"Corpus written to {directory}: {len(corpus.kb.triples)} triples, {len(corpus.docs)} docs, "
                f"{len(corpus.train)}/{len(corpus.dev)}/{len(corpus.test)} questions")
    return paths


def corpus_files(directory: str) -> List[str]:
    return ([os.path.join(directory, KB_FILE), os.path.join(directory, DOCS_FILE)]
            + [os.path.join(directory, QA_FILES[s]) for s in SPLITS]
            + [os.path.join(directory, MANIFEST_FILE)])


def _find_subject(tokens: Sequence[str], qclass: QuestionClass,
                  by_role: Dict[str, Dict[str, str]]) -> Optional[str]:
    candidates = by_role.get(qclass.slot, {})
    for token in tokens:
        if token in candidates:
            return candidates[token]
    return None


def load_corpus(directory: str, question_bank: Optional[Dict[str, QuestionClass]] = None) -> SynthCorpus:
    """
    Reads a corpus directory written by emit_corpus.

    Question subjects and supporting triples are recovered from the KB.

    Raises:
        FileNotFoundError: Missing corpus file.
        CorpusFormatError: Malformed file, unknown relation/qtype, or a question
            whose subject entity cannot be found.
    """
    bank = question_bank or load_question_bank()
    kb_path = os.path.join(directory, KB_FILE)
    triples = []
    for line_no, (subject, relation, obj) in enumerate(read_tsv(kb_path, 3), start=1):
        try:
            triples.append(KBTriple(subject, relation, obj))
        except ValueError as e:
            raise CorpusFormatError(kb_path, str(e), line_no) from e
    kb = SynthKB(triples)
    entities = kb.entity_dictionary()
    index = KBIndex(kb)
    by_role: Dict[str, Dict[str, str]] = {}
    for role, names in kb.pools.items():
        by_role[role] = {entity_token(n): n for n in names}

    docs_path = os.path.join(directory, DOCS_FILE)
    docs = []
    for line_no, row in enumerate(read_jsonl(docs_path), start=1):
        if not isinstance(row.get("title"), str) or not isinstance(row.get("sentences"), list):
            raise CorpusFormatError(docs_path, "expected {'title': str, 'sentences': [str]}", line_no)
        docs.append(Document.from_text(row["title"], row["sentences"], entities))

    splits: Dict[str, List[QAExample]] = {}
    for split in SPLITS:
        path = os.path.join(directory, QA_FILES[split])
        examples = []
        for line_no, (text, answers, qtype) in enumerate(read_tsv(path, 3), start=1):
            if qtype not in bank:
                raise CorpusFormatError(path, f"unknown question type '{qtype}'", line_no)
            tokens = tokenize(text, entities)
            qclass = bank[qtype]
            subject = _find_subject(tokens, qclass, by_role)
            if subject is None:
                raise CorpusFormatError(path, f"no {qclass.slot} entity found in '{text}'", line_no)
            expected, gold_slot = index.support(qclass, subject)
            answer_list = tuple(answers.split("|"))
            if set(answer_list) != set(expected):
                logger.warning(f"{path}:{line_no}: answers disagree with the KB for '{text}'")
            examples.append(QAExample(tuple(tokens), text, answer_list, qtype, subject, gold_slot, split))
        splits[split] = examples

    manifest = read_json(os.path.join(directory, MANIFEST_FILE))
    logger.info(f"Loaded corpus from {directory}: {len(triples)} triples, {len(docs)} docs")
    return SynthCorpus(kb, docs, splits["train"], splits["dev"], splits["test"], manifest)


def ladder_config(base: GenConfig, preset: str) -> Tuple[str, GenConfig, str]:
    """(display label, generation config, knowledge source) for a ladder row."""
    if preset not in LADDER_PRESETS:
        raise ValueError(f"Unknown ladder preset '{preset}'; expected one of {list(LADDER_PRESETS)}.")
    label, overrides, source = LADDER_PRESETS[preset]
    return label, dataclasses.replace(base, **overrides).validate(), source
