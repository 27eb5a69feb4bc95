# -*- coding: utf-8 -*-
"""
Key-Value Memory Network: forward pass, analytic backward pass, prediction,
and the SGD training loop.

One hop addresses the hashed slots with the current query (softmax over
q·A·Φ_K(k)), reads o = Σ p·A·Φ_V(v), and updates q ← R_j(q + o). After H hops
the candidates are scored with q·B·Φ_Y(y). The same code runs the two
baselines: a standard MemNN (key == value slots, see `memnn_slots`) and
Supervised Embeddings (zero hops, no memory).
"""

import enum
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from featurize import MemorySlot
from memory_store import MemoryStore
from numerics import (
    DTYPE, GradientSet, SparseBatch, SparseVec, accumulate_batch_grad, accumulate_embedding_grad,
    clip_gradients, cross_entropy_loss, embed, embed_batch, sgd_step, softmax,
    softmax_cross_entropy_grad,
)
from evaluation import hits_at_1, map_mrr

logger = logging.getLogger(__name__)


class ModelKind(str, enum.Enum):
    KV_MEMNN = "kv_memnn"
    MEMNN = "memnn"
    EMBEDDINGS = "embeddings"


# --- Parameters ---
@dataclass
class HyperParams:
    d: int = 32
    hops: int = 2
    window: int = 7
    hash_threshold: float = 1000
    max_slots: int = 1000
    lr: float = 0.05
    epochs: int = 30
    dropout_question: float = 0.0
    dropout_memory: float = 0.0
    dropout_answer: float = 0.0
    seed: int = 1
    tied: bool = True
    clip_norm: float = 40.0
    init_scale: float = 0.1

    def validate(self) -> "HyperParams":
        """Raises ValueError naming the first offending field."""
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}.")
        if self.hops < 0:
            raise ValueError(f"hops must be >= 0, got {self.hops}.")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}.")
        if self.hash_threshold < 1:
            raise ValueError(f"hash_threshold must be >= 1, got {self.hash_threshold}.")
        if self.max_slots < 1:
            raise ValueError(f"max_slots must be >= 1, got {self.max_slots}.")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}.")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}.")
        for name in ("dropout_question", "dropout_memory", "dropout_answer"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}.")
        return self

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class ModelParams:
    """
    A (d×D), B (d×D, or None when tied to A), R_1..R_H (d×d).
    """
    A: np.ndarray
    B: Optional[np.ndarray]
    R: List[np.ndarray]
    hyper: HyperParams = field(default_factory=HyperParams)

    @property
    def tied(self) -> bool:
        return self.B is None

    @property
    def B_eff(self) -> np.ndarray:
        return self.A if self.B is None else self.B

    @property
    def d(self) -> int:
        return int(self.A.shape[0])

    @property
    def dim(self) -> int:
        return int(self.A.shape[1])

    @property
    def hops(self) -> int:
        return len(self.R)

    def copy(self) -> "ModelParams":
        return ModelParams(self.A.copy(), None if self.B is None else self.B.copy(),
                           [R.copy() for R in self.R], self.hyper)

    @classmethod
    def initialize(cls, dim: int, hyper: HyperParams, hops: Optional[int] = None,
                   tied: Optional[bool] = None) -> "ModelParams":
        """
        Seeded init: A, B ~ U[-s, s] with s = init_scale/√d; R_j = I + U[-s, s].
        """
        hops = hyper.hops if hops is None else hops
        tied = hyper.tied if tied is None else tied
        rng = np.random.default_rng(hyper.seed)
        s = hyper.init_scale / math.sqrt(hyper.d)
        A = rng.uniform(-s, s, size=(hyper.d, dim))
        B = None if tied else rng.uniform(-s, s, size=(hyper.d, dim))
        R = [np.eye(hyper.d, dtype=DTYPE) + rng.uniform(-s, s, size=(hyper.d, hyper.d)) for _ in range(hops)]
        return cls(A, B, R, hyper)


# --- Candidates and Traces ---
@dataclass
class CandidateSet:
    """Candidate answers y_i with their features Φ_Y(y_i); ids are unique."""
    ids: List[str]
    features: SparseBatch
    mode: str = "entity"
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.ids:
            raise ValueError("CandidateSet must be nonempty.")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("CandidateSet ids must be unique.")
        if self.features.n_rows != len(self.ids):
            raise ValueError("CandidateSet needs one feature vector per id.")
        self.index = {cid: i for i, cid in enumerate(self.ids)}

    @classmethod
    def from_vectors(cls, ids: Sequence[str], vectors: Sequence[SparseVec], mode: str = "entity") -> "CandidateSet":
        return cls(list(ids), SparseBatch.from_vectors(vectors), mode)

    def __len__(self) -> int:
        return len(self.ids)

    def gold_indices(self, gold_ids) -> FrozenSet[int]:
        return frozenset(self.index[g] for g in gold_ids if g in self.index)


@dataclass
class HopStep:
    query: np.ndarray
    addressing: np.ndarray
    output: np.ndarray


@dataclass
class HopTrace:
    """
    Everything one forward pass computed, kept for inspection and backward.
    """
    hops: List[HopStep]
    final_query: np.ndarray
    scores: np.ndarray
    distribution: np.ndarray
    question: SparseVec
    keys: Optional[SparseBatch]
    values: Optional[SparseBatch]
    candidate_features: SparseBatch
    key_emb: Optional[np.ndarray] = None
    value_emb: Optional[np.ndarray] = None
    candidate_emb: Optional[np.ndarray] = None


# --- Forward / Backward ---
def _forward_batches(params: ModelParams, question: SparseVec, keys: Optional[SparseBatch],
                     values: Optional[SparseBatch], candidate_features: SparseBatch,
                     hops: Optional[int] = None) -> HopTrace:
    hops = params.hops if hops is None else hops
    A, B = params.A, params.B_eff
    q = embed(A, question)
    steps: List[HopStep] = []
    K = V = None
    if hops > 0:
        if keys is None or keys.n_rows == 0:
            raise ValueError("forward needs at least one memory slot when hops > 0.")
        # keys address, values are read
        K = embed_batch(A, keys)
        V = embed_batch(A, values)
        for R in params.R[:hops]:
            p = softmax(K @ q)
            o = p @ V
            steps.append(HopStep(q, p, o))
            q = R @ (q + o)  # next hop query
    # candidates are scored against the last query
    Y = embed_batch(B, candidate_features)
    z = Y @ q
    return HopTrace(steps, q, z, softmax(z), question, keys, values, candidate_features, K, V, Y)


def slot_batches(slots: Sequence[MemorySlot], dim: int):
    """(keys, values) SparseBatches for a slot list."""
    keys = SparseBatch.from_vectors([s.key for s in slots], dim)
    values = SparseBatch.from_vectors([s.value for s in slots], dim)
    return keys, values


def forward(params: ModelParams, question: SparseVec, slots: Sequence[MemorySlot],
            candidates: CandidateSet, hops: Optional[int] = None) -> HopTrace:
    """
    Runs H address/read hops over `slots`, then scores every candidate.

    Args:
        params: Model parameters.
        question: Φ_X(x).
        slots: Hashed memory slots (order does not matter).
        candidates: Answer candidates.
        hops: Override of the hop count (0 = Supervised Embeddings path).

    Returns:
        HopTrace with per-hop queries, addressing distributions and outputs,
        plus the final distribution over candidates.

    Raises:
        ValueError: Empty slot list with hops > 0, or empty candidates.
    """
    if len(candidates) == 0:
        raise ValueError("forward needs at least one candidate.")
    hops = params.hops if hops is None else hops
    if hops > 0 and not slots:
        raise ValueError("forward needs at least one memory slot when hops > 0.")
    keys, values = slot_batches(slots, params.dim) if hops > 0 else (None, None)
    return _forward_batches(params, question, keys, values, candidates.features, hops)


def backward(params: ModelParams, trace: HopTrace, gold: Sequence[int]) -> GradientSet:
    """
    Exact gradients of −log Σ_{gold} softmax(scores) w.r.t. A, B and every R_j,
    including the paths through each hop's addressing softmax.
    """
    grads = GradientSet.zeros_like(params)
    dz = softmax_cross_entropy_grad(trace.distribution, gold)
    accumulate_batch_grad(grads.dB, trace.candidate_features, np.outer(dz, trace.final_query))
    g_q = trace.candidate_emb.T @ dz

    if trace.hops:
        K, V = trace.key_emb, trace.value_emb
        g_K = np.zeros_like(K)
        g_V = np.zeros_like(V)
        for j in range(len(trace.hops) - 1, -1, -1):
            step = trace.hops[j]
            # q_next = R_j u, u = q + o
            grads.dR[j] = np.outer(g_q, step.query + step.output)
            g_u = params.R[j].T @ g_q
            p = step.addressing
            g_V += np.outer(p, g_u)  # o = p V
            g_p = V @ g_u
            # softmax Jacobian applied to g_p
            g_s = p * (g_p - p @ g_p)
            g_K += np.outer(g_s, step.query)
            # q reaches the loss through u and through the scores K q
            g_q = g_u + K.T @ g_s
        # K and V rows are A-embeddings of the slot bags
        accumulate_batch_grad(grads.dA, trace.keys, g_K)
        accumulate_batch_grad(grads.dA, trace.values, g_V)
    accumulate_embedding_grad(grads.dA, trace.question, g_q)
    return grads


def example_loss(params: ModelParams, question: SparseVec, slots: Sequence[MemorySlot],
                 candidates: CandidateSet, gold: Sequence[int]) -> float:
    return cross_entropy_loss(forward(params, question, slots, candidates).distribution, gold)


def supervised_embeddings_forward(params: ModelParams, question: SparseVec,
                                  candidates: CandidateSet) -> np.ndarray:
    """softmax over ⟨A·Φ_X(x), B·Φ_Y(y_i)⟩: the memory-free baseline."""
    return forward(params, question, [], candidates, hops=0).distribution


def memnn_slots(slots: Sequence[MemorySlot]) -> List[MemorySlot]:
    """
    Standard MemNN memories: key and value concatenated into one bag when they
    differ, so every slot has key == value.
    """
    converted = []
    for slot in slots:
        if slot.key == slot.value:
            converted.append(MemorySlot(slot.key, slot.key, slot.value_candidates, slot.provenance))
        else:
            merged = slot.key + slot.value
            converted.append(MemorySlot(merged, merged, slot.value_candidates, slot.provenance))
    return converted


# --- Prediction ---
@dataclass
class Prediction:
    ranking: List[int]
    scores: np.ndarray
    slot_ids: List[int]
    trace: HopTrace

    def ranked_ids(self, candidates: CandidateSet) -> List[str]:
        return [candidates.ids[i] for i in self.ranking]


def rank_distribution(dist: np.ndarray) -> List[int]:
    """Candidate indices by score descending, ties by lower index."""
    return [int(i) for i in np.lexsort((np.arange(dist.size), -dist))]


def predict(params: ModelParams, question: SparseVec, store: Optional[MemoryStore],
            candidates: CandidateSet, slot_ids: Optional[Sequence[int]] = None) -> Prediction:
    """
    Hashes the question (once; hops reuse the same slots), runs forward and
    ranks every candidate. `slot_ids` overrides hashing (pre-selected memory).
    """
    if params.hops > 0:
        if slot_ids is None:
            if store is None:
                raise ValueError("predict needs a memory store when the model has hops.")
            slot_ids = store.hash_ids(question.indices)
        slots = [store.slots[i] for i in slot_ids]
    else:
        slot_ids, slots = [], []
    trace = forward(params, question, slots, candidates)
    ranking = rank_distribution(trace.distribution)
    return Prediction(ranking, trace.distribution[ranking], list(slot_ids), trace)


# --- Training ---
@dataclass
class EncodedExample:
    """A featurized QA example; gold holds candidate indices."""
    question: SparseVec
    gold: FrozenSet[int]
    slot_ids: List[int]
    qtype: str = ""
    candidates: Optional[CandidateSet] = None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_hits1: Optional[float] = None
    dev_mrr: Optional[float] = None
    dev_map: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class TrainResult:
    params: ModelParams
    history: List[EpochRecord]
    best_epoch: Optional[int]
    final_params: ModelParams


def best_in_history(history: Sequence[Mapping[str, object]], selection: str = "hits1") -> Tuple[float, Optional[int]]:
    """Best stored dev score and its epoch; (-inf, None) when no epoch was scored."""
    key = "dev_mrr" if selection == "mrr" else "dev_hits1"
    best, best_epoch = -math.inf, None
    for record in history:
        value = record.get(key)
        if value is not None and value > best:
            best, best_epoch = value, record["epoch"]
    return best, best_epoch


def _drop_vec(vec: SparseVec, rate: float, rng: np.random.Generator) -> SparseVec:
    if rate <= 0 or vec.nnz == 0:
        return vec
    keep = rng.random(vec.nnz) >= rate
    return SparseVec(vec.indices[keep], vec.weights[keep], vec.dim)


def _drop_batch(batch: Optional[SparseBatch], rate: float, rng: np.random.Generator) -> Optional[SparseBatch]:
    if batch is None or rate <= 0 or batch.indices.size == 0:
        return batch
    return batch.with_weights(batch.weights * (rng.random(batch.indices.size) >= rate))


def rank_examples(params: ModelParams, examples: Sequence[EncodedExample], store: Optional[MemoryStore],
                  candidates: Optional[CandidateSet]) -> List[List[int]]:
    """Candidate-index rankings for every example (no dropout)."""
    rankings = []
    for ex in examples:
        cand = ex.candidates or candidates
        rankings.append(predict(params, ex.question, store, cand, ex.slot_ids).ranking)
    return rankings


def train(params: ModelParams, dataset: Sequence[EncodedExample], store: Optional[MemoryStore],
          candidates: Optional[CandidateSet], hyper: HyperParams,
          dev: Optional[Sequence[EncodedExample]] = None, start_epoch: int = 0,
          selection: str = "hits1", on_epoch: Optional[Callable[[EpochRecord], None]] = None,
          progress: bool = False, best_metric: float = -math.inf) -> TrainResult:
    """
    Shuffled single-example SGD with optional word dropout.

    Each epoch draws its shuffle and dropout masks from an RNG seeded by
    (hyper.seed, epoch), so resumed runs reproduce uninterrupted ones.
    Dropout is applied at train time only, independently to the question,
    memory (keys and values) and answer feature banks.

    Args:
        params: Initial parameters; updated in place.
        dataset: Training examples (examples with no reachable gold are skipped).
        store: Memory store the examples' slot ids point into.
        candidates: Shared candidate set (examples may carry their own).
        hyper: Learning rate, epochs, dropout rates, clipping, seed.
        dev: Examples for model selection.
        start_epoch: First epoch number (resume).
        selection: 'hits1' (entity mode) or 'mrr' (sentence mode).
        on_epoch: Callback per finished epoch.
        progress: Show a tqdm progress bar.
        best_metric: Dev score to beat, e.g. the best epoch before a resume.

    Returns:
        TrainResult whose params are the best-on-dev snapshot (the final params without dev).
        best_epoch stays None when no epoch beats `best_metric`.

    Raises:
        ValueError: Empty dataset.
        FloatingPointError: Non-finite loss or gradient.
    """
    if not dataset:
        raise ValueError("train needs a nonempty dataset.")
    usable = [ex for ex in dataset if ex.gold]
    if len(usable) < len(dataset):
        logger.warning(f"{len(dataset) - len(usable)} training examples have no gold candidate and are skipped")
    if not usable:
        raise ValueError("No training example has a reachable gold candidate.")

    history: List[EpochRecord] = []
    best_params, best_epoch = params.copy(), None
    epochs = range(start_epoch, start_epoch + hyper.epochs)
    for epoch in tqdm(epochs, desc="epochs", disable=not progress):
        # seeded by epoch number, so a resumed run draws the same stream
        rng = np.random.default_rng([hyper.seed, epoch])
        total_loss = 0.0
        for idx in rng.permutation(len(usable)):
            ex = usable[idx]
            cand = ex.candidates or candidates
            question = _drop_vec(ex.question, hyper.dropout_question, rng)
            keys = values = None
            if params.hops > 0:
                keys, values = slot_batches([store.slots[i] for i in ex.slot_ids], params.dim)
                keys = _drop_batch(keys, hyper.dropout_memory, rng)
                values = _drop_batch(values, hyper.dropout_memory, rng)
            cand_features = _drop_batch(cand.features, hyper.dropout_answer, rng)
            # dropout is train-only; dev ranking below uses the full bags
            trace = _forward_batches(params, question, keys, values, cand_features)
            loss = cross_entropy_loss(trace.distribution, ex.gold)
            if not math.isfinite(loss):
                raise FloatingPointError(f"Non-finite loss {loss} at epoch {epoch}, example {int(idx)} "
                                         f"(lr={hyper.lr}); lower the learning rate or clip_norm.")
            grads = backward(params, trace, sorted(ex.gold))
            if not grads.is_finite():
                raise FloatingPointError(f"Non-finite gradient at epoch {epoch}, example {int(idx)}.")
            sgd_step(params, clip_gradients(grads, hyper.clip_norm), hyper.lr, in_place=True)
            total_loss += loss

        record = EpochRecord(epoch=epoch, train_loss=total_loss / len(usable))
        if dev:
            rankings = rank_examples(params, dev, store, candidates)
            golds = [ex.gold for ex in dev]
            record.dev_hits1 = hits_at_1(rankings, golds)
            record.dev_map, record.dev_mrr = map_mrr(rankings, golds)
            metric = record.dev_mrr if selection == "mrr" else record.dev_hits1
            # strictly better only: ties keep the earlier epoch
            if metric > best_metric:
                best_params, best_metric, best_epoch = params.copy(), metric, epoch
        logger.info(f"Epoch {epoch}: train loss {record.train_loss:.4f}"
                    + (f", dev hits@1 {record.dev_hits1:.2f}, dev MRR {record.dev_mrr:.4f}" if dev else ""))
        history.append(record)
        if on_epoch:
            on_epoch(record)

    if not dev:
        best_params = params.copy()
    return TrainResult(best_params, history, best_epoch, params)
