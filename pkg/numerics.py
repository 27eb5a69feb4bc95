# -*- coding: utf-8 -*-
"""
Dense/sparse linear algebra used by the memory network.

Dense vectors and matrices are plain float64 numpy arrays. Sparse bag-of-words
feature vectors are SparseVec objects; batches of them (all keys of the hashed
slots, all candidate answers) are packed into a CSR-like SparseBatch so that a
whole memory can be embedded with one gather and one segmented sum.

Also holds softmax / cross-entropy, the gradient carrier (GradientSet), plain
SGD with global-norm clipping, and the central finite-difference oracle used to
check every hand-derived gradient.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from model import ModelParams

logger = logging.getLogger(__name__)

DTYPE = np.float64
DEFAULT_FD_EPSILON = 1e-5


# --- Sparse Feature Vectors ---
@dataclass(frozen=True, eq=False)
class SparseVec:
    """
    Sorted (index, weight) pairs over a dictionary of size `dim`.

    Indices are strictly increasing, inside [0, dim), and weights are finite
    and nonzero. Use `SparseVec.from_counts` to build one from unsorted data.
    """
    indices: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self):
        if self.indices.shape != self.weights.shape or self.indices.ndim != 1:
            raise ValueError("SparseVec indices and weights must be 1-D arrays of equal length.")
        if self.indices.size:
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError("SparseVec indices must be strictly increasing.")
            if self.indices[0] < 0 or self.indices[-1] >= self.dim:
                raise ValueError(f"SparseVec index out of range for dim {self.dim}.")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights == 0):
                raise ValueError("SparseVec weights must be finite and nonzero.")

    @classmethod
    def from_counts(cls, counts: Dict[int, float], dim: int) -> "SparseVec":
        """Builds a SparseVec from an {index: weight} mapping, dropping zero weights."""
        items = sorted((i, w) for i, w in counts.items() if w != 0)
        indices = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
        weights = np.fromiter((w for _, w in items), dtype=DTYPE, count=len(items))
        return cls(indices, weights, dim)

    @classmethod
    def empty(cls, dim: int) -> "SparseVec":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=DTYPE), dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def entries(self) -> List[Tuple[int, float]]:
        return [(int(i), float(w)) for i, w in zip(self.indices, self.weights)]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim, dtype=DTYPE)
        dense[self.indices] = self.weights
        return dense

    def scaled(self, alpha: float) -> "SparseVec":
        if alpha == 0:
            return SparseVec.empty(self.dim)
        return SparseVec(self.indices.copy(), self.weights * alpha, self.dim)

    def __add__(self, other: "SparseVec") -> "SparseVec":
        if self.dim != other.dim:
            raise ValueError(f"Cannot add SparseVec of dim {self.dim} and {other.dim}.")
        merged: Dict[int, float] = dict(self.entries())
        for i, w in other.entries():
            merged[i] = merged.get(i, 0.0) + w
        return SparseVec.from_counts(merged, self.dim)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVec):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash((self.dim, self.indices.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"SparseVec(dim={self.dim}, entries={self.entries()})"


@dataclass(frozen=True)
class SparseBatch:
    """
    CSR packing of n SparseVecs sharing one dim: row r owns
    indices[row_ptr[r]:row_ptr[r+1]].
    """
    indices: np.ndarray
    weights: np.ndarray
    row_ptr: np.ndarray
    dim: int

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVec], dim: Optional[int] = None) -> "SparseBatch":
        if dim is None:
            if not vectors:
                raise ValueError("Cannot infer the dim of an empty SparseBatch.")
            dim = vectors[0].dim
        row_ptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        for r, vec in enumerate(vectors):
            if vec.dim != dim:
                raise ValueError(f"SparseBatch row {r} has dim {vec.dim}, expected {dim}.")
            row_ptr[r + 1] = row_ptr[r] + vec.nnz
        if vectors:
            indices = np.concatenate([v.indices for v in vectors]).astype(np.int64, copy=False)
            weights = np.concatenate([v.weights for v in vectors]).astype(DTYPE, copy=False)
        else:
            indices = np.zeros(0, dtype=np.int64)
            weights = np.zeros(0, dtype=DTYPE)
        return cls(indices, weights, row_ptr, dim)

    @property
    def n_rows(self) -> int:
        return int(self.row_ptr.size - 1)

    def row_of_entry(self) -> np.ndarray:
        """Row id of every packed entry."""
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_ptr))

    def row(self, r: int) -> SparseVec:
        lo, hi = self.row_ptr[r], self.row_ptr[r + 1]
        return SparseVec(self.indices[lo:hi].copy(), self.weights[lo:hi].copy(), self.dim)

    def with_weights(self, weights: np.ndarray) -> "SparseBatch":
        """Same sparsity pattern, new weights (zeros allowed: dropped-out entries)."""
        return SparseBatch(self.indices, weights, self.row_ptr, self.dim)


# --- Embedding ---
def _check_dims(M: np.ndarray, dim: int):
    if M.ndim != 2 or M.shape[1] != dim:
        raise ValueError(f"Dimension mismatch: matrix has shape {M.shape}, feature dim is {dim}.")


def embed(M: np.ndarray, phi: SparseVec) -> np.ndarray:
    """
    Computes M·phi touching only the nnz(phi) columns of M.

    Args:
        M: d×D matrix.
        phi: SparseVec with phi.dim == D.

    Returns:
        Dense vector of length d.

    Raises:
        ValueError: If M.cols differs from phi.dim.
    """
    _check_dims(M, phi.dim)
    if phi.nnz == 0:
        return np.zeros(M.shape[0], dtype=DTYPE)
    return M[:, phi.indices] @ phi.weights


def embed_batch(M: np.ndarray, batch: SparseBatch) -> np.ndarray:
    """Embeds every row of `batch`; returns an (n_rows × d) matrix."""
    _check_dims(M, batch.dim)
    out = np.zeros((batch.n_rows, M.shape[0]), dtype=DTYPE)
    if batch.indices.size == 0:
        return out
    # one weighted column per packed entry, summed per row below
    contrib = (M[:, batch.indices] * batch.weights).T
    starts = batch.row_ptr[:-1]
    nonempty = np.diff(batch.row_ptr) > 0
    # Empty rows have zero width, so consecutive nonempty starts delimit segments exactly.
    out[nonempty] = np.add.reduceat(contrib, starts[nonempty], axis=0)
    return out


def accumulate_embedding_grad(dM: np.ndarray, phi: SparseVec, g: np.ndarray):
    """dM += outer(g, phi), in place."""
    if phi.nnz:
        dM[:, phi.indices] += np.outer(g, phi.weights)


def accumulate_batch_grad(dM: np.ndarray, batch: SparseBatch, row_grads: np.ndarray):
    """dM += Σ_r outer(row_grads[r], batch.row(r)), in place; repeated indices accumulate."""
    if batch.indices.size == 0:
        return
    vals = row_grads[batch.row_of_entry()] * batch.weights[:, None]
    np.add.at(dM.T, batch.indices, vals)  # unbuffered: repeated ids add up


# --- Softmax and Loss ---
def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtraction); invariant under constant shifts."""
    z = np.asarray(z, dtype=DTYPE)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("softmax expects a non-empty 1-D vector.")
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def cross_entropy_loss(dist: np.ndarray, gold: Iterable[int]) -> float:
    """
    −log of the probability mass on the gold set.

    Several gold answers are pooled: the loss is −log Σ_{i∈gold} dist[i].

    Raises:
        ValueError: If gold is empty or indexes outside dist.
    """
    gold_idx = sorted(set(int(g) for g in gold))
    if not gold_idx:
        raise ValueError("cross_entropy_loss needs at least one gold index.")
    if gold_idx[0] < 0 or gold_idx[-1] >= len(dist):
        raise ValueError(f"Gold index out of range for a distribution of size {len(dist)}: {gold_idx}")
    mass = float(np.sum(np.asarray(dist, dtype=DTYPE)[gold_idx]))
    # NaN passes through unclamped
    if np.isnan(mass):
        return mass
    if mass <= 0.0:
        return float("inf")
    return max(0.0, -float(np.log(mass)))


def softmax_cross_entropy_grad(dist: np.ndarray, gold: Iterable[int]) -> np.ndarray:
    """d loss / d logits for the pooled-gold loss: dist − dist·1[gold]/P(gold)."""
    gold_idx = np.fromiter(sorted(set(int(g) for g in gold)), dtype=np.int64)
    grad = dist.copy()
    mass = float(np.sum(dist[gold_idx]))
    if mass > 0.0:
        grad[gold_idx] -= dist[gold_idx] / mass
    else:
        # gold mass underflowed: spread the target evenly over the gold set
        grad[gold_idx] -= 1.0 / gold_idx.size
    return grad


# --- Gradients ---
@dataclass
class GradientSet:
    """
    Gradient carrier mirroring ModelParams.

    dA holds the contribution of every use of A (question, keys, values); dB
    the contribution of the answer scoring. When B is tied to A, the effective
    gradient of the shared matrix is `total_A()`.
    """
    dA: np.ndarray
    dB: np.ndarray
    dR: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: "ModelParams") -> "GradientSet":
        return cls(np.zeros_like(params.A), np.zeros_like(params.A),
                   [np.zeros_like(R) for R in params.R])

    def total_A(self) -> np.ndarray:
        return self.dA + self.dB

    def arrays(self) -> List[np.ndarray]:
        return [self.dA, self.dB, *self.dR]

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays())))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.arrays())

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(self.dA * factor, self.dB * factor, [g * factor for g in self.dR])


def clip_gradients(grads: GradientSet, max_norm: Optional[float]) -> GradientSet:
    """Rescales the whole set when its global norm exceeds max_norm (None/≤0 disables)."""
    if not max_norm or max_norm <= 0:
        return grads
    norm = grads.global_norm()
    # one factor for every matrix keeps the direction
    if norm > max_norm:
        logger.debug(f"Clipping gradient norm {norm:.3f} to {max_norm}")
        return grads.scaled(max_norm / norm)
    return grads


def sgd_step(params: "ModelParams", grads: GradientSet, lr: float, in_place: bool = False) -> "ModelParams":
    """
    θ ← θ − lr·g for every matrix.

    With B tied to A the B contribution is accumulated into A before the update.

    Args:
        params: Current parameters.
        grads: Gradients with shapes matching params.
        lr: Learning rate (≥ 0; 0 leaves params unchanged).
        in_place: Update params' arrays directly (the training loop owns them).

    Returns:
        The updated parameters (params itself when in_place).
    """
    if lr < 0:
        raise ValueError(f"Learning rate must be non-negative, got {lr}.")
    if len(grads.dR) != len(params.R):
        raise ValueError(f"Gradient hop count {len(grads.dR)} does not match params ({len(params.R)}).")
    target = params if in_place else params.copy()
    if target.tied:
        # one matrix, both gradient paths
        target.A -= lr * grads.total_A()
    else:
        target.A -= lr * grads.dA
        target.B -= lr * grads.dB
    for R, dR in zip(target.R, grads.dR):
        R -= lr * dR
    return target


# --- Finite-Difference Oracle ---
def numerical_gradient(func: Callable[[], float], X: np.ndarray, epsilon: float = DEFAULT_FD_EPSILON) -> np.ndarray:
    """
    Central differences of a scalar closure w.r.t. every entry of X.

    X is perturbed in place and restored after each coordinate; `func` must read
    X through whatever object owns it.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}.")
    grad = np.zeros_like(X, dtype=DTYPE)
    flat = X.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + epsilon
        f_plus = func()
        flat[i] = original - epsilon
        f_minus = func()
        flat[i] = original
        grad.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * epsilon)
    return grad


def finite_difference_grad(f: Callable[["ModelParams"], float], params: "ModelParams",
                           epsilon: float = DEFAULT_FD_EPSILON) -> GradientSet:
    """
    Central-difference gradient of f at params for every parameter matrix.

    For tied parameters the derivative w.r.t. the shared matrix is returned in
    dA (it already includes the B path) and dB is all zeros.
    """
    perturbed = params.copy()
    dA = numerical_gradient(lambda: f(perturbed), perturbed.A, epsilon)
    if perturbed.tied:
        dB = np.zeros_like(perturbed.A)
    else:
        dB = numerical_gradient(lambda: f(perturbed), perturbed.B, epsilon)
    dR = [numerical_gradient(lambda: f(perturbed), R, epsilon) for R in perturbed.R]
    return GradientSet(dA, dB, dR)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """‖a − n‖ / max(‖a‖ + ‖n‖, floor)."""
    diff = float(np.linalg.norm(analytic - numeric))
    return diff / max(float(np.linalg.norm(analytic) + np.linalg.norm(numeric)), floor)
