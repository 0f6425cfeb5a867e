"""LC-KSVD offline pretraining.

The discriminative objective (reconstruction + linear classifier + label
consistency) is solved as a plain dictionary-learning problem on the
stacked matrix [Y; sqrt(alpha) H; sqrt(beta) Q]. The learned stacked
dictionary is split by rows and renormalized so the reconstruction block
meets the unit-atom constraint, pushing the scale into W and A.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .dictionary_learning import DLConfig, train
from .sparse_coding import Dictionary, SparseCode

MODEL_FORMAT_VERSION = 1


@dataclass
class LabelIndicator:
    H: np.ndarray  # c x N, one-hot columns
    c: int


@dataclass
class AtomAllocation:
    Q: np.ndarray  # n x N binary
    class_of_atom: np.ndarray  # length n


@dataclass
class DiscriminativeModel:
    D: Dictionary
    W: np.ndarray  # c x n
    A: np.ndarray  # n x n
    class_of_atom: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class PretrainConfig:
    alpha: float
    beta: float
    atoms_per_class: int
    dl: DLConfig

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise DataError("alpha and beta must be nonnegative")
        if self.atoms_per_class < 1:
            raise DataError("atoms_per_class must be >= 1")


def build_indicators(labels: np.ndarray, c: int, atoms_per_class: int):
    """One-hot label matrix H and block atom allocation Q: atoms are assigned
    to classes in contiguous blocks of atoms_per_class."""
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise DataError(f"label out of range [0, {c})")
    N = labels.size
    H = np.zeros((c, N))
    H[labels, np.arange(N)] = 1.0
    class_of_atom = np.repeat(np.arange(c), atoms_per_class)
    Q = (class_of_atom[:, None] == labels[None, :]).astype(float)
    return LabelIndicator(H, c), AtomAllocation(Q, class_of_atom)


def stack_training(Y, H, Q, alpha: float, beta: float) -> np.ndarray:
    """Vertical concatenation [Y; sqrt(alpha) H; sqrt(beta) Q]."""
    Y, H, Q = (np.asarray(M, dtype=float) for M in (Y, H, Q))
    if not (Y.shape[1] == H.shape[1] == Q.shape[1]):
        raise DataError("Y, H, Q must share the sample count")
    return np.vstack([Y, np.sqrt(alpha) * H, np.sqrt(beta) * Q])


def pretrain(Y: np.ndarray, labels: np.ndarray, cfg: PretrainConfig) -> DiscriminativeModel:
    """Train the stacked problem and split the result into (D, W, A)."""
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels, dtype=int)
    c = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=c)
    if np.any(counts == 0):
        raise DataError(f"class {int(np.argmin(counts))} has no training samples")
    n = c * cfg.atoms_per_class
    if Y.shape[1] < n:
        raise DataError(f"need at least {n} samples for {n} atoms, got {Y.shape[1]}")

    ind, alloc = build_indicators(labels, c, cfg.atoms_per_class)
    stacked = stack_training(Y, ind.H, alloc.Q, cfg.alpha, cfg.beta)
    result = train(stacked, replace(cfg.dl, n_atoms=n))

    m = Y.shape[0]
    S = result.dictionary.atoms
    Dhat, What, Ahat = S[:m], S[m:m + c], S[m + c:]
    norms = np.linalg.norm(Dhat, axis=0)
    if np.any(norms == 0):
        raise DataError(f"stacked atom {int(np.argmin(norms))} has zero reconstruction block")
    D = Dhat / norms
    W = What / (np.sqrt(cfg.alpha) * norms) if cfg.alpha > 0 else np.zeros_like(What)
    A = Ahat / (np.sqrt(cfg.beta) * norms) if cfg.beta > 0 else np.zeros_like(Ahat)
    return DiscriminativeModel(Dictionary(D), W, A, alloc.class_of_atom)


def classify(W: np.ndarray, x: SparseCode):
    """Linear classification of a sparse code: scores = W x, argmax with
    ties broken toward the lowest class id."""
    scores = W[:, x.support] @ x.values if x.nnz else np.zeros(W.shape[0])
    return int(np.argmax(scores)), scores


def save_model(path, model: DiscriminativeModel, sparsity: int):
    """Serialize a pretrained model (bit-exact round trip, versioned)."""
    np.savez(
        path,
        format_version=np.int64(MODEL_FORMAT_VERSION),
        D=model.D.atoms,
        W=model.W,
        A=model.A,
        class_of_atom=model.class_of_atom,
        sparsity=np.int64(sparsity),
    )


def load_model(path):
    """Inverse of save_model; returns (model, sparsity)."""
    with np.load(path) as z:
        if int(z["format_version"]) != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format version {int(z['format_version'])}")
        model = DiscriminativeModel(
            Dictionary(z["D"]), z["W"], z["A"], z["class_of_atom"].astype(int)
        )
        return model, int(z["sparsity"])
