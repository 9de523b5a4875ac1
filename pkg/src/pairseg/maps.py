"""Probabilistic segmentation maps and the metrics defined on them."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ContractViolation

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class ProbMaps:
    """Per-cell probability vectors over k segments on an n-by-n grid.

    values has shape (k, n, n); each cell's k-vector lies on the simplex
    (entries in [0, 1], summing to 1 within SIMPLEX_TOL).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ContractViolation(f"expected shape (k, n, n), got {v.shape}")
        if v.shape[0] < 1:
            raise ContractViolation("need at least one segment map")
        if not np.isfinite(v).all():
            raise ContractViolation("probability maps contain non-finite entries")
        if v.min() < -SIMPLEX_TOL or v.max() > 1 + SIMPLEX_TOL:
            raise ContractViolation("probability entries outside [0, 1]")
        sums = v.sum(axis=0)
        if np.abs(sums - 1.0).max() > SIMPLEX_TOL:
            raise ContractViolation(
                f"cell probabilities do not sum to 1 (max dev {np.abs(sums - 1).max():.3e})"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    def flat(self) -> np.ndarray:
        """(n*n, k) view: one probability vector per cell, row-major."""
        return self.values.reshape(self.k, -1).T

    def cell(self, flat_index: int) -> np.ndarray:
        return self.flat()[flat_index]

    def permuted(self, perm) -> "ProbMaps":
        """Maps with segment axis reordered: new map j = old map perm[j]."""
        perm = list(perm)
        if sorted(perm) != list(range(self.k)):
            raise ContractViolation(f"not a permutation of 0..{self.k - 1}: {perm}")
        return ProbMaps(self.values[perm])


@dataclass(frozen=True)
class SegMap:
    """Hard per-cell labels in {0, ..., k-1}; the argmax of a ProbMaps."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 2 or lab.shape[0] != lab.shape[1]:
            raise ContractViolation(f"expected square label array, got {lab.shape}")
        if lab.min() < 0 or lab.max() >= self.k:
            raise ContractViolation("labels outside {0, ..., k-1}")
        lab = lab.copy()
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)


def prob_same(p_i: np.ndarray, p_j: np.ndarray) -> float:
    """Probability two cells share a segment: the dot product of their vectors."""
    p_i = np.asarray(p_i, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    if p_i.shape != p_j.shape or p_i.ndim != 1:
        raise ContractViolation(f"simplex vectors differ in shape: {p_i.shape} vs {p_j.shape}")
    for v in (p_i, p_j):
        if abs(v.sum() - 1.0) > 1e-6 or v.min() < -1e-9:
            raise ContractViolation("argument is not on the probability simplex")
    return float(p_i @ p_j)


def argmax_segmap(p: ProbMaps) -> SegMap:
    """Hard segmentation map; ties broken toward the lowest segment index."""
    # np.argmax returns the first maximal index, which is the tie-break rule.
    labels = np.argmax(p.values, axis=0)
    return SegMap(labels=labels, k=p.k)


def entropy_map(p: ProbMaps) -> np.ndarray:
    """Per-cell Shannon entropy in nats, shape (n, n), range [0, ln k]."""
    v = p.values
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(v > 0.0, v * np.log(v), 0.0)
    h = -terms.sum(axis=0)
    return np.maximum(h, 0.0)


def mean_entropy(p: ProbMaps) -> tuple[float, float]:
    """Mean and standard error of the per-cell entropies."""
    h = entropy_map(p).ravel()
    mean = float(h.mean())
    if h.size < 2:
        return mean, 0.0
    se = float(h.std(ddof=1) / np.sqrt(h.size))
    return mean, se


def _pairwise_l1(p: ProbMaps, reference: ProbMaps) -> np.ndarray:
    """cost[a, b] = sum over cells of |p map a - reference map b|."""
    pa = p.values.reshape(p.k, -1)
    rb = reference.values.reshape(reference.k, -1)
    return np.abs(pa[:, None, :] - rb[None, :, :]).sum(axis=2)


def align_labels(p: ProbMaps, reference: ProbMaps, max_k: int = 8) -> tuple[int, ...]:
    """Permutation minimizing the MAE of p against reference.

    Returns perm such that ``p.permuted(perm)`` best matches reference,
    i.e. old map perm[j] is compared against reference map j. Exhaustive
    search over k! permutations; k above max_k is rejected (raise the bound
    explicitly to allow k = 9 at O(9!) cost).
    """
    if p.values.shape != reference.values.shape:
        raise ContractViolation(
            f"shape mismatch: {p.values.shape} vs {reference.values.shape}"
        )
    k = p.k
    if k > max_k:
        raise ContractViolation(
            f"label alignment supports k <= {max_k}; pass max_k to override"
        )
    cost = _pairwise_l1(p, reference)
    best_perm = None
    best_cost = np.inf
    for perm in permutations(range(k)):
        c = sum(cost[perm[j], j] for j in range(k))
        if c < best_cost - 1e-15:
            best_cost = c
            best_perm = perm
    return tuple(best_perm)


def mae_aligned(p: ProbMaps, reference: ProbMaps, max_k: int = 8) -> float:
    """Mean absolute error after optimal label alignment.

    Average over cells of the L1 distance between the aligned probability
    k-tuples; ranges over [0, 2].
    """
    perm = align_labels(p, reference, max_k=max_k)
    diff = np.abs(p.values[list(perm)] - reference.values)
    return float(diff.sum(axis=0).mean())


def uniform_maps(k: int, n: int) -> ProbMaps:
    """Maps with every cell at 1/k."""
    return ProbMaps(np.full((k, n, n), 1.0 / k))


def onehot_maps(labels: np.ndarray, k: int) -> ProbMaps:
    """Deterministic maps from a label grid."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    v = np.zeros((k, n, n))
    for seg in range(k):
        v[seg][labels == seg] = 1.0
    return ProbMaps(v)
