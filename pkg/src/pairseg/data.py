"""Response records: tested pairs, per-block responses, aggregated same-rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .grid import GridSpec


def canonical_pair(i: int, j: int) -> tuple[int, int]:
    """Unordered pair as (min, max)."""
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class PairSet:
    """Distinct unordered cell-index pairs, canonicalized smaller-first."""

    pairs: np.ndarray  # (m, 2) int64, pairs[:, 0] < pairs[:, 1]

    def __post_init__(self):
        arr = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        if np.any(lo == hi):
            raise ContractViolation("pair set contains an identical-point pair")
        canon = np.stack([lo, hi], axis=1)
        keys = {(int(a), int(b)) for a, b in canon}
        if len(keys) != len(canon):
            raise ContractViolation("pair set contains duplicate unordered pairs")
        canon.setflags(write=False)
        object.__setattr__(self, "pairs", canon)

    def __len__(self) -> int:
        return len(self.pairs)

    def cells(self) -> np.ndarray:
        return np.unique(self.pairs)

    @classmethod
    def unchecked(cls, pairs) -> "PairSet":
        """Bypass invariants (for ingesting files that still need diagnosis)."""
        obj = object.__new__(cls)
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2).copy()
        arr.setflags(write=False)
        object.__setattr__(obj, "pairs", arr)
        return obj


@dataclass(frozen=True)
class Block:
    """One pass through a pair set with its aligned binary responses."""

    pair_set: PairSet
    responses: np.ndarray  # (m,) of {0, 1}

    def __post_init__(self):
        r = np.asarray(self.responses, dtype=np.int64)
        if r.ndim != 1 or len(r) != len(self.pair_set):
            raise ContractViolation(
                f"responses length {r.shape} does not match pair count {len(self.pair_set)}"
            )
        if not np.isin(r, (0, 1)).all():
            raise ContractViolation("responses must be 0 or 1")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "responses", r)

    @classmethod
    def unchecked(cls, pair_set: PairSet, responses) -> "Block":
        obj = object.__new__(cls)
        r = np.asarray(responses, dtype=np.int64).copy()
        r.setflags(write=False)
        object.__setattr__(obj, "pair_set", pair_set)
        object.__setattr__(obj, "responses", r)
        return obj


@dataclass(frozen=True)
class ResponseDataset:
    """Blocks of same/different judgments for one image on one grid."""

    blocks: tuple[Block, ...]
    grid: GridSpec
    image_id: str = ""
    k_instructed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.k_instructed is not None and self.k_instructed < 1:
            raise ContractViolation("k_instructed must be positive when given")

    @property
    def n_trials(self) -> int:
        return sum(len(b.pair_set) for b in self.blocks)


@dataclass(frozen=True)
class AggregatedCounts:
    """Per unordered pair: empirical same-rate and number of observations."""

    entries: dict[tuple[int, int], tuple[float, int]] = field(default_factory=dict)

    def __post_init__(self):
        for pair, (k_rate, n_obs) in self.entries.items():
            if pair[0] >= pair[1]:
                raise ContractViolation(f"pair {pair} is not canonical (i < j)")
            if n_obs < 1:
                raise ContractViolation(f"pair {pair}: n_obs must be positive")
            if not 0.0 <= k_rate <= 1.0:
                raise ContractViolation(f"pair {pair}: k_rate outside [0, 1]")
            if abs(k_rate * n_obs - round(k_rate * n_obs)) > 1e-9:
                raise ContractViolation(
                    f"pair {pair}: k_rate*n_obs = {k_rate * n_obs} is not a count"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, k_rate, n_obs) arrays in sorted pair order."""
        items = sorted(self.entries.items())
        if not items:
            z = np.zeros(0)
            return z.astype(np.int64), z.astype(np.int64), z, z
        ii = np.array([p[0] for p, _ in items], dtype=np.int64)
        jj = np.array([p[1] for p, _ in items], dtype=np.int64)
        kr = np.array([v[0] for _, v in items], dtype=np.float64)
        no = np.array([v[1] for _, v in items], dtype=np.float64)
        return ii, jj, kr, no


def aggregate_responses(d: ResponseDataset) -> AggregatedCounts:
    """Pool responses across blocks into per-pair same-rates.

    A pair and its reversal count as the same entry; an empty dataset gives
    an empty aggregate.
    """
    sums: dict[tuple[int, int], int] = {}
    counts: dict[tuple[int, int], int] = {}
    for block in d.blocks:
        for (i, j), r in zip(block.pair_set.pairs, block.responses):
            key = canonical_pair(int(i), int(j))
            sums[key] = sums.get(key, 0) + int(r)
            counts[key] = counts.get(key, 0) + 1
    entries = {key: (sums[key] / counts[key], counts[key]) for key in sums}
    return AggregatedCounts(entries=entries)


@dataclass(frozen=True)
class Violation:
    """One well-formedness problem found in a dataset."""

    kind: str  # "identical_pair" | "out_of_grid" | "length_mismatch"
    block: int | None
    detail: str

    def __str__(self) -> str:
        where = f"block {self.block}: " if self.block is not None else ""
        return f"{self.kind}: {where}{self.detail}"


def validate_dataset(d: ResponseDataset) -> list[Violation]:
    """Diagnostics: identical-point pairs, out-of-grid indices, length mismatches.

    Returns an empty list iff the dataset is well-formed. Never raises; this
    is the checking counterpart of the constructors, for ingested files.
    """
    out: list[Violation] = []
    n_cells = d.grid.n_cells
    for b_idx, block in enumerate(d.blocks):
        pairs = np.asarray(block.pair_set.pairs)
        if len(block.responses) != len(pairs):
            out.append(
                Violation(
                    "length_mismatch",
                    b_idx,
                    f"{len(block.responses)} responses for {len(pairs)} pairs",
                )
            )
        for idx, (i, j) in enumerate(pairs):
            if i == j:
                out.append(
                    Violation("identical_pair", b_idx, f"trial {idx} pairs cell {i} with itself")
                )
            for c in (i, j):
                if not 0 <= c < n_cells:
                    out.append(
                        Violation(
                            "out_of_grid",
                            b_idx,
                            f"trial {idx} references cell {c} outside 0..{n_cells - 1}",
                        )
                    )
    return out
