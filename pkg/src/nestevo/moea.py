"""Generic NSGA-II machinery over objective vectors with per-coordinate directions.

Pareto dominance, fast non-dominated sorting, crowding distance, survivor and
tournament selection, and an elitist non-dominated archive.  Everything here is
pure and deterministic: the same inputs (and RNG stream) always produce the
same outputs, so search runs are reproducible bit for bit.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .genome import VariationParams


class Direction(enum.Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


@dataclass(frozen=True)
class ObjectiveVector:
    """Fixed-length real vector, each coordinate tagged Maximize or Minimize."""

    values: tuple[float, ...]
    directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.directions):
            raise ValueError(
                f"objective vector has {len(self.values)} values but "
                f"{len(self.directions)} directions"
            )
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"objective value {v!r} is not finite")

    def __len__(self) -> int:
        return len(self.values)

    def normalized(self) -> tuple[float, ...]:
        """Values flipped so every coordinate is maximized."""
        return tuple(
            v if d is Direction.MAXIMIZE else -v
            for v, d in zip(self.values, self.directions)
        )


def _check_comparable(a: ObjectiveVector, b: ObjectiveVector) -> None:
    if len(a.values) != len(b.values) or a.directions != b.directions:
        raise ValueError("objective vectors have mismatched shape or directions")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """True iff a is at least as good as b everywhere and strictly better somewhere."""
    _check_comparable(a, b)
    better = False
    for va, vb, d in zip(a.values, b.values, a.directions):
        if d is Direction.MINIMIZE:
            va, vb = -va, -vb
        if va < vb:
            return False
        if va > vb:
            better = True
    return better


def _normalized_matrix(pop: Sequence[ObjectiveVector]) -> np.ndarray:
    if not pop:
        raise ValueError("population is empty")
    directions = pop[0].directions
    for v in pop:
        if v.directions != directions or len(v) != len(directions):
            raise ValueError("population contains heterogeneous objective vectors")
    return np.asarray([v.normalized() for v in pop], dtype=float)


def fast_nondominated_sort(pop: Sequence[ObjectiveVector]) -> list[list[int]]:
    """Partition indices into fronts: front 0 is the non-dominated set, each
    later front the non-dominated set of the remainder (Deb's procedure).

    The pairwise dominance matrix is vectorized; the peeling itself is the
    standard domination-count bookkeeping, so results are independent of
    evaluation order.
    """
    mat = _normalized_matrix(pop)
    ge = (mat[:, None, :] >= mat[None, :, :]).all(axis=-1)
    gt = (mat[:, None, :] > mat[None, :, :]).any(axis=-1)
    dom = ge & gt  # dom[i, j]: i dominates j

    n_dominators = dom.sum(axis=0)
    fronts: list[list[int]] = []
    remaining = n_dominators.copy()
    assigned = np.zeros(len(pop), dtype=bool)
    while not assigned.all():
        current = [i for i in range(len(pop)) if not assigned[i] and remaining[i] == 0]
        for i in current:
            assigned[i] = True
        for i in current:
            remaining -= dom[i]
        fronts.append(current)
    return fronts


def nondominated_mask(pop: Sequence[ObjectiveVector]) -> list[bool]:
    """Per-member flag: True iff no other member dominates it.

    Processed in column blocks so archives tens of thousands strong stay
    within a bounded comparison-tensor footprint."""
    mat = _normalized_matrix(pop)
    n, m = mat.shape
    dominated = np.zeros(n, dtype=bool)
    block = max(1, 30_000_000 // max(1, n * m))
    for start in range(0, n, block):
        sub = mat[start:start + block]
        ge = (mat[:, None, :] >= sub[None, :, :]).all(axis=-1)
        gt = (mat[:, None, :] > sub[None, :, :]).any(axis=-1)
        dominated[start:start + block] = (ge & gt).any(axis=0)
    return [bool(not d) for d in dominated]


def crowding_distance(front: Sequence[ObjectiveVector]) -> list[float]:
    """NSGA-II diversity score for one front.

    Boundary members get +inf per objective; interior members accumulate the
    normalized cuboid side length.  A degenerate objective (max == min)
    contributes nothing.  Callers are expected to pass a mutually
    non-dominating front; this is not enforced.
    """
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    _normalized_matrix(front)  # shape validation only
    dist = [0.0] * n
    m = len(front[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: (front[i].values[k], i))
        lo, hi = front[order[0]].values[k], front[order[-1]].values[k]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = hi - lo
        if span == 0:
            continue
        for j in range(1, n - 1):
            i = order[j]
            if dist[i] != math.inf:
                prev_v = front[order[j - 1]].values[k]
                next_v = front[order[j + 1]].values[k]
                dist[i] += (next_v - prev_v) / span
    return dist


@dataclass(frozen=True)
class RankedPopulation:
    """Population annotated with non-domination rank and crowding distance."""

    ids: tuple[int, ...]
    vectors: tuple[ObjectiveVector, ...]
    ranks: tuple[int, ...]
    crowding: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, keep_ids: Sequence[int]) -> "RankedPopulation":
        """Restriction to `keep_ids`, preserving the original ranks/crowding."""
        keep = set(keep_ids)
        sel = [i for i, cid in enumerate(self.ids) if cid in keep]
        return RankedPopulation(
            ids=tuple(self.ids[i] for i in sel),
            vectors=tuple(self.vectors[i] for i in sel),
            ranks=tuple(self.ranks[i] for i in sel),
            crowding=tuple(self.crowding[i] for i in sel),
        )


def rank_population(
    ids: Sequence[int], vectors: Sequence[ObjectiveVector]
) -> RankedPopulation:
    """Sort into fronts and crowd each front."""
    if len(ids) != len(vectors):
        raise ValueError("ids and vectors differ in length")
    fronts = fast_nondominated_sort(vectors)
    ranks = [0] * len(ids)
    crowd = [0.0] * len(ids)
    for r, front in enumerate(fronts):
        for i in front:
            ranks[i] = r
        dists = crowding_distance([vectors[i] for i in front])
        for i, d in zip(front, dists):
            crowd[i] = d
    return RankedPopulation(tuple(ids), tuple(vectors), tuple(ranks), tuple(crowd))


def _selection_key(ranked: RankedPopulation, i: int) -> tuple[int, float, int]:
    # Lower is better: rank ascending, crowding descending, id ascending.
    return (ranked.ranks[i], -ranked.crowding[i], ranked.ids[i])


def survivor_select(ranked: RankedPopulation, k: int) -> list[int]:
    """Take whole fronts in rank order, splitting the last one by descending
    crowding distance; residual ties fall back to the lowest candidate id."""
    if k > len(ranked):
        raise ValueError(f"cannot select {k} from population of {len(ranked)}")
    order = sorted(range(len(ranked)), key=lambda i: _selection_key(ranked, i))
    return [ranked.ids[i] for i in order[:k]]


def tournament_select(
    ranked: RankedPopulation, params: VariationParams, rng: random.Random
) -> int:
    """Draw `tournament_size` members uniformly (with replacement); the winner
    is the lexicographic best by (rank asc, crowding desc, id asc)."""
    if len(ranked) == 0:
        raise ValueError("cannot run a tournament on an empty population")
    draws = [rng.randrange(len(ranked)) for _ in range(params.tournament_size)]
    best = min(draws, key=lambda i: _selection_key(ranked, i))
    return ranked.ids[best]


@dataclass(frozen=True)
class ArchiveEntry:
    key: Any
    payload: Any
    vector: ObjectiveVector


class ParetoArchive:
    """Elitist accumulation of mutually non-dominated candidates.

    Entries are kept in insertion order (deterministic across runs).  A new
    entry is dropped if an existing entry dominates it or carries the same key;
    otherwise it displaces every entry it dominates.  Entries with equal
    vectors but distinct keys are all retained.
    """

    def __init__(self) -> None:
        self._entries: list[ArchiveEntry] = []
        self._keys: set[Any] = set()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[ArchiveEntry, ...]:
        return tuple(self._entries)

    def vectors(self) -> list[ObjectiveVector]:
        return [e.vector for e in self._entries]

    def add(self, key: Any, payload: Any, vector: ObjectiveVector) -> bool:
        if key in self._keys:
            return False
        for e in self._entries:
            if dominates(e.vector, vector):
                return False
        kept = [e for e in self._entries if not dominates(vector, e.vector)]
        removed = {e.key for e in self._entries} - {e.key for e in kept}
        self._keys -= removed
        self._entries = kept
        self._entries.append(ArchiveEntry(key, payload, vector))
        self._keys.add(key)
        return True

    def add_many(self, items: Sequence[tuple[Any, Any, ObjectiveVector]]) -> int:
        added = 0
        for key, payload, vector in items:
            if self.add(key, payload, vector):
                added += 1
        return added

    def merge_batch(self, items: Sequence[tuple[Any, Any, ObjectiveVector]]) -> None:
        """Bulk-merge new candidates, then prune the union to its
        non-dominated subset in one vectorized pass.  Equivalent to repeated
        add(); existing entries win key collisions."""
        fresh: list[ArchiveEntry] = []
        seen = set(self._keys)
        for key, payload, vector in items:
            if key in seen:
                continue
            seen.add(key)
            fresh.append(ArchiveEntry(key, payload, vector))
        if not fresh:
            return
        combined = self._entries + fresh
        mask = nondominated_mask([e.vector for e in combined])
        self._entries = [e for e, keep in zip(combined, mask) if keep]
        self._keys = {e.key for e in self._entries}

    def is_mutually_nondominated(self) -> bool:
        vs = self.vectors()
        return not any(
            dominates(a, b) for i, a in enumerate(vs) for j, b in enumerate(vs) if i != j
        )
