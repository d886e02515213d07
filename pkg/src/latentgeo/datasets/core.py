from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from ..ndkernel import derive_seed, make_rng

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class ImageSequence:
    """Renderings of one object; ``times`` are rotation angles in degrees (ascending)."""

    object_id: int
    style_seed: int
    times: np.ndarray
    samples: np.ndarray  # (n, H, W) in [-1, 1]

    def subset(self, idx) -> "ImageSequence":
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        return replace(self, times=self.times[idx], samples=self.samples[idx])


@dataclass
class GraphSequence:
    """Snapshots ``A_t`` of a growing directed citation graph.

    ``edges`` rows are ``(src, dst, t_birth)``: paper ``src`` cites ``dst``
    from time ``t_birth`` on.
    """

    object_id: int
    n_nodes: int
    times: np.ndarray
    samples: np.ndarray  # (T, N, N) in {0, 1}
    edges: np.ndarray
    birth: np.ndarray

    def subset(self, idx) -> "GraphSequence":
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        return replace(self, times=self.times[idx], samples=self.samples[idx])


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test proportions, applied per sequence."""

    train: float = 0.5
    val: float = 0.25
    test: float = 0.25

    def counts(self, n: int) -> tuple[int, int, int]:
        if min(self.train, self.val, self.test) < 0 or not math.isclose(self.train + self.val + self.test, 1.0):
            raise ValueError(f"split proportions must be non-negative and sum to 1, got {self}")
        n_train = int(math.floor(n * self.train + 0.5))
        n_val = int(math.floor(n * self.val))
        n_test = n - n_train - n_val
        if n_test < 0:
            raise ValueError(f"split {self} does not fit {n} samples")
        return n_train, n_val, n_test


@dataclass
class Dataset:
    kind: str  # "image" or "graph"
    sequences: list
    splits: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def view(self, name: str) -> "Dataset":
        if name == "all":
            return self
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        if not self.splits:
            raise ValueError("dataset has no split assignment")
        seqs = [s.subset(self.splits[s.object_id][name]) for s in self.sequences]
        return Dataset(self.kind, seqs, {}, dict(self.meta, view=name))

    def stacked(self) -> np.ndarray:
        return np.concatenate([s.samples for s in self.sequences], axis=0)

    @property
    def n_samples(self) -> int:
        return sum(len(s.times) for s in self.sequences)

    def sequence(self, object_id: int):
        for s in self.sequences:
            if s.object_id == object_id:
                return s
        raise KeyError(object_id)


def assign_splits(dataset: Dataset, spec: SplitSpec = SplitSpec(), seed: int = 0) -> dict:
    """Random disjoint covering partition of each sequence's sample indices."""
    out = {}
    for s in dataset.sequences:
        n = len(s.times)
        n_train, n_val, _ = spec.counts(n)
        perm = make_rng(derive_seed(seed, s.object_id, 17)).permutation(n)
        out[s.object_id] = {
            "train": np.sort(perm[:n_train]),
            "val": np.sort(perm[n_train : n_train + n_val]),
            "test": np.sort(perm[n_train + n_val :]),
        }
    return out


def split(dataset: Dataset, spec: SplitSpec = SplitSpec(), seed: int = 0) -> dict[str, Dataset]:
    """Assign a fresh seeded split and return the three views."""
    ds = Dataset(dataset.kind, dataset.sequences, assign_splits(dataset, spec, seed), dataset.meta)
    return {name: ds.view(name) for name in SPLIT_NAMES}


@dataclass(frozen=True)
class Triplet:
    """Three samples of one sequence with ``t1 < t2 < t3``."""

    object_id: int
    indices: tuple[int, int, int]
    times: tuple[float, float, float]
    xs: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False, compare=False)


def make_triplet(seq, i: int, j: int, k: int) -> Triplet:
    i, j, k = sorted((int(i), int(j), int(k)), key=lambda a: seq.times[a])
    t = (float(seq.times[i]), float(seq.times[j]), float(seq.times[k]))
    if not (t[0] < t[1] < t[2]):
        raise ValueError(f"triplet times not strictly ordered: {t}")
    return Triplet(seq.object_id, (i, j, k), t, (seq.samples[i], seq.samples[j], seq.samples[k]))


def enumerate_triplets(dataset: Dataset) -> list[tuple[int, int, int, int]]:
    """All ``(sequence position, i, j, k)`` with ``i < j < k`` inside one sequence."""
    out = []
    for pos, s in enumerate(dataset.sequences):
        out.extend((pos, i, j, k) for i, j, k in combinations(range(len(s.times)), 3))
    return out
