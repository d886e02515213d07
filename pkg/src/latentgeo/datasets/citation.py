"""Synthetic growing citation graph around a single most-cited core paper."""

from __future__ import annotations

import numpy as np

from ..ndkernel import derive_seed, make_rng
from .core import Dataset, GraphSequence, SplitSpec, assign_splits


def birth_times(n_nodes: int, n_stamps: int) -> np.ndarray:
    """Node ``i`` appears at stamp ``1 + floor(i * T / N)``: arrivals spread evenly over [1, T]."""
    return 1 + (np.arange(n_nodes) * n_stamps) // n_nodes


def grow_citations(
    n_nodes: int,
    n_stamps: int,
    rng: np.random.Generator,
    attach_exponent: float = 1.0,
    mean_extra: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Edges ``(src, dst, t_birth)`` and per-node birth stamps.

    Node 0 is the core. Each later node cites the core plus ``1 + Poisson(mean_extra)``
    distinct earlier nodes drawn with probability proportional to
    ``(in_degree + 1) ** attach_exponent``.
    """
    birth = birth_times(n_nodes, n_stamps)
    indeg = np.zeros(n_nodes)
    edges = []
    for i in range(1, n_nodes):
        edges.append((i, 0, birth[i]))
        indeg[0] += 1
        pool = np.arange(1, i)
        k = min(1 + int(rng.poisson(mean_extra)), pool.size)
        if k == 0:
            continue
        w = (indeg[pool] + 1.0) ** attach_exponent
        targets = rng.choice(pool, size=k, replace=False, p=w / w.sum())
        for j in np.sort(targets):
            edges.append((i, int(j), birth[i]))
            indeg[j] += 1
    return np.asarray(edges, dtype=np.int64).reshape(-1, 3), birth


def snapshots(edges: np.ndarray, n_nodes: int, times: np.ndarray) -> np.ndarray:
    out = np.zeros((len(times), n_nodes, n_nodes))
    for k, t in enumerate(times):
        live = edges[edges[:, 2] <= t]
        out[k, live[:, 0], live[:, 1]] = 1.0
    return out


def graph_sequence(edges: np.ndarray, birth: np.ndarray, n_nodes: int, n_stamps: int) -> GraphSequence:
    times = np.arange(1, n_stamps + 1, dtype=np.float64)
    return GraphSequence(0, n_nodes, times, snapshots(edges, n_nodes, times), edges, birth)


def generate_citation_graph(
    n_nodes: int = 120,
    n_stamps: int = 50,
    master_seed: int = 0,
    attach_exponent: float = 1.0,
    split_spec: SplitSpec = SplitSpec(),
) -> Dataset:
    if n_nodes < 10 or n_stamps < 9:
        raise ValueError("need n_nodes >= 10 and n_stamps >= 9")
    rng = make_rng(derive_seed(master_seed, 0, 2))
    edges, birth = grow_citations(n_nodes, n_stamps, rng, attach_exponent)
    ds = Dataset(
        "graph",
        [graph_sequence(edges, birth, n_nodes, n_stamps)],
        meta={
            "generator": "citation",
            "master_seed": master_seed,
            "n_nodes": n_nodes,
            "n_stamps": n_stamps,
            "attach_exponent": attach_exponent,
        },
    )
    ds.splits = assign_splits(ds, split_spec, master_seed)
    return ds
