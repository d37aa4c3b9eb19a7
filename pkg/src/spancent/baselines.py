"""Baseline estimators: spanning-tree sampling and plain truncated walk counting."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .graph import Graph, require_ergodic
from .scores import EdgeScores
from .spectral import SpectralBasis
from .truncation import compute_truncation_table

WALK_CAP = 100_000_000


@dataclass(frozen=True)
class SpanningTree:
    """Edge set of one spanning tree, as canonical (u, v) rows with u < v."""

    edges: np.ndarray


@numba.njit(cache=True)
def _wilson_parents(indptr, indices, degrees, root, seed):  # pragma: no cover
    np.random.seed(seed)
    n = degrees.size
    parent = np.full(n, -1, np.int64)
    in_tree = np.zeros(n, np.bool_)
    succ = np.full(n, -1, np.int64)
    in_tree[root] = True
    for start in range(n):
        u = start
        while not in_tree[u]:
            succ[u] = indices[indptr[u] + np.random.randint(0, degrees[u])]
            u = succ[u]
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            parent[u] = succ[u]
            u = succ[u]
    return parent


def _parents_to_edge_ids(g: Graph, parent: np.ndarray, root: int) -> np.ndarray:
    child = np.concatenate([np.arange(root), np.arange(root + 1, g.n)])
    par = parent[child]
    if (par < 0).any():
        raise AssertionError("walk sampler left a node unattached")
    keys = np.minimum(child, par) * g.n + np.maximum(child, par)
    ids = np.searchsorted(g._edge_keys, keys)
    if (ids >= g.m).any() or (g._edge_keys[ids] != keys).any():
        raise AssertionError("sampled tree used a non-edge")
    return ids


def wilson_spanning_tree(g: Graph, root: int, rng: np.random.Generator) -> SpanningTree:
    """Draw a uniformly random spanning tree by loop-erased random walks.

    Nodes are attached in id order: from each detached node, walk until
    hitting the tree, erase loops by keeping only the last exit from every
    node, and graft the remaining path. The resulting distribution does not
    depend on the root.
    """
    seed = int(rng.integers(0, 2**32))
    parent = _wilson_parents(g.indptr, g.indices, g.degrees, root, seed)
    ids = _parents_to_edge_ids(g, parent, root)
    return SpanningTree(edges=np.column_stack([g.edge_u[ids], g.edge_v[ids]]))


def tree_edge_counts(
    g: Graph, n_trees: int, seed: int, root: int = 0, threads: int = 1
) -> np.ndarray:
    """Edge appearance counts over ``n_trees`` independent spanning trees."""
    tree_seeds = np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint32)

    def run(chunk: np.ndarray) -> np.ndarray:
        counts = np.zeros(g.m, dtype=np.int64)
        for s in chunk:
            parent = _wilson_parents(g.indptr, g.indices, g.degrees, root, int(s))
            counts += np.bincount(_parents_to_edge_ids(g, parent, root), minlength=g.m)
        return counts

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(run, np.array_split(tree_seeds, threads * 4))
        return sum(parts, np.zeros(g.m, dtype=np.int64))
    return run(tree_seeds)


def spanning_tree_count(eps: float, delta: float, m: int) -> int:
    """Trees needed for per-edge accuracy ``eps`` w.p. 1 - delta (union bound)."""
    if not 0.0 < eps < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("eps and delta must lie in (0, 1)")
    return math.ceil(math.log(2.0 * m / delta) / (2.0 * eps * eps))


def spanning_tree_scores(
    g: Graph, eps: float, delta: float, seed: int, threads: int = 1
) -> EdgeScores:
    """Estimate each edge's score as its appearance fraction over sampled trees."""
    n_trees = spanning_tree_count(eps, delta, g.m)
    counts = tree_edge_counts(g, n_trees, seed, threads=threads)
    return EdgeScores(graph=g, values=counts / n_trees)


def monte_carlo_walk_count(
    tau: int, d_source: int, d_min_neighbor: int, eps: float, delta: float, m: int
) -> int:
    """Walks per source so each incident edge's estimate misses by at most eps/2.

    Each walk contributes, per hop, an indicator scaled by 1/d(source) minus
    one scaled by 1/d(neighbor), so its total range width is at most
    ``(tau + 1) * (1/d(source) + 1/d(neighbor))``. Two-sided Hoeffding at
    failure level ``delta / (2m)`` per edge half and deviation ``eps / 4``
    gives ``ceil(8 (tau+1)^2 (1/ds + 1/dn)^2 ln(4m / delta) / eps^2)``,
    maximized over incident edges through the smallest neighbor degree.
    """
    width = (tau + 1.0) * (1.0 / d_source + 1.0 / d_min_neighbor)
    raw = 8.0 * width * width * math.log(4.0 * m / delta) / (eps * eps)
    count = math.ceil(raw)
    if count > WALK_CAP:
        warnings.warn(
            f"walk count {count:.3e} capped at {WALK_CAP:.0e}", stacklevel=2
        )
        count = WALK_CAP
    return count


def monte_carlo_scores(
    g: Graph, basis: SpectralBasis, eps: float, delta: float, seed: int
) -> EdgeScores:
    """Truncated-walk baseline: per-source hop occupancies assembled into scores.

    From each node, walks of the largest incident truncated length estimate
    the hop distributions; detailed balance turns them into the per-edge
    halves that sum to the score. Deterministic for a fixed seed.
    """
    require_ergodic(g)
    table = compute_truncation_table(g, basis, eps / 2.0)
    g_directed = np.zeros(2 * g.m)
    inv_d = g.inv_degrees
    for source in range(g.n):
        lo, hi = int(g.indptr[source]), int(g.indptr[source + 1])
        nbrs = g.indices[lo:hi]
        tau = int(table.taus[g.arc_edge_id[lo:hi]].max())
        n_w = monte_carlo_walk_count(
            tau, int(g.degrees[source]), int(g.degrees[nbrs].min()), eps, delta, g.m
        )
        rng = np.random.default_rng((seed, source))
        pos = np.full(n_w, source, dtype=np.int64)
        acc = np.full(nbrs.size, np.longdouble(inv_d[source]))
        for _ in range(tau):
            step = rng.integers(0, g.degrees[pos])
            pos = g.indices[g.indptr[pos] + step]
            occ = np.bincount(pos, minlength=g.n)
            acc = acc + (occ[source] * inv_d[source] - occ[nbrs] * inv_d[nbrs]) / n_w
        g_directed[lo:hi] = acc.astype(np.float64)
    values = np.bincount(g.arc_edge_id, weights=g_directed, minlength=g.m)
    return EdgeScores(graph=g, values=values)
