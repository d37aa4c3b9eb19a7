"""Deterministic truncated graph traversal for all-edge score computation."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import Graph, require_ergodic
from .scores import EdgeScores
from .spectral import SpectralBasis
from .truncation import TruncationTable, compute_truncation_table


@dataclass(eq=False)
class TraversalState:
    """State of one source's hop-by-hop walk-distribution propagation.

    ``current`` is the dense hop-``hop`` walk distribution from ``source``
    (non-negative, sums to 1). ``active`` lists its support while the
    traversal runs in sparse mode and is None once it has gone dense.
    ``frontier_degree_sum`` is the degree sum over the support, i.e. the
    cost of computing the next hop. ``g_acc`` accumulates, per neighbor of
    the source, the running difference of return and crossing probabilities
    scaled by the source degree; extended precision guards the potentially
    long addition chains.
    """

    source: int
    hop: int
    current: np.ndarray
    active: np.ndarray | None
    frontier_degree_sum: int
    g_acc: np.ndarray


def start_state(g: Graph, source: int) -> TraversalState:
    current = np.zeros(g.n)
    current[source] = 1.0
    g_acc = np.full(g.degrees[source], np.longdouble(g.inv_degrees[source]))
    return TraversalState(
        source=source,
        hop=0,
        current=current,
        active=np.array([source], dtype=np.int64),
        frontier_degree_sum=int(g.degrees[source]),
        g_acc=g_acc,
    )


def _scatter_sparse(
    g: Graph, values: np.ndarray, active: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    starts = g.indptr[active]
    counts = g.degrees[active]
    total = int(counts.sum())
    shift = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    targets = g.indices[shift + np.arange(total)]
    contrib = np.repeat(values[active] * g.inv_degrees[active], counts)
    return np.bincount(targets, weights=contrib, minlength=g.n), np.unique(targets)


def traverse_step(g: Graph, state: TraversalState) -> TraversalState:
    """Advance the distribution one hop and fold its increment into ``g_acc``.

    Each supported node sends an equal share of its mass to every neighbor,
    so total mass is conserved. Support is tracked explicitly while it stays
    under n/4; beyond that the step switches to a sparse-matrix product on
    the dense vector.
    """
    sparse_mode = state.active is not None and state.active.size < g.n // 4
    if sparse_mode:
        nxt, active = _scatter_sparse(g, state.current, state.active)
        frontier = int(g.degrees[active].sum())
    else:
        nxt = g.adjacency @ (state.current * g.inv_degrees)
        active = None
        frontier = int(g.degrees[nxt > 0].sum())
    src = state.source
    nbrs = g.neighbors(src)
    inc = nxt[src] * g.inv_degrees[src] - nxt[nbrs] * g.inv_degrees[nbrs]
    return TraversalState(
        source=src,
        hop=state.hop + 1,
        current=nxt,
        active=active,
        frontier_degree_sum=frontier,
        g_acc=state.g_acc + inc,
    )


def traversal_g_values(
    g: Graph, table: TruncationTable, source: int
) -> tuple[np.ndarray, TraversalState]:
    """Run the traversal from ``source`` for the largest incident truncation length.

    Returns the per-neighbor accumulated values (neighbor order) and the
    final state. Every incident edge is propagated to the shared maximum
    length, which can only tighten shorter edges' results.
    """
    taus = table.taus_for_source(g, source)
    depth = int(taus.max(initial=0))
    state = start_state(g, source)
    for _ in range(depth):
        state = traverse_step(g, state)
    return state.g_acc.astype(np.float64), state


def _fill_sources(
    g: Graph, table: TruncationTable, sources: np.ndarray, out: np.ndarray
) -> None:
    for src in sources:
        vals, _ = traversal_g_values(g, table, int(src))
        out[g.indptr[src]:g.indptr[src + 1]] = vals


def truncated_traversal_scores(
    g: Graph,
    basis: SpectralBasis,
    eps: float,
    threads: int = 1,
    table: TruncationTable | None = None,
) -> EdgeScores:
    """All-edge scores by per-source deterministic traversal.

    Deterministic: reruns produce bit-identical results regardless of
    ``threads`` (sources write disjoint slots, merged by addition). Each
    edge's result is within ``eps`` of the exact score; the traversal itself
    is exact, so truncation consumes the whole budget. Passing ``table``
    overrides the per-edge truncation lengths (used by equivalence tests).
    """
    require_ergodic(g)
    if table is None:
        table = compute_truncation_table(g, basis, eps)
    g_directed = np.zeros(2 * g.m)
    sources = np.arange(g.n)
    if threads > 1:
        chunks = np.array_split(sources, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda c: _fill_sources(g, table, c, g_directed), chunks))
    else:
        _fill_sources(g, table, sources, g_directed)
    values = np.bincount(g.arc_edge_id, weights=g_directed, minlength=g.m)
    return EdgeScores(graph=g, values=values)
