"""Undirected simple graphs: compressed adjacency, ingestion, validation, generators."""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np
import scipy.sparse as sp

Source = Union[str, Path, IO[str], IO[bytes], bytes]


class EdgeListError(ValueError):
    """Malformed edge-list input; the message carries the 1-based line number."""


class GraphStructureError(ValueError):
    """Structural precondition violated (empty input, infeasible size, non-ergodic graph)."""


@dataclass(eq=False)
class Graph:
    """Undirected simple graph in compressed sparse adjacency form.

    Nodes carry compact internal ids 0..n-1; ``labels[i]`` is the original
    label of node i (identity for generated graphs). Neighbor lists are
    sorted ascending. Edges are enumerated once in canonical order:
    ``(edge_u[k], edge_v[k])`` with ``edge_u[k] < edge_v[k]``, sorted
    lexicographically, and ``arc_edge_id[a]`` maps the a-th directed
    adjacency entry back to its canonical edge index.

    Instances are immutable after construction and safe to read from any
    number of threads.
    """

    n: int
    m: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    arc_edge_id: np.ndarray
    labels: np.ndarray

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        # canonical edges are sorted by this packed key
        return self.edge_u * self.n + self.edge_v

    @cached_property
    def inv_degrees(self) -> np.ndarray:
        return 1.0 / self.degrees

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def edge_id(self, u: int, v: int) -> int:
        a, b = (u, v) if u < v else (v, u)
        key = a * self.n + b
        k = int(np.searchsorted(self._edge_keys, key))
        if k >= self.m or self._edge_keys[k] != key:
            raise KeyError(f"({u}, {v}) is not an edge")
        return k

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        a, b = (u, v) if u < v else (v, u)
        key = a * self.n + b
        k = np.searchsorted(self._edge_keys, key)
        return k < self.m and self._edge_keys[k] == key

    @classmethod
    def from_edges(cls, pairs: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from (label, label) pairs, dropping loops and duplicates."""
        arr = np.asarray(list(pairs), dtype=np.int64)
        if arr.size == 0:
            raise GraphStructureError("empty graph: no edges given")
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise EdgeListError("edge pairs must be (u, v) tuples")
        if arr.min() < 0:
            raise EdgeListError("node labels must be non-negative")
        return _from_label_pairs(arr[:, 0], arr[:, 1])


def _from_label_pairs(a: np.ndarray, b: np.ndarray) -> Graph:
    keep = a != b
    n_loops = int(a.size - keep.sum())
    a, b = a[keep], b[keep]
    if a.size == 0:
        raise GraphStructureError("empty graph: every line was a self-loop")
    labels, flat = np.unique(np.concatenate([a, b]), return_inverse=True)
    u_raw, v_raw = flat[:a.size], flat[a.size:]
    n = labels.size
    keys = np.unique(np.minimum(u_raw, v_raw) * n + np.maximum(u_raw, v_raw))
    n_dupes = int(u_raw.size - keys.size)
    if n_loops or n_dupes:
        warnings.warn(
            f"dropped {n_loops} self-loop(s) and {n_dupes} duplicate edge(s)",
            stacklevel=3,
        )
    return _from_canonical_keys(n, keys, labels)


def _from_canonical_keys(n: int, keys: np.ndarray, labels: np.ndarray) -> Graph:
    """Assemble the CSR structure from packed, sorted, unique edge keys."""
    edge_u, edge_v = keys // n, keys % n
    m = keys.size
    src = np.concatenate([edge_u, edge_v])
    dst = np.concatenate([edge_v, edge_u])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    degrees = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    arc_keys = np.minimum(src, dst) * n + np.maximum(src, dst)
    arc_edge_id = np.searchsorted(keys, arc_keys)
    return Graph(
        n=n,
        m=m,
        indptr=indptr,
        indices=dst,
        degrees=degrees.astype(np.int64),
        edge_u=edge_u,
        edge_v=edge_v,
        arc_edge_id=arc_edge_id,
        labels=labels,
    )


def _text_lines(source: Source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
        return
    if isinstance(source, bytes):
        yield from io.StringIO(source.decode("utf-8"))
        return
    first = source.read(0)
    if isinstance(first, bytes):
        yield from io.TextIOWrapper(source, encoding="utf-8")
    else:
        yield from source


def load_edge_list(source: Source) -> Graph:
    """Parse a whitespace-separated edge list into a :class:`Graph`.

    Lines starting with ``#`` are comments and blank lines are skipped.
    Data lines hold exactly two non-negative integer labels. Self-loops and
    duplicate edges are dropped with a counted warning; labels are compacted
    to 0..n-1 with the original values kept in ``labels``.
    """
    heads: list[int] = []
    tails: list[int] = []
    for lineno, raw in enumerate(_text_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected two labels, got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer label in {line!r}") from None
        if a < 0 or b < 0:
            raise EdgeListError(f"line {lineno}: negative label in {line!r}")
        heads.append(a)
        tails.append(b)
    if not heads:
        raise GraphStructureError("empty graph: no data lines in input")
    return _from_label_pairs(np.asarray(heads, np.int64), np.asarray(tails, np.int64))


def save_edge_list(g: Graph, target: Union[str, Path, IO[str]]) -> None:
    """Write one ``u v`` line per canonical edge, using original labels."""
    lu, lv = g.labels[g.edge_u], g.labels[g.edge_v]
    body = "\n".join(f"{a} {b}" for a, b in zip(lu, lv))
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(body + "\n")
    else:
        target.write(body + "\n")


def _gather_neighbors(g: Graph, nodes: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of ``nodes`` (with multiplicity)."""
    starts = g.indptr[nodes]
    counts = g.degrees[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=g.indices.dtype)
    shift = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    return g.indices[shift + np.arange(total)]


def bfs_levels(g: Graph, root: int = 0) -> np.ndarray:
    """BFS distance from ``root``; unreachable nodes get -1."""
    level = np.full(g.n, -1, dtype=np.int64)
    level[root] = 0
    frontier = np.array([root], dtype=np.int64)
    depth = 0
    while frontier.size:
        nbrs = np.unique(_gather_neighbors(g, frontier))
        frontier = nbrs[level[nbrs] < 0]
        depth += 1
        level[frontier] = depth
    return level


@dataclass(frozen=True)
class ErgodicityReport:
    ok: bool
    reason: str | None = None


def validate_ergodic(g: Graph) -> ErgodicityReport:
    """Random walks on ``g`` converge iff it is connected and not bipartite."""
    level = bfs_levels(g)
    if (level < 0).any():
        return ErgodicityReport(False, "disconnected")
    parity = level & 1
    if not (parity[g.edge_u] == parity[g.edge_v]).any():
        # 2-coloring by BFS parity succeeded for every edge
        return ErgodicityReport(False, "bipartite")
    return ErgodicityReport(True)


def require_ergodic(g: Graph) -> None:
    report = validate_ergodic(g)
    if not report.ok:
        raise GraphStructureError(f"graph is not ergodic: {report.reason}")


def generate_erdos_renyi(n: int, m: int, seed: int) -> Graph:
    """Sample ``m`` distinct node pairs uniformly (fixed-edge-count model).

    Deterministic for a fixed seed. The result is not necessarily connected
    or non-bipartite; callers should re-validate and retry with ``seed + 1``
    (see :func:`generate_ergodic_erdos_renyi`).
    """
    if n < 2:
        raise GraphStructureError("need at least two nodes")
    total = n * (n - 1) // 2
    if not 0 < m <= total:
        raise GraphStructureError(f"m={m} infeasible for n={n} (max {total})")
    rng = np.random.default_rng(seed)
    kept = np.empty(0, dtype=np.int64)
    while kept.size < m:
        batch = 2 * (m - kept.size) + 16
        a = rng.integers(0, n, size=batch)
        b = rng.integers(0, n, size=batch)
        ok = a != b
        new = np.minimum(a[ok], b[ok]) * n + np.maximum(a[ok], b[ok])
        pool = np.concatenate([kept, new])
        _, first = np.unique(pool, return_index=True)
        kept = pool[np.sort(first)]  # first-occurrence order keeps the sample uniform
    keys = np.sort(kept[:m])
    return _from_canonical_keys(n, keys, np.arange(n, dtype=np.int64))


def generate_ergodic_erdos_renyi(
    n: int, m: int, seed: int, max_retries: int = 64
) -> tuple[Graph, int]:
    """Retry :func:`generate_erdos_renyi` with seed+1 until the graph is ergodic.

    Returns the graph and the seed that produced it.
    """
    for k in range(max_retries):
        g = generate_erdos_renyi(n, m, seed + k)
        if validate_ergodic(g).ok:
            return g, seed + k
    raise GraphStructureError(
        f"no ergodic graph with n={n}, m={m} after {max_retries} seeds from {seed}"
    )
