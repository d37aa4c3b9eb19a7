"""Per-edge score containers and their TSV serialization."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np

from .graph import EdgeListError, Graph


@dataclass(eq=False)
class EdgeScores:
    """One real score per canonical edge of ``graph``, in canonical order.

    Exact spanning centralities lie in (0, 1]; estimates may leave that
    interval by at most the algorithm's error budget. Values are never
    clamped.
    """

    graph: Graph
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.graph.m,):
            raise ValueError("need exactly one score per edge")

    def write(self, target: Union[str, Path, IO[str]]) -> None:
        """Write ``u<TAB>v<TAB>score`` lines with original labels, 12 significant digits."""
        g = self.graph
        lu, lv = g.labels[g.edge_u], g.labels[g.edge_v]
        body = "\n".join(
            f"{a}\t{b}\t{s:.12g}" for a, b, s in zip(lu, lv, self.values)
        )
        if isinstance(target, (str, Path)):
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(body + "\n")
        else:
            target.write(body + "\n")


def read_score_table(source: Union[str, Path, IO[str]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a score TSV back as (u_labels, v_labels, values) arrays."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()
    us, vs, vals = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise EdgeListError(f"line {lineno}: expected 'u<TAB>v<TAB>score'")
        try:
            us.append(int(parts[0]))
            vs.append(int(parts[1]))
            vals.append(float(parts[2]))
        except ValueError:
            raise EdgeListError(f"line {lineno}: malformed entry {line!r}") from None
    return (
        np.asarray(us, dtype=np.int64),
        np.asarray(vs, dtype=np.int64),
        np.asarray(vals, dtype=np.float64),
    )


@dataclass(frozen=True)
class ScoreComparison:
    mean_abs_error: float
    max_abs_error: float
    edges: int


def compare_score_tables(
    a: tuple[np.ndarray, np.ndarray, np.ndarray],
    b: tuple[np.ndarray, np.ndarray, np.ndarray],
) -> ScoreComparison:
    """Compare two score tables keyed by (u, v) label pairs.

    Raises ``EdgeListError`` naming the first divergent key when the edge
    sets differ.
    """
    ua, va, xa = a
    ub, vb, xb = b
    ka = np.lexsort((va, ua))
    kb = np.lexsort((vb, ub))
    ua, va, xa = ua[ka], va[ka], xa[ka]
    ub, vb, xb = ub[kb], vb[kb], xb[kb]
    limit = min(ua.size, ub.size)
    same = (ua[:limit] == ub[:limit]) & (va[:limit] == vb[:limit])
    if ua.size != ub.size or not same.all():
        if same.all():
            i = limit
            key = (ua[i], va[i]) if ua.size > ub.size else (ub[i], vb[i])
        else:
            i = int(np.argmin(same))
            key = (ua[i], va[i])
        raise EdgeListError(f"edge sets differ; first divergent key: {key}")
    diff = np.abs(xa - xb)
    return ScoreComparison(float(diff.mean()), float(diff.max()), int(ua.size))
