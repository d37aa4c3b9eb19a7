"""Per-edge truncated walk lengths from the spectral tail bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphStructureError
from .spectral import SpectralBasis

_UNIT_TOL = 1e-12
_CHUNK = 8192


def global_truncation_length(lambda2_abs: float, eps: float) -> int:
    """Graph-global truncation bound driven only by the second eigenvalue.

    This is the prior-art reference: every edge gets the same length,
    ``ceil(log(4 / (eps - eps*lam)) / log(1/lam) - 1)``.
    """
    if not 0.0 < lambda2_abs < 1.0:
        raise ValueError("lambda2_abs must lie in (0, 1)")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    lam = lambda2_abs
    return math.ceil(math.log(4.0 / (eps - eps * lam)) / math.log(1.0 / lam) - 1.0)


@dataclass(eq=False)
class TruncationTable:
    """Odd truncation length per canonical edge, plus the global reference bound."""

    taus: np.ndarray
    epsilon: float
    global_tau: int | None

    def taus_for_source(self, g: Graph, source: int) -> np.ndarray:
        """Truncation lengths of the edges incident to ``source``, in neighbor order."""
        sl = slice(g.indptr[source], g.indptr[source + 1])
        return self.taus[g.arc_edge_id[sl]]


def _round_up_odd(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 1)
    return np.where(x % 2 == 0, x + 1, x)


def truncation_lengths(
    g: Graph,
    basis: SpectralBasis,
    eps: float,
    edge_ids: np.ndarray | None = None,
) -> np.ndarray:
    """Odd truncation length for each requested canonical edge.

    The returned length ``tau`` guarantees that the truncated score misses
    the exact one by at most ``eps``. The search walks odd candidates
    t = 1, 3, 5, ... and stops at the first t exceeding the tail-bound
    threshold evaluated with the partial spectral correction at t.
    Degenerate inputs: a non-positive error margin keeps searching (the
    correction shrinks); a non-positive residual numerator means the tail
    beyond the explicit eigenpairs vanishes, so the current t is returned;
    a trailing eigenvalue at 0 or 1 falls back to the bound driven by the
    second eigenvalue alone.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if basis.omega < 2:
        raise ValueError("need at least two eigenpairs")
    if edge_ids is None:
        edge_ids = np.arange(g.m)
    lam = basis.eigenvalues
    lam2_abs = abs(float(lam[1]))
    lamw = float(lam[-1])
    lamw_abs = abs(lamw)
    if lam2_abs >= 1.0 - _UNIT_TOL:
        raise GraphStructureError(
            "second eigenvalue has unit magnitude; graph is not ergodic"
        )
    u = g.edge_u[edge_ids]
    v = g.edge_v[edge_ids]
    du = g.degrees[u].astype(np.float64)
    dv = g.degrees[v].astype(np.float64)
    base_num = 1.0 / du + 1.0 / dv - 2.0 / (du * dv)
    if lam2_abs <= _UNIT_TOL:
        # whole nontrivial spectrum is numerically zero: one hop suffices
        return np.ones(edge_ids.size, dtype=np.int64)
    if lamw_abs <= _UNIT_TOL or lamw_abs >= 1.0 - _UNIT_TOL:
        tau0 = np.ceil(
            np.log(base_num / (eps * (1.0 - lam2_abs**2)))
            / math.log(1.0 / lam2_abs)
            - 1.0
        ).astype(np.int64)
        return _round_up_odd(tau0)
    out = np.empty(edge_ids.size, dtype=np.int64)
    for lo in range(0, edge_ids.size, _CHUNK):
        hi = min(lo + _CHUNK, edge_ids.size)
        out[lo:hi] = _search_chunk(
            basis, eps, u[lo:hi], v[lo:hi], base_num[lo:hi], lamw, lamw_abs
        )
    return out


def _search_chunk(
    basis: SpectralBasis,
    eps: float,
    u: np.ndarray,
    v: np.ndarray,
    base_num: np.ndarray,
    lamw: float,
    lamw_abs: float,
) -> np.ndarray:
    lam_mid = basis.eigenvalues[1:-1]
    diffs2 = (basis.vectors[1:-1, u] - basis.vectors[1:-1, v]) ** 2
    upsilon = ((1.0 + lam_mid) @ diffs2) / basis.two_m
    num = base_num - upsilon
    coeff = diffs2 / ((1.0 - lam_mid) * basis.two_m)[:, None]
    log_inv = math.log(1.0 / lamw_abs)
    gap = 1.0 - lamw * lamw
    size = u.size
    result = np.zeros(size, dtype=np.int64)
    alive = np.arange(size)
    power = lam_mid**2  # trailing factor lam^(t+1) at t = 1
    t = 1
    while alive.size:
        delta = power @ coeff[:, alive] if lam_mid.size else np.zeros(alive.size)
        margin = eps - delta
        evaluable = margin > 0.0
        done = evaluable & (num[alive] <= 0.0)
        formula = evaluable & ~done
        if formula.any():
            ratio = num[alive][formula] / (margin[formula] * gap)
            threshold = np.ceil(np.log(ratio) / log_inv - 1.0)
            sub = np.zeros(alive.size, dtype=bool)
            sub[formula] = t > threshold
            done |= sub
        result[alive[done]] = t
        alive = alive[~done]
        power = power * lam_mid**2
        t += 2
        if t > 10_000_000:
            raise RuntimeError("truncation search did not terminate")
    return result


def edge_truncation_length(
    g: Graph, basis: SpectralBasis, edge: tuple[int, int], eps: float
) -> int:
    """Odd truncation length for a single edge (must exist in the graph)."""
    i, j = edge
    if not g.has_edge(i, j):
        raise KeyError(f"({i}, {j}) is not an edge")
    eid = g.edge_id(i, j)
    return int(truncation_lengths(g, basis, eps, np.array([eid]))[0])


def compute_truncation_table(g: Graph, basis: SpectralBasis, eps: float) -> TruncationTable:
    taus = truncation_lengths(g, basis, eps)
    lam2_abs = abs(float(basis.eigenvalues[1]))
    global_tau = None
    if _UNIT_TOL < lam2_abs < 1.0 - _UNIT_TOL:
        global_tau = global_truncation_length(lam2_abs, eps)
    return TruncationTable(taus=taus, epsilon=eps, global_tau=global_tau)
