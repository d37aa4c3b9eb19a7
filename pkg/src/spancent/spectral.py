"""Spectral basis of the normalized walk operator, transition powers, exact oracles."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import Graph, GraphStructureError, bfs_levels, require_ergodic
from .scores import EdgeScores

DENSE_EIG_THRESHOLD = 2000


class EigensolverError(RuntimeError):
    """Eigensolver failed to reach the required residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(eq=False)
class SpectralBasis:
    """Top eigenpairs of the symmetrically normalized adjacency operator.

    ``eigenvalues`` are sorted by descending absolute value with the leading
    value exactly 1. ``vectors[k]`` holds the rescaled eigenvector whose
    degree-weighted mean square is 1; the leading vector is the all-ones
    vector. ``two_m`` caches twice the edge count.
    """

    omega: int
    eigenvalues: np.ndarray
    vectors: np.ndarray
    two_m: float


def _normalized_adjacency(g: Graph) -> sp.csr_matrix:
    inv_sqrt = 1.0 / np.sqrt(g.degrees.astype(np.float64))
    data = inv_sqrt[np.repeat(np.arange(g.n), g.degrees)] * inv_sqrt[g.indices]
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))


def compute_spectral_basis(
    g: Graph,
    omega: int,
    residual_tol: float = 1e-8,
    dense_threshold: int = DENSE_EIG_THRESHOLD,
) -> SpectralBasis:
    """Compute the ``omega`` largest-magnitude eigenpairs of the walk operator.

    Small graphs use a dense symmetric eigendecomposition; larger ones a
    Lanczos-type solver started from a fixed vector. Ties in |eigenvalue|
    break by signed value descending, then solver order. Each eigenvector's
    sign is fixed so its first nonzero component is positive.
    """
    if not 2 <= omega <= g.n:
        raise ValueError(f"omega={omega} outside [2, n={g.n}]")
    mat = _normalized_adjacency(g)
    if g.n <= dense_threshold or omega > g.n - 2:
        if g.n > 4 * dense_threshold:
            raise EigensolverError(
                f"omega={omega} too close to n={g.n} for the iterative path"
            )
        lam, phi = np.linalg.eigh(mat.toarray())
    else:
        v0 = np.full(g.n, 1.0 / np.sqrt(g.n))
        try:
            lam, phi = spla.eigsh(mat, k=omega, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(f"Lanczos solver did not converge: {exc}") from exc
    order = np.lexsort((np.arange(lam.size), -lam, -np.abs(lam)))[:omega]
    lam = lam[order]
    phi = phi[:, order]
    resid = np.linalg.norm(mat @ phi - phi * lam, axis=0)
    worst = float(resid.max())
    if worst > residual_tol:
        raise EigensolverError(
            f"eigenpair residual {worst:.3e} exceeds {residual_tol:.1e}", residual=worst
        )
    if abs(lam[0] - 1.0) > 1e-6:
        raise EigensolverError(
            f"leading eigenvalue {lam[0]!r} is not 1; graph likely not connected"
        )
    # deterministic sign: first nonzero component positive
    for k in range(omega):
        col = phi[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            phi[:, k] = -col
    two_m = 2.0 * g.m
    scale = np.sqrt(two_m) / np.sqrt(g.degrees.astype(np.float64))
    vectors = (phi * scale[:, None]).T.copy()
    # the leading pair is known in closed form; store it exactly
    lam[0] = 1.0
    vectors[0] = 1.0
    return SpectralBasis(omega=omega, eigenvalues=lam, vectors=vectors, two_m=two_m)


@dataclass(eq=False)
class DenseDistribution:
    """Walk-position distribution after ``hop`` steps from ``source``.

    ``values[j]`` is the probability of standing at node j, so the entries
    are non-negative and sum to 1.
    """

    source: int
    hop: int
    values: np.ndarray


def toward_source(g: Graph, dist: DenseDistribution) -> np.ndarray:
    """Hop-control reversal: probability of reaching ``dist.source`` from each node.

    Uses the detailed-balance identity d(i) * p(i -> j) = d(j) * p(j -> i).
    """
    return dist.values * (g.degrees[dist.source] * g.inv_degrees)


def transition_power_row(g: Graph, source: int, hops: int) -> DenseDistribution:
    """Exact ``hops``-step walk distribution from ``source`` (hop 0 = indicator)."""
    if hops < 0:
        raise ValueError("hops must be non-negative")
    p = np.zeros(g.n)
    p[source] = 1.0
    adj = g.adjacency
    for _ in range(hops):
        p = adj @ (p * g.inv_degrees)
    return DenseDistribution(source=source, hop=hops, values=p)


def _transition_csr(g: Graph) -> sp.csr_matrix:
    data = np.repeat(g.inv_degrees, g.degrees)
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))


def exact_scores_power(
    g: Graph, tail_tol: float = 1e-12, tau_max: int = 1000
) -> EdgeScores:
    """Ground-truth scores by summing transition-power contributions per hop.

    Per edge the hop-``l`` increment is
    ``P^l[u,u]/d(u) + P^l[v,v]/d(v) - 2 P^l[u,v]/d(v)`` (detailed balance
    folds the two cross terms into one). Summation stops once the largest
    per-edge increment stays under ``tail_tol`` for two consecutive hops
    (parity oscillation on nearly bipartite graphs makes a single-hop check
    unreliable), or at ``tau_max``.
    """
    require_ergodic(g)
    trans = _transition_csr(g)
    power = np.eye(g.n)
    u, v = g.edge_u, g.edge_v
    inv_d = g.inv_degrees
    acc = np.zeros(g.m)
    quiet = 0
    for hop in range(tau_max + 1):
        if hop:
            power = trans @ power
        diag = power.diagonal()
        inc = diag[u] * inv_d[u] + diag[v] * inv_d[v] - 2.0 * power[u, v] * inv_d[v]
        acc += inc
        quiet = quiet + 1 if np.abs(inc).max() < tail_tol else 0
        if quiet >= 2:
            break
    return EdgeScores(graph=g, values=acc)


def exact_scores_pseudoinverse(g: Graph) -> EdgeScores:
    """Exact scores from the Laplacian pseudoinverse (desk-scale oracle).

    The score of edge (u, v) equals its effective resistance
    ``Lp[u,u] + Lp[v,v] - 2 Lp[u,v]``. The pseudoinverse comes from a dense
    eigendecomposition with the single zero eigenvalue skipped.
    """
    if (bfs_levels(g) < 0).any():
        raise GraphStructureError("graph is disconnected; scores undefined")
    lap = np.diag(g.degrees.astype(np.float64)) - g.adjacency.toarray()
    w, q = np.linalg.eigh(lap)
    scale = max(float(w[-1]), 1.0)
    if w[1] < 1e-10 * scale:
        raise GraphStructureError("Laplacian has a near-zero second eigenvalue")
    inv = np.zeros_like(w)
    inv[1:] = 1.0 / w[1:]
    lp = (q * inv) @ q.T
    u, v = g.edge_u, g.edge_v
    vals = lp[u, u] + lp[v, v] - 2.0 * lp[u, v]
    return EdgeScores(graph=g, values=vals)


def write_spectral_cache(basis: SpectralBasis, target: Union[str, Path, IO[str]]) -> None:
    """Serialize a basis: header ``n m omega``, one eigenvalue line, one line per vector."""
    n = basis.vectors.shape[1]
    m = int(round(basis.two_m / 2))
    lines = [f"{n} {m} {basis.omega}"]
    lines.append(" ".join(f"{x:.17g}" for x in basis.eigenvalues))
    for row in basis.vectors:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    body = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(body)
    else:
        target.write(body)


def read_spectral_cache(source: Union[str, Path, IO[str]]) -> SpectralBasis:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    try:
        n, m, omega = (int(x) for x in lines[0].split())
        eigenvalues = np.array([float(x) for x in lines[1].split()])
        vectors = np.array(
            [[float(x) for x in lines[2 + k].split()] for k in range(omega)]
        )
    except (IndexError, ValueError) as exc:
        raise EigensolverError(f"malformed spectral cache: {exc}") from exc
    if eigenvalues.shape != (omega,) or vectors.shape != (omega, n):
        raise EigensolverError("spectral cache dimensions do not match its header")
    return SpectralBasis(
        omega=omega, eigenvalues=eigenvalues, vectors=vectors, two_m=2.0 * m
    )
