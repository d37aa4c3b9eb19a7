"""Hybrid estimator: truncated traversal refined by short random walks."""
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
from .traversal import TraversalState
from .truncation import compute_truncation_table

SAMPLE_CAP = 100_000_000
_AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class WalkBudget:
    """Sampling plan for one edge: walk length, range bound, and walk count."""

    edge: tuple[int, int]
    remaining_len: int
    chi: float
    n_r: int


@dataclass(frozen=True)
class WalkSumBounds:
    """Envelope for the sum of target probabilities along one random walk."""

    lb: float
    ub: float
    rho_hat: float


def walk_sum_bounds(
    g: Graph, start: int, toward: np.ndarray, rho_hat: float, length: int
) -> WalkSumBounds:
    """Bounds on the sum of ``toward`` values over a length-``length`` walk from ``start``.

    ``toward`` holds reach probabilities of a fixed target node; ``rho_hat``
    must dominate the largest value-pair sum over any edge. The first hop is
    confined to the start's neighborhood, the remaining hops are bounded via
    adjacent-pair sums.
    """
    if length < 1:
        raise ValueError("walk length must be at least 1")
    near = toward[g.neighbors(start)]
    lb = float(near.min() + (length - 1) * toward.min())
    ub = float(near.max() / 2.0 + toward.max() / 2.0 + (length - 1) * rho_hat / 2.0)
    return WalkSumBounds(lb=lb, ub=ub, rho_hat=rho_hat)


def candidate_rho(g: Graph, toward: np.ndarray, gamma: int) -> float:
    """Upper bound on the largest adjacent-pair sum of ``toward``.

    Only the ``gamma`` largest values (ties broken by ascending node id) are
    inspected. The top value plus the gamma-th value dominates any edge with
    an endpoint outside the candidate set; an edge inside the candidate set
    can still carry a larger sum, so the result is the maximum of that
    envelope and the best candidate-pair edge. Candidate pairs are probed by
    binary search on the sorted edge keys; once the pair count passes the
    edge count a single scan over the edges is cheaper and returns the same
    value.
    """
    if gamma < 1:
        raise ValueError("need at least one candidate")
    n = g.n
    k = min(gamma, n)
    top = float(toward.max())
    if k == n:
        cand = np.arange(n, dtype=np.int64)
        kth = float(toward.min())
    else:
        kth = float(np.partition(toward, n - k)[n - k])
        above = np.flatnonzero(toward > kth)
        equal = np.flatnonzero(toward == kth)
        cand = np.concatenate([above, equal[: k - above.size]])
    envelope = top + kth
    if k * (k - 1) // 2 <= 2 * g.m:
        ia, ib = np.triu_indices(k, 1)
        a, b = cand[ia], cand[ib]
        keys = np.minimum(a, b) * n + np.maximum(a, b)
        pos = np.searchsorted(g._edge_keys, keys)
        pos[pos >= g.m] = 0
        hit = g._edge_keys[pos] == keys
        if hit.any():
            return max(float((toward[a[hit]] + toward[b[hit]]).max()), envelope)
    else:
        member = np.zeros(n, dtype=bool)
        member[cand] = True
        hit = member[g.edge_u] & member[g.edge_v]
        if hit.any():
            return max(float((toward[g.edge_u[hit]] + toward[g.edge_v[hit]]).max()), envelope)
    return envelope


def estimator_range_bound(
    g: Graph,
    edge: tuple[int, int],
    toward: np.ndarray,
    gamma: int,
    remaining_len: int,
) -> float:
    """Range bound for the per-sample walk-difference estimator of one edge.

    ``gamma = 0`` gives the cheap global bound
    ``2 * remaining_len * (max - min)``; otherwise the walk-sum envelopes of
    both endpoints are combined, with the adjacent-pair term bounded through
    :func:`candidate_rho`. The combined envelope width alone does not cap
    the estimator's magnitude when the two endpoint envelopes are disjoint,
    so the result also dominates both cross-differences; with overlapping
    envelopes (the usual case) the values coincide.
    """
    if remaining_len < 1:
        raise ValueError("remaining length must be at least 1")
    if gamma == 0:
        return float(2.0 * remaining_len * (toward.max() - toward.min()))
    i, j = edge
    rho = candidate_rho(g, toward, gamma)
    bi = walk_sum_bounds(g, i, toward, rho, remaining_len)
    bj = walk_sum_bounds(g, j, toward, rho, remaining_len)
    return max(bi.ub + bj.ub - bi.lb - bj.lb, bi.ub - bj.lb, bj.ub - bi.lb)


def hoeffding_sample_count(
    chi: float, degree: int, eps_half: float, delta: float, m: int
) -> int:
    """Walks needed so the sample mean deviates at most ``eps_half`` w.h.p.

    From the two-sided Hoeffding bound for i.i.d. variables whose range has
    width ``chi / degree``, at failure level ``delta / (2m)`` per edge half:
    ``ceil(8 chi^2 ln(2m / delta) / (degree^2 eps_half^2))`` (natural log).
    A zero range needs no samples. Counts are capped loudly.
    """
    if eps_half <= 0 or not 0.0 < delta < 1.0 or degree < 1 or m < 1:
        raise ValueError("invalid sampling parameters")
    if chi == 0.0:
        return 0
    raw = 8.0 * chi * chi * math.log(2.0 * m / delta) / (degree * degree * eps_half * eps_half)
    count = math.ceil(raw)
    if count > SAMPLE_CAP:
        warnings.warn(
            f"sample count {count:.3e} capped at {SAMPLE_CAP:.0e}; "
            "range bound chi is pathologically loose",
            stacklevel=2,
        )
        count = SAMPLE_CAP
    return count


def should_switch_to_walks(
    g: Graph,
    state: TraversalState,
    pending: list[tuple[tuple[int, int], int]],
    eps_half: float,
    delta: float,
) -> bool:
    """Decide whether sampling is now cheaper than one more traversal hop.

    Compares the frontier degree sum (cost of the next hop) against the
    total walk budget of the still-unfinished incident edges, evaluated with
    the cheap global range bound on the current distribution. True means
    stop traversing and sample.
    """
    lhs = state.frontier_degree_sum
    d_i = int(g.degrees[state.source])
    col = state.current * (g.degrees[state.source] * g.inv_degrees)
    spread = float(col.max() - col.min())
    coef = 8.0 * math.log(2.0 * g.m / delta) / (d_i * d_i * eps_half * eps_half)
    rhs = 0.0
    for _edge, tau in pending:
        rem = tau - state.hop
        if rem <= 0:
            continue
        chi = 2.0 * rem * spread
        rhs += coef * chi * chi
    return lhs > rhs


def random_walk(g: Graph, start: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform random walk; returns the nodes at hops 1..length."""
    if length < 1:
        raise ValueError("walk length must be at least 1")
    nodes = np.empty(length, dtype=np.int64)
    pos = start
    for h in range(length):
        k = int(rng.integers(0, g.degrees[pos]))
        pos = int(g.indices[g.indptr[pos] + k])
        nodes[h] = pos
    return nodes


def _batch_walk_sums(
    g: Graph,
    starts: np.ndarray,
    length: int,
    toward: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-walk sums of ``toward`` over hops 1..length, one walk per start."""
    pos = starts.copy()
    sums = np.zeros(pos.size)
    for _ in range(length):
        step = rng.integers(0, g.degrees[pos])
        pos = g.indices[g.indptr[pos] + step]
        sums += toward[pos]
    return sums


def sample_remainder(
    g: Graph,
    edge: tuple[int, int],
    toward: np.ndarray,
    budget: WalkBudget,
    rng: np.random.Generator,
) -> float:
    """Unbiased walk estimate of the contribution beyond the traversal depth.

    Each sample pairs one walk from each endpoint and takes the scaled
    difference of their ``toward`` sums. Every sample is checked against the
    budget's range bound.
    """
    if budget.remaining_len < 1:
        raise ValueError("remaining length must be at least 1")
    if budget.n_r <= 0:
        return 0.0
    i, j = edge
    d_i = float(g.degrees[i])
    si = _batch_walk_sums(g, np.full(budget.n_r, i, np.int64), budget.remaining_len, toward, rng)
    sj = _batch_walk_sums(g, np.full(budget.n_r, j, np.int64), budget.remaining_len, toward, rng)
    x = (si - sj) / d_i
    bound = budget.chi / d_i
    worst = float(np.abs(x).max())
    if worst > bound + _AUDIT_TOL * (1.0 + bound):
        raise AssertionError(f"sample magnitude {worst} exceeds range bound {bound}")
    return float(x.mean())


@numba.njit(inline="always")
def _splitmix_u01(state):  # pragma: no cover
    """Advance one splitmix64 step; return (state, uniform double in [0, 1))."""
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def _hybrid_kernel(  # noqa: C901  (hot loop: one flat routine per source)
    indptr,
    indices,
    degrees,
    inv_deg,
    edge_u,
    edge_v,
    edge_keys,
    arc_edge_id,
    taus,
    sources,
    seeds,
    n_nodes,
    m_edges,
    eps_half,
    log_term,
    gamma,
    g_out,
    chi_out,
    nr_out,
    tilde_out,
    audit_out,
):  # pragma: no cover (exercised through hybrid_scores)
    cur = np.zeros(n_nodes)
    nxt = np.zeros(n_nodes)
    col = np.zeros(n_nodes)
    act = np.empty(n_nodes, np.int64)
    nact = np.empty(n_nodes, np.int64)
    in_nxt = np.zeros(n_nodes, np.bool_)
    member = np.zeros(n_nodes, np.bool_)
    cand = np.empty(n_nodes, np.int64)
    tie = np.empty(n_nodes, np.int64)
    g_sum_buf = np.empty(n_nodes)
    g_cmp_buf = np.empty(n_nodes)

    for si in range(sources.size):
        source = sources[si]
        rng_state = seeds[si]
        lo, hi = indptr[source], indptr[source + 1]
        deg_nb = hi - lo
        d_i = degrees[source]
        inv_di = 1.0 / d_i
        coef = 8.0 * log_term / (d_i * d_i * eps_half * eps_half)
        max_tau = 0
        for a in range(deg_nb):
            t = taus[arc_edge_id[lo + a]]
            if t > max_tau:
                max_tau = t

        cur[source] = 1.0
        act[0] = source
        act_size = 1
        frontier = float(d_i)
        g_sum = g_sum_buf[:deg_nb]
        g_cmp = g_cmp_buf[:deg_nb]
        for a in range(deg_nb):
            g_sum[a] = inv_di
            g_cmp[a] = 0.0
        hop = 0
        while hop < max_tau:
            # switch rule: frontier cost vs total walk budget at this depth
            cmax = 0.0
            cmin_sup = 1.0e300
            for idx in range(act_size):
                x = act[idx]
                v = cur[x] * d_i * inv_deg[x]
                if v > cmax:
                    cmax = v
                if v < cmin_sup:
                    cmin_sup = v
            cmin = 0.0 if act_size < n_nodes else cmin_sup
            rhs = 0.0
            for a in range(deg_nb):
                rem = taus[arc_edge_id[lo + a]] - hop
                if rem > 0:
                    chi = 2.0 * rem * (cmax - cmin)
                    rhs += coef * chi * chi
            if frontier > rhs:
                break
            # one traversal hop: scatter an equal share to every neighbor
            nxt_count = 0
            for idx in range(act_size):
                j = act[idx]
                w = cur[j] * inv_deg[j]
                for p in range(indptr[j], indptr[j + 1]):
                    x = indices[p]
                    if not in_nxt[x]:
                        in_nxt[x] = True
                        nact[nxt_count] = x
                        nxt_count += 1
                    nxt[x] += w
            frontier = 0.0
            for idx in range(nxt_count):
                frontier += degrees[nact[idx]]
            ret = nxt[source] * inv_di
            for a in range(deg_nb):
                nb = indices[lo + a]
                inc = ret - nxt[nb] * inv_deg[nb]
                y = inc - g_cmp[a]
                t2 = g_sum[a] + y
                g_cmp[a] = (t2 - g_sum[a]) - y
                g_sum[a] = t2
            for idx in range(act_size):
                cur[act[idx]] = 0.0
            for idx in range(nxt_count):
                x = nact[idx]
                cur[x] = nxt[x]
                nxt[x] = 0.0
                in_nxt[x] = False
                act[idx] = x
            act_size = nxt_count
            hop += 1

        tilde_out[source] = hop
        for a in range(deg_nb):
            g_out[lo + a] = g_sum[a]

        pend_total = 0
        for a in range(deg_nb):
            if taus[arc_edge_id[lo + a]] > hop:
                pend_total += 1
        if pend_total == 0:
            for idx in range(act_size):
                cur[act[idx]] = 0.0
            continue

        # reach probabilities of the source at the stopping depth
        cmax = 0.0
        cmin_sup = 1.0e300
        for idx in range(act_size):
            x = act[idx]
            v = cur[x] * d_i * inv_deg[x]
            col[x] = v
            if v > cmax:
                cmax = v
            if v < cmin_sup:
                cmin_sup = v
        cmin = 0.0 if act_size < n_nodes else cmin_sup

        rho = 0.0
        nmin_i = 1.0e300
        nmax_i = -1.0e300
        if gamma > 0:
            # largest adjacent-pair sum among the top-gamma candidates
            k = gamma if gamma < n_nodes else n_nodes
            if act_size >= k:
                vals = np.empty(act_size)
                for idx in range(act_size):
                    vals[idx] = col[act[idx]]
                kth = np.partition(vals, act_size - k)[act_size - k]
            else:
                kth = 0.0
            cand_count = 0
            if kth > 0.0:
                tie_count = 0
                for idx in range(act_size):
                    x = act[idx]
                    if col[x] > kth:
                        cand[cand_count] = x
                        cand_count += 1
                    elif col[x] == kth:
                        tie[tie_count] = x
                        tie_count += 1
                ties = np.sort(tie[:tie_count])
                need = k - cand_count
                for idx in range(need):
                    cand[cand_count] = ties[idx]
                    cand_count += 1
            else:
                for idx in range(act_size):
                    cand[cand_count] = act[idx]
                    cand_count += 1
                x = 0
                while cand_count < k:
                    if col[x] == 0.0:
                        cand[cand_count] = x
                        cand_count += 1
                    x += 1
            best_pair = -1.0
            if k * (k - 1) // 2 <= 2 * m_edges:
                for i1 in range(cand_count):
                    a1 = cand[i1]
                    for i2 in range(i1 + 1, cand_count):
                        b1 = cand[i2]
                        if a1 < b1:
                            key = a1 * n_nodes + b1
                        else:
                            key = b1 * n_nodes + a1
                        pos = np.searchsorted(edge_keys, key)
                        if pos < m_edges and edge_keys[pos] == key:
                            s = col[a1] + col[b1]
                            if s > best_pair:
                                best_pair = s
            else:
                for idx in range(cand_count):
                    member[cand[idx]] = True
                for e in range(m_edges):
                    if member[edge_u[e]] and member[edge_v[e]]:
                        s = col[edge_u[e]] + col[edge_v[e]]
                        if s > best_pair:
                            best_pair = s
                for idx in range(cand_count):
                    member[cand[idx]] = False
            rho = cmax + kth
            if best_pair > rho:
                rho = best_pair
            for p in range(lo, hi):
                v = col[indices[p]]
                if v < nmin_i:
                    nmin_i = v
                if v > nmax_i:
                    nmax_i = v

        for a in range(deg_nb):
            tau_a = taus[arc_edge_id[lo + a]]
            rem = tau_a - hop
            if rem <= 0:
                continue
            j = indices[lo + a]
            length = float(rem)
            if gamma > 0:
                nmin_j = 1.0e300
                nmax_j = -1.0e300
                for p in range(indptr[j], indptr[j + 1]):
                    v = col[indices[p]]
                    if v < nmin_j:
                        nmin_j = v
                    if v > nmax_j:
                        nmax_j = v
                ub_i = nmax_i / 2.0 + cmax / 2.0 + (length - 1.0) * rho / 2.0
                lb_i = nmin_i + (length - 1.0) * cmin
                ub_j = nmax_j / 2.0 + cmax / 2.0 + (length - 1.0) * rho / 2.0
                lb_j = nmin_j + (length - 1.0) * cmin
                # also dominate both cross-differences so chi caps |X|, not
                # just its spread, when the endpoint envelopes are disjoint
                chi = ub_i + ub_j - lb_i - lb_j
                if ub_i - lb_j > chi:
                    chi = ub_i - lb_j
                if ub_j - lb_i > chi:
                    chi = ub_j - lb_i
            else:
                chi = 2.0 * length * (cmax - cmin)
                lb_i = -1.0e300
                ub_i = 1.0e300
                lb_j = -1.0e300
                ub_j = 1.0e300
            chi_out[lo + a] = chi
            raw = coef * chi * chi
            if raw > SAMPLE_CAP:
                n_r = SAMPLE_CAP
                audit_out[2] += 1
            else:
                n_r = int(math.ceil(raw))
            nr_out[lo + a] = n_r
            if n_r <= 0:
                continue
            x_cap = chi * inv_di
            x_tol = _AUDIT_TOL * (1.0 + x_cap)
            bi_tol = _AUDIT_TOL * (1.0 + abs(ub_i))
            bj_tol = _AUDIT_TOL * (1.0 + abs(ub_j))
            mean_sum = 0.0
            mean_cmp = 0.0
            for _ in range(n_r):
                pos = source
                s_i = 0.0
                for _h in range(rem):
                    rng_state, u01 = _splitmix_u01(rng_state)
                    k2 = int(u01 * degrees[pos])
                    if k2 == degrees[pos]:
                        k2 -= 1
                    pos = indices[indptr[pos] + k2]
                    s_i += col[pos]
                pos = j
                s_j = 0.0
                for _h in range(rem):
                    rng_state, u01 = _splitmix_u01(rng_state)
                    k2 = int(u01 * degrees[pos])
                    if k2 == degrees[pos]:
                        k2 -= 1
                    pos = indices[indptr[pos] + k2]
                    s_j += col[pos]
                x_val = (s_i - s_j) * inv_di
                if abs(x_val) > x_cap + x_tol:
                    audit_out[0] += 1
                if s_i < lb_i - bi_tol or s_i > ub_i + bi_tol:
                    audit_out[1] += 1
                if s_j < lb_j - bj_tol or s_j > ub_j + bj_tol:
                    audit_out[1] += 1
                y = x_val - mean_cmp
                t2 = mean_sum + y
                mean_cmp = (t2 - mean_sum) - y
                mean_sum = t2
            g_out[lo + a] += mean_sum / n_r

        for idx in range(act_size):
            x = act[idx]
            cur[x] = 0.0
            col[x] = 0.0
    return 0


def hybrid_scores(
    g: Graph,
    basis: SpectralBasis,
    eps: float,
    delta: float,
    gamma: int = 10,
    seed: int = 0,
    threads: int = 1,
    return_diagnostics: bool = False,
):
    """All-edge scores by traversal plus adaptive random-walk refinement.

    The error budget splits evenly between truncation and sampling; the
    sampling half splits again across the two per-edge contributions, so
    walk counts target a quarter of the budget each. Every edge is within
    ``eps`` of the exact score with probability at least ``1 - delta``.
    Deterministic for a fixed seed regardless of ``threads``: each source
    draws from its own derived stream and writes disjoint slots.

    With ``return_diagnostics`` the per-source stopping depths and per-arc
    range bounds and walk counts come back alongside the scores.
    """
    require_ergodic(g)
    if not 0.0 < eps < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("eps and delta must lie in (0, 1)")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    table = compute_truncation_table(g, basis, eps / 2.0)
    eps_half = eps / 4.0
    log_term = math.log(2.0 * g.m / delta)
    g_directed = np.zeros(2 * g.m)
    chi_out = np.zeros(2 * g.m)
    nr_out = np.zeros(2 * g.m, dtype=np.int64)
    tilde_out = np.zeros(g.n, dtype=np.int64)
    audit = np.zeros(3, dtype=np.int64)
    seeds = np.random.SeedSequence(seed).generate_state(g.n, dtype=np.uint64)

    def run(sources: np.ndarray) -> None:
        _hybrid_kernel(
            g.indptr, g.indices, g.degrees, g.inv_degrees,
            g.edge_u, g.edge_v, g._edge_keys, g.arc_edge_id, table.taus,
            sources, seeds[sources], g.n, g.m, eps_half, log_term, gamma,
            g_directed, chi_out, nr_out, tilde_out, audit,
        )

    sources = np.arange(g.n)
    if threads > 1:
        chunks = np.array_split(sources, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, chunks))
    else:
        run(sources)
    if audit[0] or audit[1]:
        raise AssertionError(
            f"sampling audit failed: {int(audit[0])} range and "
            f"{int(audit[1])} envelope violations"
        )
    if audit[2]:
        warnings.warn(
            f"{int(audit[2])} per-edge sample counts capped at {SAMPLE_CAP:.0e}",
            stacklevel=2,
        )
    values = np.bincount(g.arc_edge_id, weights=g_directed, minlength=g.m)
    scores = EdgeScores(graph=g, values=values)
    if return_diagnostics:
        return scores, {"tilde": tilde_out, "chi": chi_out, "n_r": nr_out, "taus": table.taus}
    return scores
