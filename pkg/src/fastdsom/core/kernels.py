"""Compiled inner loops of the training engine.

Layout conventions shared by every kernel:

* ``d`` is the N x N dissimilarity matrix (C order, symmetric).
* ``Dt`` holds the partial sums transposed, ``Dt[k, u] = sum_{i in C_u} d[i, k]``,
  so that one candidate's M values are contiguous.
* Clusters are stored as ``members`` (length N) sliced by ``starts`` (length M + 1).
* ``orders[j]`` lists models by increasing graph distance to j (ties by index) and
  ``ring_starts[j, r]`` is where distance r begins in that list.

Weighted sums S(j, k) are always formed ring by ring: the dissimilarities of one
graph-distance ring are added first, then multiplied by that ring's kernel value
and accumulated in increasing ring order. With integer-valued dissimilarities the
ring sums are exact, so every scheme below produces bit-identical S values.
"""

import numba
import numpy as np

BRUTE, PARTIAL, EARLYSTOP = 0, 1, 2

# Strategy codes recorded in per-epoch statistics.
STRAT_NONE, STRAT_FULL, STRAT_BLOCK, STRAT_INDIVIDUAL = 0, 1, 2, 3

# Per-epoch statistics columns.
ST_NB_SWITCH, ST_STRATEGY, ST_CANDIDATES, ST_TERMS, ST_D_ADDS = 0, 1, 2, 3, 4
N_STATS = 5


@numba.njit(cache=True)
def affect_one(drow, protos, orders, ring_starts, ecc, surv, acc):
    """Model index for one observation given its dissimilarity row.

    Plain argmin when unique; otherwise tied models are separated by the sum of
    dissimilarities to the prototypes within a growing graph radius, and any
    tie that survives every radius goes to the smallest model index.
    """
    m = protos.shape[0]
    best = np.inf
    nsurv = 0
    for j in range(m):
        v = drow[protos[j]]
        if v < best:
            best = v
            surv[0] = j
            nsurv = 1
        elif v == best:
            surv[nsurv] = j
            nsurv += 1
    if nsurv == 1:
        return surv[0]
    for s in range(nsurv):
        acc[s] = best
    diam = ring_starts.shape[1] - 2
    for r in range(1, diam + 1):
        low = np.inf
        for s in range(nsurv):
            j = surv[s]
            if r <= ecc[j]:
                a = acc[s]
                order = orders[j]
                for p in range(ring_starts[j, r], ring_starts[j, r + 1]):
                    a += drow[protos[order[p]]]
                acc[s] = a
            if acc[s] < low:
                low = acc[s]
        kept = 0
        for s in range(nsurv):
            if acc[s] == low:
                surv[kept] = surv[s]
                acc[kept] = acc[s]
                kept += 1
        nsurv = kept
        if nsurv == 1:
            break
    return surv[0]


@numba.njit(cache=True)
def affectation(d, protos, prev_assign, assign, orders, ring_starts, ecc, changed, moved):
    """Assign every observation; returns the number of observations that moved.

    ``changed[u]`` is set for both the old and the new cluster of a moved
    observation, ``moved[:count]`` lists the moved observations in index order.
    A previous assignment of -1 counts as a move that dirties only the new cluster.
    """
    n = d.shape[0]
    m = protos.shape[0]
    surv = np.empty(m, dtype=np.int64)
    acc = np.empty(m)
    changed[:] = False
    count = 0
    for i in range(n):
        c = affect_one(d[i], protos, orders, ring_starts, ecc, surv, acc)
        assign[i] = c
        old = prev_assign[i]
        if c != old:
            moved[count] = i
            count += 1
            if old >= 0:
                changed[old] = True
            changed[c] = True
    return count


@numba.njit(cache=True)
def build_clusters(assign, protos, members, starts):
    """Group observations by model; a model's current prototype leads its own cluster."""
    n = assign.shape[0]
    m = protos.shape[0]
    starts[:] = 0
    for i in range(n):
        starts[assign[i] + 1] += 1
    for u in range(m):
        starts[u + 1] += starts[u]
    fill = starts[:m].copy()
    for u in range(m):
        p = protos[u]
        if assign[p] == u:
            members[fill[u]] = p
            fill[u] += 1
    for i in range(n):
        u = assign[i]
        if protos[u] == i:
            continue
        members[fill[u]] = i
        fill[u] += 1


@numba.njit(cache=True)
def compute_partials(d, assign, Dt):
    """Full recomputation of the partial sums; returns the number of additions (N^2)."""
    n = d.shape[0]
    Dt[:, :] = 0.0
    for k in range(n):
        row = d[k]
        out = Dt[k]
        for i in range(n):
            out[assign[i]] += row[i]
    return n * n


@numba.njit(cache=True)
def block_update(d, assign, changed, Dt):
    """Recompute the partial sums of changed clusters only; clean columns are kept."""
    n = d.shape[0]
    m = Dt.shape[1]
    idx = np.empty(n, dtype=np.int64)
    cnt = 0
    for i in range(n):
        if changed[assign[i]]:
            idx[cnt] = i
            cnt += 1
    for k in range(n):
        out = Dt[k]
        for u in range(m):
            if changed[u]:
                out[u] = 0.0
        row = d[k]
        for t in range(cnt):
            i = idx[t]
            out[assign[i]] += row[i]
    return n * cnt


@numba.njit(cache=True)
def individual_update(d, moved, count, prev_assign, assign, Dt):
    """Move each observation's row between its old and new partial sums: 2N additions per move."""
    n = d.shape[0]
    for t in range(count):
        i = moved[t]
        old = prev_assign[i]
        new = assign[i]
        row = d[i]
        for k in range(n):
            Dt[k, old] -= row[k]
            Dt[k, new] += row[k]
    return 2 * n * count


@numba.njit(cache=True)
def s_direct_one(d, assign, gdist, kvals, j, k, ringsum):
    n = d.shape[0]
    ringsum[:] = 0.0
    row = d[k]
    for i in range(n):
        ringsum[gdist[assign[i], j]] += row[i]
    s = 0.0
    for r in range(kvals.shape[0]):
        s += kvals[r] * ringsum[r]
    return s


@numba.njit(cache=True)
def s_partial_one(Dt, gdist, kvals, j, k, ringsum):
    m = Dt.shape[1]
    ringsum[:] = 0.0
    row = Dt[k]
    for u in range(m):
        ringsum[gdist[u, j]] += row[u]
    s = 0.0
    for r in range(kvals.shape[0]):
        s += kvals[r] * ringsum[r]
    return s


@numba.njit(cache=True)
def _ring_sums_4(row, ring_of, lanes, ringsum):
    """Ring sums of ``row`` using four interleaved accumulators.

    Runs of equal ring labels would otherwise chain every addition on the
    previous one. The per-ring results are exact on integer data whatever the
    grouping, so this changes no result there.
    """
    n = row.shape[0]
    lanes[:, :] = 0.0
    n4 = n - n % 4
    for i in range(0, n4, 4):
        lanes[0, ring_of[i]] += row[i]
        lanes[1, ring_of[i + 1]] += row[i + 1]
        lanes[2, ring_of[i + 2]] += row[i + 2]
        lanes[3, ring_of[i + 3]] += row[i + 3]
    for i in range(n4, n):
        lanes[0, ring_of[i]] += row[i]
    for r in range(ringsum.shape[0]):
        ringsum[r] = (lanes[0, r] + lanes[1, r]) + (lanes[2, r] + lanes[3, r])


@numba.njit(cache=True)
def repr_brute_one(d, ring_of, kvals, ringsum):
    """Direct argmin of S(j, k) for one model; ``ring_of[i]`` is g(c(i), j)."""
    n = d.shape[0]
    nr = kvals.shape[0]
    lanes = np.empty((4, nr))
    best = np.inf
    best_k = -1
    for k in range(n):
        _ring_sums_4(d[k], ring_of, lanes, ringsum)
        s = 0.0
        for r in range(nr):
            s += kvals[r] * ringsum[r]
        if s < best:
            best = s
            best_k = k
    return best_k


@numba.njit(cache=True)
def repr_brute(d, assign, gdist, kvals, new_protos, counters):
    """Evaluate S(j, k) for every candidate directly from the data: O(N^2) per model.

    Candidates are the outer loop so each row of d is read once per epoch and
    reused for all models; each S(j, k) is formed exactly as in ``repr_brute_one``.
    """
    n = d.shape[0]
    m = gdist.shape[0]
    nr = kvals.shape[0]
    ring_of = np.empty((m, n), dtype=np.int32)
    for j in range(m):
        for i in range(n):
            ring_of[j, i] = gdist[assign[i], j]
    lanes = np.empty((4, nr))
    ringsum = np.empty(nr)
    best = np.full(m, np.inf)
    for k in range(n):
        row = d[k]
        for j in range(m):
            _ring_sums_4(row, ring_of[j], lanes, ringsum)
            s = 0.0
            for r in range(nr):
                s += kvals[r] * ringsum[r]
            if s < best[j]:
                best[j] = s
                new_protos[j] = k
    counters[0] += n * m
    counters[1] += n * n * m


@numba.njit(cache=True)
def repr_partial_one(Dt, ring, kvals, ringsum, tie_fault):
    """Argmin over candidates in index order of S(j, k) rebuilt from the partial sums."""
    n, m = Dt.shape
    nr = kvals.shape[0]
    best = np.inf
    best_k = -1
    for k in range(n):
        ringsum[:] = 0.0
        row = Dt[k]
        for u in range(m):
            ringsum[ring[u]] += row[u]
        s = 0.0
        for r in range(nr):
            s += kvals[r] * ringsum[r]
        if s < best or (tie_fault and s == best):
            best = s
            best_k = k
    return best_k


@numba.njit(cache=True)
def repr_partial(Dt, gdist, kvals, new_protos, counters, tie_fault):
    n, m = Dt.shape
    ringsum = np.empty(kvals.shape[0])
    for j in range(m):
        new_protos[j] = repr_partial_one(Dt, gdist[j], kvals, ringsum, tie_fault)
    counters[0] += n * m
    counters[1] += n * m * m


@numba.njit(cache=True)
def repr_earlystop_one(Dt, kvals, order, rstart, ecc_j, members, starts, best_init, tie_fault, counters):
    """Ordered early-stopping search for one model.

    Candidates are visited cluster by cluster following ``order``; inside a
    candidate, rings are accumulated closest first and the candidate is dropped
    as soon as a lower bound on its final S strictly exceeds the incumbent.
    Rounding is monotone and all terms are nonnegative, so the bound never
    exceeds the S value a full evaluation would produce.
    """
    m = order.shape[0]
    best = best_init
    best_k = -1
    evaluated = 0
    terms = 0
    for v in range(m):
        u_c = order[v]
        for p in range(starts[u_c], starts[u_c + 1]):
            k = members[p]
            row = Dt[k]
            s = 0.0
            stopped = False
            for r in range(ecc_j + 1):
                kr = kvals[r]
                rs = 0.0
                for q in range(rstart[r], rstart[r + 1]):
                    rs += row[order[q]]
                    terms += 1
                    if s + kr * rs > best:
                        stopped = True
                        break
                if stopped:
                    break
                s += kr * rs
            if stopped:
                continue
            evaluated += 1
            if s < best or (s == best and (k > best_k if tie_fault else k < best_k)):
                best = s
                best_k = k
    counters[0] += evaluated
    counters[1] += terms
    return best_k


@numba.njit(cache=True)
def repr_earlystop(Dt, gdist, kvals, orders, ring_starts, ecc, members, starts, new_protos, counters, tie_fault):
    m = gdist.shape[0]
    for j in range(m):
        new_protos[j] = repr_earlystop_one(Dt, kvals, orders[j], ring_starts[j], ecc[j],
                                           members, starts, np.inf, tie_fault, counters)


@numba.njit(cache=True)
def run_epoch(epoch, d, gdist, orders, ring_starts, ecc, kvals, protos, assign, members, starts, Dt,
              changed, moved, scheme, memory, ratio, refresh, tie_fault, stats):
    """One affectation + D maintenance + representation step.

    ``protos`` and ``assign`` hold epoch l-1 values on entry and epoch l values on
    exit; ``Dt`` must be current for the entering assignment when ``memory`` is set.
    """
    n = d.shape[0]
    m = protos.shape[0]
    new_assign = np.empty(n, dtype=np.int64)
    nb_switch = affectation(d, protos, assign, new_assign, orders, ring_starts, ecc, changed, moved)
    build_clusters(new_assign, protos, members, starts)

    strategy = STRAT_NONE
    adds = 0
    if scheme != BRUTE:
        if not memory or (refresh > 0 and epoch % refresh == 0):
            adds = compute_partials(d, new_assign, Dt)
            strategy = STRAT_FULL
        elif nb_switch * ratio >= n:
            adds = block_update(d, new_assign, changed, Dt)
            strategy = STRAT_BLOCK
        else:
            adds = individual_update(d, moved, nb_switch, assign, new_assign, Dt)
            strategy = STRAT_INDIVIDUAL

    counters = np.zeros(2, dtype=np.int64)
    new_protos = np.empty(m, dtype=np.int64)
    if scheme == BRUTE:
        repr_brute(d, new_assign, gdist, kvals, new_protos, counters)
    elif scheme == PARTIAL:
        repr_partial(Dt, gdist, kvals, new_protos, counters, tie_fault)
    else:
        repr_earlystop(Dt, gdist, kvals, orders, ring_starts, ecc, members, starts, new_protos, counters,
                       tie_fault)

    assign[:] = new_assign
    protos[:] = new_protos
    stats[ST_NB_SWITCH] = nb_switch
    stats[ST_STRATEGY] = strategy
    stats[ST_CANDIDATES] = counters[0]
    stats[ST_TERMS] = counters[1]
    stats[ST_D_ADDS] = adds


@numba.njit(cache=True)
def run_training(d, gdist, orders, ring_starts, ecc, ktable, protos, scheme, memory, ratio, refresh,
                 tie_fault, proto_history, stats):
    """All epochs followed by the final affectation; returns the final assignment."""
    n = d.shape[0]
    m = protos.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    starts = np.zeros(m + 1, dtype=np.int64)
    Dt = np.zeros((n, m))
    changed = np.zeros(m, dtype=np.bool_)
    moved = np.empty(n, dtype=np.int64)
    proto_history[0] = protos
    for l in range(1, ktable.shape[0] + 1):
        run_epoch(l, d, gdist, orders, ring_starts, ecc, ktable[l - 1], protos, assign, members, starts, Dt,
                  changed, moved, scheme, memory, ratio, refresh, tie_fault, stats[l - 1])
        proto_history[l] = protos
    final = np.empty(n, dtype=np.int64)
    affectation(d, protos, assign, final, orders, ring_starts, ecc, changed, moved)
    return final
