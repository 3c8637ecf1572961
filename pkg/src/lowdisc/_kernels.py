"""Hot loops compiled with numba.

Everything here is deliberately sequential and allocation-free inside the
loops so results are bit-reproducible run to run regardless of thread
settings.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64_1 = np.uint64(1)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def popcount64(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@njit(cache=True, inline="always")
def _dist_capped(words, a, b, cap):
    """Symmetric-difference size of rows a and b, or cap+1 once it exceeds cap."""
    d = np.int64(0)
    for w in range(words.shape[1]):
        d += popcount64(words[a, w] ^ words[b, w])
        if d > cap:
            return cap + np.int64(1)
    return d


@njit(cache=True)
def sym_diff_rows(words, a, b):
    d = np.int64(0)
    for w in range(words.shape[1]):
        d += popcount64(words[a, w] ^ words[b, w])
    return d


@njit(cache=True)
def greedy_pack(words, sizes, order, delta, size_cap):
    """Greedy packing scan with strict > delta admission.

    Candidates are visited in `order`. A candidate is admitted when its
    distance to every previously admitted member exceeds delta; otherwise it
    is linked to the first admitted member found within delta (the scan
    checks cardinality buckets |size| - delta .. |size| + delta, ascending,
    most recently admitted first, so only members that could possibly block
    are touched). size_cap < 0 means uncapped; ineligible candidates keep
    link -1.

    Returns (admitted bool[m], link int64[m]) indexed by original row id,
    link[c] = c for admitted rows.
    """
    m = words.shape[0]
    admitted = np.zeros(m, dtype=np.bool_)
    link = np.full(m, -1, dtype=np.int64)
    if m == 0:
        return admitted, link
    max_size = np.int64(0)
    for r in range(m):
        if sizes[r] > max_size:
            max_size = sizes[r]
    bucket_head = np.full(max_size + 1, -1, dtype=np.int64)
    bucket_next = np.full(m, -1, dtype=np.int64)

    for pos in range(order.shape[0]):
        c = order[pos]
        sz = sizes[c]
        if size_cap >= 0 and sz > size_cap:
            continue
        lo = sz - delta
        if lo < 0:
            lo = 0
        hi = sz + delta
        if hi > max_size:
            hi = max_size
        blocker = np.int64(-1)
        for s in range(lo, hi + 1):
            node = bucket_head[s]
            while node != -1:
                if _dist_capped(words, c, node, delta) <= delta:
                    blocker = node
                    break
                node = bucket_next[node]
            if blocker != -1:
                break
        if blocker == -1:
            admitted[c] = True
            link[c] = c
            bucket_next[c] = bucket_head[sz]
            bucket_head[sz] = c
        else:
            link[c] = blocker
    return admitted, link


@njit(cache=True)
def verify_separated_kernel(words, ids, delta):
    """First violating pair (i, j, dist) with dist <= delta, or (-1, -1, -1)."""
    p = ids.shape[0]
    for a in range(p):
        for b in range(a + 1, p):
            d = _dist_capped(words, ids[a], ids[b], delta)
            if d <= delta:
                return ids[a], ids[b], d
    return np.int64(-1), np.int64(-1), np.int64(-1)


@njit(cache=True)
def verify_maximal_kernel(words, sizes, member_mask, ids, delta, size_cap):
    """First eligible non-member separated from every member (a witness that
    the packing is not maximal), or -1."""
    m = words.shape[0]
    p = ids.shape[0]
    for c in range(m):
        if member_mask[c]:
            continue
        if size_cap >= 0 and sizes[c] > size_cap:
            continue
        blocked = False
        for a in range(p):
            if _dist_capped(words, c, ids[a], delta) <= delta:
                blocked = True
                break
        if not blocked:
            return np.int64(c)
    return np.int64(-1)


@njit(cache=True)
def exact_nn(words, query_ids, cand_ids, cand_sizes_sorted_order):
    """Exact nearest neighbor among cand_ids for every query row.

    cand_sizes_sorted_order: candidate positions sorted by (size, id); the
    scan walks sizes outward from each query's size and prunes with the
    cardinality lower bound |size(q) - size(c)| <= dist. Ties prefer the
    smallest candidate id. Returns (nn_id int64[q], nn_dist int64[q]).
    """
    q = query_ids.shape[0]
    nc = cand_ids.shape[0]
    out_id = np.full(q, -1, dtype=np.int64)
    out_dist = np.full(q, np.int64(1) << 60, dtype=np.int64)
    if nc == 0:
        return out_id, out_dist
    # sizes of candidates in sorted-by-size order
    srt_sizes = np.empty(nc, dtype=np.int64)
    for t in range(nc):
        c = cand_ids[cand_sizes_sorted_order[t]]
        s = np.int64(0)
        for w in range(words.shape[1]):
            s += popcount64(words[c, w])
        srt_sizes[t] = s
    for qi in range(q):
        qid = query_ids[qi]
        qsize = np.int64(0)
        for w in range(words.shape[1]):
            qsize += popcount64(words[qid, w])
        # binary search for first candidate with size >= qsize
        lo, hi = 0, nc
        while lo < hi:
            mid = (lo + hi) // 2
            if srt_sizes[mid] < qsize:
                lo = mid + 1
            else:
                hi = mid
        up = lo
        down = lo - 1
        best_d = np.int64(1) << 60
        best_id = np.int64(-1)
        while True:
            gap_up = srt_sizes[up] - qsize if up < nc else (np.int64(1) << 60)
            gap_down = qsize - srt_sizes[down] if down >= 0 else (np.int64(1) << 60)
            gap = gap_up if gap_up <= gap_down else gap_down
            if gap > best_d:
                break
            t = up if gap_up <= gap_down else down
            cid = cand_ids[cand_sizes_sorted_order[t]]
            d = _dist_capped(words, qid, cid, best_d)
            if d < best_d or (d == best_d and cid < best_id):
                best_d = d
                best_id = cid
            if gap_up <= gap_down:
                up += 1
            else:
                down -= 1
        out_id[qi] = best_id
        out_dist[qi] = best_d
    return out_id, out_dist


@njit(cache=True)
def reconstruct_all(words, chains, classes, k):
    """Replay every set's canonical decomposition and compare bit-exactly.

    chains[s, j] holds the chain member id of set s at level j (already
    anchored: chains[s, j] for j below the class anchor equal the anchor).
    Returns (n_bad, first_bad_id, n_disjoint_violations, n_subset_violations).
    """
    m, W = words.shape
    bad = np.int64(0)
    first_bad = np.int64(-1)
    disj = np.int64(0)
    subs = np.int64(0)
    cur = np.empty(W, dtype=np.uint64)
    for s in range(m):
        i = classes[s]
        if i < 1:
            i = 1
        anchor = chains[s, i - 1]
        for w in range(W):
            cur[w] = words[anchor, w]
        for j in range(i, k + 1):
            f = chains[s, j]
            fp = chains[s, j - 1]
            for w in range(W):
                a = words[f, w] & ~words[fp, w]
                b = words[fp, w] & ~words[f, w]
                if cur[w] & a:
                    disj += 1
                if b & ~(cur[w] | a):
                    subs += 1
                cur[w] = (cur[w] | a) & ~b
        ok = True
        for w in range(W):
            if cur[w] != words[s, w]:
                ok = False
                break
        if not ok:
            bad += 1
            if first_bad < 0:
                first_bad = s
    return bad, first_bad, disj, subs


@njit(cache=True)
def chain_link_distances(words, chains, classes, k):
    """Max link distance per level over all chains: out[j] = max |F_j ^ F_{j-1}|
    for links actually used (j >= class anchor + 1)."""
    m = words.shape[0]
    out = np.zeros(k + 1, dtype=np.int64)
    for s in range(m):
        i = classes[s]
        if i < 1:
            i = 1
        for j in range(i, k + 1):
            d = sym_diff_rows(words, chains[s, j], chains[s, j - 1])
            if d > out[j]:
                out[j] = d
    return out


@njit(cache=True)
def sym_diff_to_member(words, set_ids, member_ids):
    """d[t] = |set_ids[t] ^ member_ids[t]| pairwise."""
    t = set_ids.shape[0]
    out = np.empty(t, dtype=np.int64)
    for r in range(t):
        out[r] = sym_diff_rows(words, set_ids[r], member_ids[r])
    return out


@njit(cache=True)
def brute_force_min_disc_kernel(masks, sizes, n):
    """Exact min over full colorings of max |chi(S)|, sets as uint64 masks.

    Sign symmetry: element 0 is pinned to +1, so 2^(n-1) colorings are
    scanned in increasing numeric order of the +1-mask; the first coloring
    achieving the minimum is returned (deterministic witness).
    """
    m = masks.shape[0]
    best = np.int64(1) << 60
    best_pattern = np.uint64(0)
    total = np.uint64(1) << np.uint64(n - 1)
    one = np.uint64(1)
    for half in range(total):
        pattern = (np.uint64(half) << one) | one  # element 0 colored +1
        worst = np.int64(0)
        for r in range(m):
            plus = popcount64(masks[r] & pattern)
            chi = 2 * plus - sizes[r]
            if chi < 0:
                chi = -chi
            if chi > worst:
                worst = chi
                if worst >= best:
                    break
        if worst < best:
            best = worst
            best_pattern = pattern
            if best == 0:
                break
    return best, best_pattern
