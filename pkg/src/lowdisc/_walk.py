"""Constrained Gaussian walk over the fractional coloring cube.

The state lives in [-1, 1]^N subject to |sum_{i in M} x_i| <= delta_M per
constraint row. Each step draws a Gaussian direction, projects it orthogonal
to the normals of all tight rows (restricted to unfrozen coordinates), and
moves to the first face hit: a coordinate reaching +-1 freezes for good, a
row reaching +-delta joins the tight basis. The walk ends when enough
coordinates froze, when no free direction is left, or on the step budget.

Implementation notes, all load-bearing:
- The tight basis keeps only rows with independent live-restricted normals;
  (A A^T)^-1 is maintained by bordered updates on row admission and
  Sherman-Morrison downdates on coordinate freezes, with periodic exact
  rebuilds. Rows whose normals are dependent stay tight (projection already
  preserves their sums) but are re-tested when a freeze touches them, since
  freezing can break a dependency.
- Row sums are tracked incrementally only for "awake" rows. A sleeping row
  holds a wake threshold on the cumulative walk length: its sum cannot move
  past slack before sqrt(live support) times the accumulated gamma*t*|g|_2
  exceeds slack (Cauchy-Schwarz), so sleeping is sound, and the live support
  only shrinks which keeps stored lengths conservative.
- Gaussian directions are pregenerated in chunks by the caller (status 0
  asks for a fresh chunk), keeping the stream independent of numba's RNG.
"""

import numpy as np
from numba import njit

ASLEEP = 0
AWAKE = 1
BASIS = 2
DEPTIGHT = 3
DONE = 4

SNAP = 1e-9
FACE_EPS = 1e-9
SCHUR_TOL = 1e-8

# status codes
NEED_CHUNK = 0
SUCCESS = 1
RANK_EXHAUSTED = 2
STEP_BUDGET = 3

# icnt layout
I_STEP = 0
I_FROZEN = 1
I_TINY = 2
I_EVENTS = 3
I_SINCE_REFRESH = 4
I_BSIZE = 5
I_WAKES = 6
I_DONE = 7
I_CHUNKPOS = 8
I_LATE = 9
ICNT_LEN = 10

# fcnt layout
F_CUM = 0
F_VIOL = 1
FCNT_LEN = 2


@njit(cache=True, inline="always")
def _row_contains(indptr, indices, r, c):
    lo, hi = indptr[r], indptr[r + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == c:
            return True
        if v < c:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True)
def _row_sum_livelen(indptr, indices, x, live, r):
    s = 0.0
    ll = np.int64(0)
    for t in range(indptr[r], indptr[r + 1]):
        i = indices[t]
        s += x[i]
        if live[i]:
            ll += 1
    return s, ll


@njit(cache=True)
def _live_inter(indptr, indices, live, a, b):
    ta, ea = indptr[a], indptr[a + 1]
    tb, eb = indptr[b], indptr[b + 1]
    c = 0.0
    while ta < ea and tb < eb:
        va, vb = indices[ta], indices[tb]
        if va == vb:
            if live[va]:
                c += 1.0
            ta += 1
            tb += 1
        elif va < vb:
            ta += 1
        else:
            tb += 1
    return c


@njit(cache=True)
def _heap_push(heap_thr, heap_row, hsize, t, r):
    i = hsize
    heap_thr[i] = t
    heap_row[i] = r
    while i > 0:
        p = (i - 1) >> 1
        if heap_thr[p] <= heap_thr[i]:
            break
        heap_thr[p], heap_thr[i] = heap_thr[i], heap_thr[p]
        heap_row[p], heap_row[i] = heap_row[i], heap_row[p]
        i = p
    return hsize + 1


@njit(cache=True)
def _heap_pop(heap_thr, heap_row, hsize):
    r = heap_row[0]
    last = hsize - 1
    heap_thr[0] = heap_thr[last]
    heap_row[0] = heap_row[last]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= last:
            break
        sm = l
        rgt = l + 1
        if rgt < last and heap_thr[rgt] < heap_thr[l]:
            sm = rgt
        if heap_thr[i] <= heap_thr[sm]:
            break
        heap_thr[i], heap_thr[sm] = heap_thr[sm], heap_thr[i]
        heap_row[i], heap_row[sm] = heap_row[sm], heap_row[i]
        i = sm
    return r, last


@njit(cache=True)
def _try_add_basis(indptr, indices, live, r, basis_rows, bsize, minv):
    """Admit row r to the tight basis if its live normal is independent.

    Returns the new basis size, -1 when dependent, -2 when r has no live
    support. minv stays the exact inverse of the live-restricted Gram.
    """
    aa = 0.0
    for t in range(indptr[r], indptr[r + 1]):
        if live[indices[t]]:
            aa += 1.0
    if aa == 0.0:
        return -2
    B = bsize
    if B + 1 >= minv.shape[0]:
        return -1
    v = np.empty(B, dtype=np.float64)
    for bi in range(B):
        v[bi] = _live_inter(indptr, indices, live, r, basis_rows[bi])
    w = np.zeros(B, dtype=np.float64)
    for a in range(B):
        acc = 0.0
        for b in range(B):
            acc += minv[a, b] * v[b]
        w[a] = acc
    quad = 0.0
    for a in range(B):
        quad += v[a] * w[a]
    beta = aa - quad
    if beta <= SCHUR_TOL * aa:
        return -1
    inv_beta = 1.0 / beta
    for a in range(B):
        wa = w[a]
        for b in range(B):
            minv[a, b] += wa * w[b] * inv_beta
        minv[a, B] = -wa * inv_beta
        minv[B, a] = -wa * inv_beta
    minv[B, B] = inv_beta
    basis_rows[B] = r
    return B + 1


@njit(cache=True)
def _downdate_freeze(indptr, indices, basis_rows, bsize, minv, c):
    """Drop coordinate c from the basis Gram. False means singular: rebuild."""
    B = bsize
    u = np.zeros(B, dtype=np.float64)
    any_u = False
    for bi in range(B):
        if _row_contains(indptr, indices, basis_rows[bi], c):
            u[bi] = 1.0
            any_u = True
    if not any_u:
        return True
    w = np.zeros(B, dtype=np.float64)
    for a in range(B):
        acc = 0.0
        for b in range(B):
            acc += minv[a, b] * u[b]
        w[a] = acc
    d = 1.0
    for a in range(B):
        d -= u[a] * w[a]
    if d <= SCHUR_TOL:
        return False
    inv_d = 1.0 / d
    for a in range(B):
        wa = w[a]
        for b in range(B):
            minv[a, b] += wa * w[b] * inv_d
    return True


@njit(cache=True)
def _rebuild_basis(indptr, indices, live, row_state, basis_rows, bsize, minv, dep_rows, ndep):
    """Re-derive the basis from every currently tight row.

    Current basis rows are re-added first to keep the admission stable, then
    dependents get a chance to re-enter. Returns (new bsize, new ndep,
    rows newly done).
    """
    total = bsize + ndep
    tmp = np.empty(total, dtype=np.int64)
    t = 0
    for bi in range(bsize):
        tmp[t] = basis_rows[bi]
        t += 1
    for di in range(ndep):
        r = dep_rows[di]
        if row_state[r] == DEPTIGHT:
            tmp[t] = r
            t += 1
    B = 0
    nd = 0
    ndone = 0
    minv[:, :] = 0.0
    for q in range(t):
        r = tmp[q]
        res = _try_add_basis(indptr, indices, live, r, basis_rows, B, minv)
        if res >= 0:
            B = res
            row_state[r] = BASIS
        elif res == -1:
            row_state[r] = DEPTIGHT
            dep_rows[nd] = r
            nd += 1
        else:
            row_state[r] = DONE
            ndone += 1
    return B, nd, ndone


@njit(cache=True)
def walk_kernel(
    indptr,
    indices,
    deltas,
    x,
    live,
    sums,
    live_len,
    row_state,
    heap_thr,
    heap_row,
    hstate,
    awake,
    astate,
    basis_rows,
    minv,
    dep_rows,
    dstate,
    icnt,
    fcnt,
    gauss,
    gamma,
    gcap2,
    target_frozen,
    max_steps,
    sleep_gap,
):
    R = deltas.shape[0]
    N = x.shape[0]
    g = np.empty(N, dtype=np.float64)
    ds = np.empty(R if R > 0 else 1, dtype=np.float64)

    while True:
        if icnt[I_FROZEN] >= target_frozen:
            return SUCCESS
        if icnt[I_STEP] >= max_steps:
            return STEP_BUDGET
        B = icnt[I_BSIZE]
        if N - icnt[I_FROZEN] - B <= 0:
            return RANK_EXHAUSTED
        if icnt[I_CHUNKPOS] >= gauss.shape[0]:
            return NEED_CHUNK

        # wake sleeping rows whose sums might have moved near a face
        cum = fcnt[F_CUM]
        while hstate[0] > 0 and heap_thr[0] <= cum:
            r, hstate[0] = _heap_pop(heap_thr, heap_row, hstate[0])
            if row_state[r] != ASLEEP:
                continue
            s, ll = _row_sum_livelen(indptr, indices, x, live, r)
            sums[r] = s
            live_len[r] = ll
            if ll == 0:
                row_state[r] = DONE
                icnt[I_DONE] += 1
                v = abs(s) - deltas[r]
                if v > fcnt[F_VIOL]:
                    fcnt[F_VIOL] = v
                continue
            icnt[I_WAKES] += 1
            slack = deltas[r] - abs(s)
            if slack <= FACE_EPS:
                if slack < -1e-6:
                    icnt[I_LATE] += 1
                sums[r] = deltas[r] if s > 0 else -deltas[r]
                res = _try_add_basis(indptr, indices, live, r, basis_rows, B, minv)
                if res >= 0:
                    B = res
                    icnt[I_BSIZE] = B
                    row_state[r] = BASIS
                elif res == -1:
                    row_state[r] = DEPTIGHT
                    dep_rows[dstate[0]] = r
                    dstate[0] += 1
                else:
                    row_state[r] = DONE
                    icnt[I_DONE] += 1
                icnt[I_EVENTS] += 1
                continue
            gap = slack / np.sqrt(ll)
            if gap >= sleep_gap:
                hstate[0] = _heap_push(heap_thr, heap_row, hstate[0], cum + gap, r)
            else:
                row_state[r] = AWAKE
                awake[astate[0]] = r
                astate[0] += 1

        # direction: fresh Gaussian on live coordinates
        cp = icnt[I_CHUNKPOS]
        icnt[I_CHUNKPOS] = cp + 1
        gn2_raw = 0.0
        for i in range(N):
            if live[i]:
                g[i] = gauss[cp, i]
                gn2_raw += g[i] * g[i]
            else:
                g[i] = 0.0

        # project orthogonal to the tight basis over live coordinates
        if B > 0:
            p = np.empty(B, dtype=np.float64)
            for bi in range(B):
                r = basis_rows[bi]
                acc = 0.0
                for t in range(indptr[r], indptr[r + 1]):
                    i = indices[t]
                    if live[i]:
                        acc += g[i]
                p[bi] = acc
            w = np.zeros(B, dtype=np.float64)
            for a in range(B):
                acc = 0.0
                for b in range(B):
                    acc += minv[a, b] * p[b]
                w[a] = acc
            for bi in range(B):
                wb = w[bi]
                if wb != 0.0:
                    r = basis_rows[bi]
                    for t in range(indptr[r], indptr[r + 1]):
                        i = indices[t]
                        if live[i]:
                            g[i] -= wb

        gn2 = 0.0
        for i in range(N):
            gn2 += g[i] * g[i]
        if gn2 <= 1e-12 * (gn2_raw + 1e-300):
            icnt[I_TINY] += 1
            icnt[I_STEP] += 1
            if icnt[I_TINY] >= 8:
                return RANK_EXHAUSTED
            continue
        icnt[I_TINY] = 0
        if gn2 > gcap2:
            sc = np.sqrt(gcap2 / gn2)
            for i in range(N):
                g[i] *= sc
            gn2 = gcap2

        # first face: coordinates, then awake rows
        tstar = 1.0
        for i in range(N):
            gi = g[i]
            if live[i] and gi != 0.0:
                tgt = 1.0 if gi > 0.0 else -1.0
                t = (tgt - x[i]) / (gamma * gi)
                if t < tstar:
                    tstar = t
        na = astate[0]
        for ai in range(na):
            r = awake[ai]
            acc = 0.0
            for t in range(indptr[r], indptr[r + 1]):
                i = indices[t]
                if live[i]:
                    acc += g[i]
            ds[ai] = acc
            if acc != 0.0:
                tgt = deltas[r] if acc > 0.0 else -deltas[r]
                tr = (tgt - sums[r]) / (gamma * acc)
                if tr < tstar:
                    tstar = tr
        if tstar < 0.0:
            tstar = 0.0

        step_len = gamma * tstar
        for i in range(N):
            if live[i]:
                x[i] += step_len * g[i]
        for ai in range(na):
            sums[awake[ai]] += step_len * ds[ai]
        fcnt[F_CUM] += step_len * np.sqrt(gn2)
        icnt[I_STEP] += 1
        icnt[I_SINCE_REFRESH] += 1

        # coordinate freezes, one at a time so the basis stays consistent
        rebuild_needed = False
        for i in range(N):
            if not live[i]:
                continue
            if x[i] >= 1.0 - SNAP:
                x[i] = 1.0
            elif x[i] <= -1.0 + SNAP:
                x[i] = -1.0
            else:
                continue
            live[i] = False
            icnt[I_FROZEN] += 1
            icnt[I_EVENTS] += 1
            if not rebuild_needed and B > 0:
                if not _downdate_freeze(indptr, indices, basis_rows, B, minv, i):
                    rebuild_needed = True
            # a freeze can break a dependency: re-test dependents touching i
            if not rebuild_needed and dstate[0] > 0:
                nd = dstate[0]
                wpos = 0
                for di in range(nd):
                    r = dep_rows[di]
                    keep = row_state[r] == DEPTIGHT
                    if keep and _row_contains(indptr, indices, r, i):
                        res = _try_add_basis(indptr, indices, live, r, basis_rows, B, minv)
                        if res >= 0:
                            B = res
                            row_state[r] = BASIS
                            keep = False
                        elif res == -2:
                            row_state[r] = DONE
                            icnt[I_DONE] += 1
                            v = abs(sums[r]) - deltas[r]
                            if v > fcnt[F_VIOL]:
                                fcnt[F_VIOL] = v
                            keep = False
                    if keep:
                        dep_rows[wpos] = r
                        wpos += 1
                dstate[0] = wpos

        # row face hits and re-sleeping, compacting the awake list
        wpos = 0
        for ai in range(na):
            r = awake[ai]
            s = sums[r]
            keep = True
            if abs(s) >= deltas[r] - FACE_EPS:
                sums[r] = deltas[r] if s > 0.0 else -deltas[r]
                icnt[I_EVENTS] += 1
                keep = False
                if rebuild_needed:
                    row_state[r] = DEPTIGHT
                    dep_rows[dstate[0]] = r
                    dstate[0] += 1
                else:
                    res = _try_add_basis(indptr, indices, live, r, basis_rows, B, minv)
                    if res >= 0:
                        B = res
                        row_state[r] = BASIS
                    elif res == -1:
                        row_state[r] = DEPTIGHT
                        dep_rows[dstate[0]] = r
                        dstate[0] += 1
                    else:
                        row_state[r] = DONE
                        icnt[I_DONE] += 1
            else:
                slack = deltas[r] - abs(s)
                gap = slack / np.sqrt(live_len[r])
                if gap >= sleep_gap:
                    row_state[r] = ASLEEP
                    hstate[0] = _heap_push(heap_thr, heap_row, hstate[0], fcnt[F_CUM] + gap, r)
                    keep = False
            if keep:
                awake[wpos] = r
                wpos += 1
        astate[0] = wpos
        icnt[I_BSIZE] = B

        if rebuild_needed or icnt[I_EVENTS] >= 512:
            B, nd, ndone = _rebuild_basis(
                indptr, indices, live, row_state, basis_rows, B, minv, dep_rows, dstate[0]
            )
            icnt[I_BSIZE] = B
            dstate[0] = nd
            icnt[I_DONE] += ndone
            icnt[I_EVENTS] = 0

        if icnt[I_SINCE_REFRESH] >= 8192:
            icnt[I_SINCE_REFRESH] = 0
            for r in range(R):
                st = row_state[r]
                if st == AWAKE or st == BASIS or st == DEPTIGHT:
                    s, ll = _row_sum_livelen(indptr, indices, x, live, r)
                    live_len[r] = ll
                    if st == AWAKE:
                        sums[r] = s
                    v = abs(s) - deltas[r]
                    if v > fcnt[F_VIOL]:
                        fcnt[F_VIOL] = v
