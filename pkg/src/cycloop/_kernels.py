"""Compiled inner loops shared by the decomposition, chain and oracle modules.

Layout used throughout: every vertex ``x`` carries a sorted row of event
times ``ev_t[x, :ev_m[x]]`` (the times of bridges touching ``x``) and the
partner vertex of each event ``ev_p[x, j]``. Segment ``j`` of ``x`` is the
open time interval from event ``j`` to event ``j + 1`` (cyclically), so the
last segment is the one containing time 0. A vertex without events has a
single segment, index 0, covering the whole circle. ``seg_lab[x, j]`` is the
id of the cycle or loop that owns segment ``j``.

Cycles move up in time on every vertex. Loops move up on class-A vertices
and down on class-B vertices, so a bridge joins the two strands below it and
the two strands above it.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# status codes returned by chain_run
DONE = 0
NEED_GROW = 1
MISMATCH = 2
TIME_UP = 3

# layout of the int64 bookkeeping vector used by the chain kernel
NB, NOBJ, NFREE, STEPS, ACCEPTS, SPLITS, MERGES = range(7)
IV_SIZE = 7


@njit(cache=True)
def build_events(n, bu, bv, bt, cap_min):
    m = np.zeros(n, np.int64)
    for i in range(bu.size):
        m[bu[i]] += 1
        m[bv[i]] += 1
    cap = cap_min
    for x in range(n):
        if m[x] > cap:
            cap = m[x]
    ev_t = np.zeros((n, cap))
    ev_p = np.zeros((n, cap), np.int64)
    ev_m = np.zeros(n, np.int64)
    for i in range(bu.size):
        x, y = bu[i], bv[i]
        ev_t[x, ev_m[x]] = bt[i]
        ev_p[x, ev_m[x]] = y
        ev_m[x] += 1
        ev_t[y, ev_m[y]] = bt[i]
        ev_p[y, ev_m[y]] = x
        ev_m[y] += 1
    for x in range(n):
        k = ev_m[x]
        if k > 1:
            order = np.argsort(ev_t[x, :k], kind="mergesort")
            ev_t[x, :k] = ev_t[x, :k][order].copy()
            ev_p[x, :k] = ev_p[x, :k][order].copy()
    return ev_t, ev_p, ev_m


@njit(cache=True)
def find_event(ev_t, ev_m, x, t):
    """Index of the event at exactly time ``t`` on ``x``, or -1."""
    m = ev_m[x]
    i = np.searchsorted(ev_t[x, :m], t)
    if i < m and ev_t[x, i] == t:
        return i
    return -1


@njit(cache=True)
def segment_at(ev_t, ev_m, x, t):
    """Segment of ``x`` containing time ``t`` (approached from below)."""
    m = ev_m[x]
    if m == 0:
        return 0
    i = np.searchsorted(ev_t[x, :m], t)
    return (i - 1) % m


@njit(cache=True)
def last_segment(ev_m, x):
    return ev_m[x] - 1 if ev_m[x] > 0 else 0


@njit(cache=True)
def segment_length(ev_t, ev_m, beta, x, j):
    m = ev_m[x]
    if m <= 1:
        return beta
    jn = j + 1
    if jn == m:
        return ev_t[x, 0] + beta - ev_t[x, j]
    return ev_t[x, jn] - ev_t[x, j]


@njit(cache=True)
def next_segment(ev_t, ev_p, ev_m, is_a, loops, x, j):
    m = ev_m[x]
    if m == 0:
        return x, 0
    if (not loops) or is_a[x]:
        jn = j + 1
        if jn == m:
            jn = 0
        t = ev_t[x, jn]
        y = ev_p[x, jn]
        jy = find_event(ev_t, ev_m, y, t)
        if loops:
            jy -= 1
            if jy < 0:
                jy = ev_m[y] - 1
        return y, jy
    t = ev_t[x, j]
    y = ev_p[x, j]
    return y, find_event(ev_t, ev_m, y, t)


@njit(cache=True)
def trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, sx, sj, lab):
    """Give label ``lab`` to every segment on the trajectory through (sx, sj)."""
    x, j = sx, sj
    count = 0
    while True:
        seg_lab[x, j] = lab
        count += 1
        x, j = next_segment(ev_t, ev_p, ev_m, is_a, loops, x, j)
        if x == sx and j == sj:
            return count


@njit(cache=True)
def label_all(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg):
    """Label all segments from scratch; returns the number of objects."""
    n = ev_m.size
    for x in range(n):
        seg_lab[x, :] = -1
    lab = 0
    for x in range(n):
        top = ev_m[x] if ev_m[x] > 0 else 1
        for j in range(top):
            if seg_lab[x, j] < 0:
                nseg[lab] = trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, x, j, lab)
                lab += 1
    return lab


@njit(cache=True)
def object_stats(ev_t, ev_m, seg_lab, beta, sign, n_labels):
    """Per-label length, signed length and number of time-0 strands."""
    n = ev_m.size
    length = np.zeros(n_labels)
    signed = np.zeros(n_labels)
    strands = np.zeros(n_labels, np.int64)
    for x in range(n):
        top = ev_m[x] if ev_m[x] > 0 else 1
        for j in range(top):
            lab = seg_lab[x, j]
            d = segment_length(ev_t, ev_m, beta, x, j)
            length[lab] += d
            signed[lab] += sign[x] * d
        strands[seg_lab[x, top - 1]] += 1
    return length, signed, strands


@njit(cache=True)
def decompose(n, bu, bv, bt, beta, is_a, loops, sign):
    ev_t, ev_p, ev_m = build_events(n, bu, bv, bt, 1)
    seg_lab = np.empty_like(ev_p)
    nseg = np.zeros(n + bu.size + 1, np.int64)
    n_obj = label_all(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg)
    length, signed, strands = object_stats(ev_t, ev_m, seg_lab, beta, sign, n_obj)
    return ev_t, ev_p, ev_m, seg_lab, length, signed, strands


@njit(cache=True)
def identity_batch(n, eu, ev, beta, is_a, loops, sign, field, offsets, edge_ids, times):
    """Field weights for many Poisson configurations at once.

    For each configuration returns the product over objects of
    ``2 cosh(field * value)`` together with the object id and value seen
    from every vertex at time 0. The value is the length for cycles and the
    winding number for loops.
    """
    n_cfg = offsets.size - 1
    weight = np.empty(n_cfg)
    lab0 = np.empty((n_cfg, n), np.int64)
    val0 = np.empty((n_cfg, n))
    for s in range(n_cfg):
        lo, hi = offsets[s], offsets[s + 1]
        ids = edge_ids[lo:hi]
        bu = eu[ids]
        bv = ev[ids]
        ev_t, ev_p, ev_m, seg_lab, length, signed, strands = decompose(
            n, bu, bv, times[lo:hi], beta, is_a, loops, sign)
        n_obj = length.size
        value = np.empty(n_obj)
        w = 1.0
        for c in range(n_obj):
            value[c] = np.round(signed[c] / beta) if loops else length[c]
            w *= 2.0 * math.cosh(field * value[c])
        weight[s] = w
        for x in range(n):
            c = seg_lab[x, last_segment(ev_m, x)]
            lab0[s, x] = c
            val0[s, x] = value[c]
    return weight, lab0, val0


@njit(cache=True)
def contact_sweep(eu, ev, beta, ev_t, ev_m, seg_lab):
    """Split every edge timeline into intervals of constant endpoint labels.

    Returns parallel arrays (label at u, label at v, interval length, edge).
    """
    n_edges = eu.size
    total = 0
    for e in range(n_edges):
        total += ev_m[eu[e]] + ev_m[ev[e]] + 1
    out_a = np.empty(total, np.int64)
    out_b = np.empty(total, np.int64)
    out_len = np.empty(total)
    out_e = np.empty(total, np.int64)
    r = 0
    for e in range(n_edges):
        x, y = eu[e], ev[e]
        mx, my = ev_m[x], ev_m[y]
        lx = seg_lab[x, last_segment(ev_m, x)]
        ly = seg_lab[y, last_segment(ev_m, y)]
        px, py = 0, 0
        cur = 0.0
        while True:
            tx = ev_t[x, px] if px < mx else beta
            ty = ev_t[y, py] if py < my else beta
            nt = tx if tx < ty else ty
            if nt > cur:
                out_a[r] = lx
                out_b[r] = ly
                out_len[r] = nt - cur
                out_e[r] = e
                r += 1
            if nt >= beta:
                break
            if tx == nt:
                lx = seg_lab[x, px]
                px += 1
            if ty == nt:
                ly = seg_lab[y, py]
                py += 1
            cur = nt
    return out_a[:r], out_b[:r], out_len[:r], out_e[:r]


@njit(cache=True)
def bridge_sides(ev_t, ev_m, seg_lab, loops, bu, bv, bt):
    """Labels of the two objects meeting at each bridge.

    For cycles these are the strands just below the bridge on its two
    endpoints. For loops the strands below are always joined through the
    bridge, so the comparison is between the strands just below and just
    above on one endpoint.
    """
    k = bu.size
    la = np.empty(k, np.int64)
    lb = np.empty(k, np.int64)
    for i in range(k):
        x, y, t = bu[i], bv[i], bt[i]
        ix = find_event(ev_t, ev_m, x, t)
        la[i] = seg_lab[x, (ix - 1) % ev_m[x]]
        if loops:
            lb[i] = seg_lab[x, ix]
        else:
            iy = find_event(ev_t, ev_m, y, t)
            lb[i] = seg_lab[y, (iy - 1) % ev_m[y]]
    return la, lb


# ---------------------------------------------------------------------------------
# incremental chain

@njit(cache=True)
def _insert_event(ev_t, ev_p, ev_m, seg_lab, x, t, partner):
    m = ev_m[x]
    i = np.searchsorted(ev_t[x, :m], t)
    for j in range(m, i, -1):
        ev_t[x, j] = ev_t[x, j - 1]
        ev_p[x, j] = ev_p[x, j - 1]
        seg_lab[x, j] = seg_lab[x, j - 1]
    ev_t[x, i] = t
    ev_p[x, i] = partner
    if m > 0:
        seg_lab[x, i] = seg_lab[x, (i - 1) % (m + 1)]
    ev_m[x] = m + 1
    return i


@njit(cache=True)
def _remove_event(ev_t, ev_p, ev_m, seg_lab, x, i):
    """Drop event ``i``; returns the index of the merged segment."""
    m = ev_m[x]
    for j in range(i, m - 1):
        ev_t[x, j] = ev_t[x, j + 1]
        ev_p[x, j] = ev_p[x, j + 1]
        seg_lab[x, j] = seg_lab[x, j + 1]
    ev_m[x] = m - 1
    if m - 1 == 0:
        return 0
    return (i - 1) % (m - 1)


@njit(cache=True)
def insert_delta(ev_t, ev_m, seg_lab, x, y, t):
    """+1 if a bridge at (x, y, t) would split an object, -1 if it merges two."""
    a = seg_lab[x, segment_at(ev_t, ev_m, x, t)]
    b = seg_lab[y, segment_at(ev_t, ev_m, y, t)]
    return 1 if a == b else -1


@njit(cache=True)
def remove_delta(ev_t, ev_m, seg_lab, loops, x, y, t):
    ix = find_event(ev_t, ev_m, x, t)
    a = seg_lab[x, (ix - 1) % ev_m[x]]
    if loops:
        b = seg_lab[x, ix]
    else:
        iy = find_event(ev_t, ev_m, y, t)
        b = seg_lab[y, (iy - 1) % ev_m[y]]
    return 1 if a == b else -1


@njit(cache=True)
def apply_insert(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, free_stack, iv, x, y, t):
    jx = segment_at(ev_t, ev_m, x, t)
    jy = segment_at(ev_t, ev_m, y, t)
    a = seg_lab[x, jx]
    b = seg_lab[y, jy]
    grow = (1 if ev_m[x] > 0 else 0) + (1 if ev_m[y] > 0 else 0)
    if a != b:
        # merge: relabel the smaller object before the structure changes
        if nseg[a] >= nseg[b]:
            big, small, sx, sj = a, b, y, jy
        else:
            big, small, sx, sj = b, a, x, jx
        trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, sx, sj, big)
        nseg[big] += nseg[small]
        nseg[small] = 0
        free_stack[iv[NFREE]] = small
        iv[NFREE] += 1
        iv[NOBJ] -= 1
        iv[MERGES] += 1
        _insert_event(ev_t, ev_p, ev_m, seg_lab, x, t, y)
        _insert_event(ev_t, ev_p, ev_m, seg_lab, y, t, x)
        nseg[big] += grow
    else:
        ix = _insert_event(ev_t, ev_p, ev_m, seg_lab, x, t, y)
        _insert_event(ev_t, ev_p, ev_m, seg_lab, y, t, x)
        nseg[a] += grow
        iv[NFREE] -= 1
        c = free_stack[iv[NFREE]]
        cnt = trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, x, ix, c)
        nseg[c] = cnt
        nseg[a] -= cnt
        iv[NOBJ] += 1
        iv[SPLITS] += 1


@njit(cache=True)
def apply_remove(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, free_stack, iv, x, y, t):
    ix = find_event(ev_t, ev_m, x, t)
    iy = find_event(ev_t, ev_m, y, t)
    jxa = (ix - 1) % ev_m[x]
    a = seg_lab[x, jxa]
    if loops:
        sbx, sbj = x, ix
    else:
        sbx, sbj = y, (iy - 1) % ev_m[y]
    b = seg_lab[sbx, sbj]
    shrink = (1 if ev_m[x] > 1 else 0) + (1 if ev_m[y] > 1 else 0)
    if a != b:
        if nseg[a] >= nseg[b]:
            big, small, sx, sj = a, b, sbx, sbj
        else:
            big, small, sx, sj = b, a, x, jxa
        trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, sx, sj, big)
        nseg[big] += nseg[small]
        nseg[small] = 0
        free_stack[iv[NFREE]] = small
        iv[NFREE] += 1
        iv[NOBJ] -= 1
        iv[MERGES] += 1
        _remove_event(ev_t, ev_p, ev_m, seg_lab, x, ix)
        _remove_event(ev_t, ev_p, ev_m, seg_lab, y, iy)
        nseg[big] -= shrink
    else:
        jm = _remove_event(ev_t, ev_p, ev_m, seg_lab, x, ix)
        _remove_event(ev_t, ev_p, ev_m, seg_lab, y, iy)
        nseg[a] -= shrink
        iv[NFREE] -= 1
        c = free_stack[iv[NFREE]]
        cnt = trace_relabel(ev_t, ev_p, ev_m, is_a, loops, seg_lab, x, jm, c)
        nseg[c] = cnt
        nseg[a] -= cnt
        iv[NOBJ] += 1
        iv[SPLITS] += 1


@njit(cache=True)
def labels_consistent(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, n_obj):
    """Compare the maintained labelling with a fresh one, up to renaming."""
    n = ev_m.size
    fresh = np.empty_like(seg_lab)
    fresh_nseg = np.zeros(nseg.size + n + 1, np.int64)
    k = label_all(ev_t, ev_p, ev_m, is_a, loops, fresh, fresh_nseg)
    if k != n_obj:
        return False
    to_old = np.full(k, -1, np.int64)
    to_new = np.full(nseg.size, -1, np.int64)
    for x in range(n):
        top = ev_m[x] if ev_m[x] > 0 else 1
        for j in range(top):
            f, o = fresh[x, j], seg_lab[x, j]
            if to_old[f] < 0 and to_new[o] < 0:
                to_old[f] = o
                to_new[o] = f
            elif to_old[f] != o or to_new[o] != f:
                return False
    for f in range(k):
        if nseg[to_old[f]] != fresh_nseg[f]:
            return False
    return True


@njit(cache=True)
def chain_run(u, start, stop, continuous, t_stop, debug, eu, ev, beta, theta, loops, is_a,
              ev_t, ev_p, ev_m, seg_lab, nseg, free_stack, br_u, br_v, br_e, br_t, iv, clock):
    """Advance the chain using rows ``start..stop-1`` of the uniform table ``u``.

    Each row holds five uniforms: move type, location/choice, time,
    acceptance and (continuous time only) the holding time. Returns the next
    unused row and a status code. A row is not consumed when storage must
    grow, so the caller can enlarge the arrays and resume exactly.
    """
    n_edges = eu.size
    cap = ev_t.shape[1]
    bcap = br_u.size
    root = math.sqrt(theta)
    rmax = root if root > 1.0 / root else 1.0 / root
    for i in range(start, stop):
        k = iv[NB]
        if continuous:
            r_ins = rmax * beta * n_edges
            r_tot = r_ins + rmax * k
            hold = -math.log(1.0 - u[i, 4]) / r_tot
            if clock[0] + hold > t_stop:
                clock[0] = t_stop
                return i + 1, TIME_UP
            clock[0] += hold
            do_insert = u[i, 0] * r_tot < r_ins
        else:
            do_insert = u[i, 0] < 0.5
        iv[STEPS] += 1
        accepted = False
        if do_insert:
            e = int(u[i, 1] * n_edges)
            if e >= n_edges:
                e = n_edges - 1
            t = u[i, 2] * beta
            if t >= beta:
                t = np.nextafter(beta, 0.0)
            x, y = eu[e], ev[e]
            if find_event(ev_t, ev_m, x, t) >= 0 or find_event(ev_t, ev_m, y, t) >= 0:
                continue
            if ev_m[x] + 1 >= cap or ev_m[y] + 1 >= cap or k + 1 >= bcap or iv[NFREE] == 0:
                iv[STEPS] -= 1
                if continuous:
                    clock[0] -= hold
                return i, NEED_GROW
            delta = insert_delta(ev_t, ev_m, seg_lab, x, y, t)
            if continuous:
                accepted = u[i, 3] * rmax < root ** delta
            else:
                accepted = u[i, 3] < theta ** delta * beta * n_edges / (k + 1)
            if accepted:
                apply_insert(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, free_stack, iv, x, y, t)
                br_u[k] = x
                br_v[k] = y
                br_e[k] = e
                br_t[k] = t
                iv[NB] = k + 1
        else:
            if k == 0:
                continue
            b = int(u[i, 1] * k)
            if b >= k:
                b = k - 1
            x, y, t = br_u[b], br_v[b], br_t[b]
            if iv[NFREE] == 0:
                iv[STEPS] -= 1
                if continuous:
                    clock[0] -= hold
                return i, NEED_GROW
            delta = remove_delta(ev_t, ev_m, seg_lab, loops, x, y, t)
            if continuous:
                accepted = u[i, 3] * rmax < root ** delta
            else:
                accepted = u[i, 3] < theta ** delta * k / (beta * n_edges)
            if accepted:
                apply_remove(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, free_stack, iv, x, y, t)
                last = k - 1
                br_u[b] = br_u[last]
                br_v[b] = br_v[last]
                br_e[b] = br_e[last]
                br_t[b] = br_t[last]
                iv[NB] = last
        if accepted:
            iv[ACCEPTS] += 1
            if debug and not labels_consistent(ev_t, ev_p, ev_m, is_a, loops, seg_lab, nseg, iv[NOBJ]):
                return i + 1, MISMATCH
    return stop, DONE


@njit(cache=True)
def vertex_lengths(ev_t, ev_m, seg_lab, beta, n_labels):
    """Length of the object through (x, 0) for every vertex x."""
    n = ev_m.size
    length = np.zeros(n_labels)
    for x in range(n):
        top = ev_m[x] if ev_m[x] > 0 else 1
        for j in range(top):
            length[seg_lab[x, j]] += segment_length(ev_t, ev_m, beta, x, j)
    out = np.empty(n)
    for x in range(n):
        out[x] = length[seg_lab[x, last_segment(ev_m, x)]]
    return out
