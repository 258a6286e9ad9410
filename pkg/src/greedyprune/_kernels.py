"""Compiled inner loops (numba).

Everything here is deterministic: single-threaded kernels, no fastmath,
and all randomness comes in as explicit 64-bit keys so results never
depend on call order or thread count.  The splitmix64 mixer below is the
bit-exact twin of randomization.mix64.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U = np.uint64


@njit(cache=True, nogil=True)
def _mix(z):
    z = z + _U(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


@njit(cache=True, nogil=True)
def node_key(key, path):
    """Key for a tree node addressed by its root-to-node path bits."""
    return _mix(_mix(key) ^ path)


@njit(cache=True, nogil=True)
def _subset_features(k_total, m, key, path, perm):
    """Write m distinct feature ids (sorted ascending) into perm[:m].

    Draws come from a counter-style stream keyed by (tree, node path), so
    a node's candidate set is independent of how its siblings were grown.
    """
    for i in range(k_total):
        perm[i] = i
    state = node_key(key, path)
    for i in range(m):
        state = _mix(state)
        j = i + np.int64(state % _U(k_total - i))
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    for i in range(1, m):
        v = perm[i]
        j = i - 1
        while j >= 0 and perm[j] > v:
            perm[j + 1] = perm[j]
            j -= 1
        perm[j + 1] = v


@njit(cache=True, nogil=True)
def _node_stats(yv, idx, lo, hi):
    n = hi - lo
    s = 0.0
    for i in range(lo, hi):
        s += yv[idx[i]]
    mean = s / n
    sse = 0.0
    mn = yv[idx[lo]]
    mx = mn
    for i in range(lo, hi):
        v = yv[idx[i]]
        d = v - mean
        sse += d * d
        if v < mn:
            mn = v
        if v > mx:
            mx = v
    return mean, sse, mn == mx


@njit(cache=True, nogil=True)
def scan_split(Xf, yv, idx, lo, hi, cand, min_child, rel_tol, mean, sse_p, xbuf, ybuf):
    """Lowest-SSE cut over candidate features and consecutive-distinct midpoints.

    Candidates are scanned in the order given (callers pass them ascending)
    and cuts in ascending threshold order; a cut only displaces the current
    best when it improves by more than rel_tol * parent SSE, which makes
    tie-breaking float-noise-proof: lowest feature index, then lowest
    threshold.  Returns (feature, threshold, n_left); feature == -1 means
    no admissible SSE-reducing cut exists.
    """
    n = hi - lo
    tol = rel_tol * sse_p
    best = sse_p
    best_feat = np.int64(-1)
    best_cut = 0.0
    best_nl = np.int64(0)
    for ci in range(cand.shape[0]):
        k = cand[ci]
        for i in range(n):
            xbuf[i] = Xf[idx[lo + i], k]
        o = np.argsort(xbuf[:n])
        tot = 0.0
        tot2 = 0.0
        for i in range(n):
            v = yv[idx[lo + o[i]]] - mean
            ybuf[i] = v
            tot += v
            tot2 += v * v
        run = 0.0
        for i in range(n - 1):
            run += ybuf[i]
            xi = xbuf[o[i]]
            xn = xbuf[o[i + 1]]
            if xn > xi:
                nl = i + 1
                nr = n - nl
                if nl >= min_child and nr >= min_child:
                    rem = tot - run
                    cur = tot2 - run * run / nl - rem * rem / nr
                    if cur < best - tol:
                        best = cur
                        best_feat = k
                        mid = xi + 0.5 * (xn - xi)
                        if mid >= xn:
                            mid = xi
                        best_cut = mid
                        best_nl = np.int64(nl)
    return best_feat, best_cut, best_nl


@njit(cache=True, nogil=True)
def grow_core(Xf, yv, rows0, min_node, max_depth, m_feats, tree_key, rel_tol):
    """Depth-first recursive partitioning; returns flat node arrays.

    Nodes are recorded in preorder (left subtree first).  max_depth < 0
    means unlimited.  m_feats >= k disables per-node feature sampling and
    consumes no randomness at all.
    """
    k_total = Xf.shape[1]
    n0 = rows0.shape[0]
    cap = 2 * n0 + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.float64)
    count = np.zeros(cap, np.int64)
    sse = np.zeros(cap, np.float64)
    depth_a = np.zeros(cap, np.int64)
    idx = rows0.copy()
    xbuf = np.empty(n0, np.float64)
    ybuf = np.empty(n0, np.float64)
    tbuf = np.empty(n0, np.int64)
    perm = np.empty(k_total, np.int64)
    cand_all = np.arange(k_total)
    smax = n0 + 2
    st_lo = np.empty(smax, np.int64)
    st_hi = np.empty(smax, np.int64)
    st_node = np.empty(smax, np.int64)
    st_depth = np.empty(smax, np.int64)
    st_path = np.empty(smax, np.uint64)
    st_lo[0] = 0
    st_hi[0] = n0
    st_node[0] = 0
    st_depth[0] = 0
    st_path[0] = _U(1)
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        lo = st_lo[top]
        hi = st_hi[top]
        node = st_node[top]
        dep = st_depth[top]
        path = st_path[top]
        n = hi - lo
        mean, s, pure = _node_stats(yv, idx, lo, hi)
        value[node] = mean
        count[node] = n
        sse[node] = s
        depth_a[node] = dep
        if n < 2 * min_node or pure:
            continue
        if max_depth >= 0 and dep >= max_depth:
            continue
        if m_feats >= k_total:
            cand = cand_all
        else:
            _subset_features(k_total, m_feats, tree_key, path, perm)
            cand = perm[:m_feats]
        bf, cut, nl = scan_split(
            Xf, yv, idx, lo, hi, cand, min_node, rel_tol, mean, s, xbuf, ybuf
        )
        if bf < 0:
            continue
        a = 0
        for i in range(lo, hi):
            rr = idx[i]
            if Xf[rr, bf] <= cut:
                tbuf[a] = rr
                a += 1
        for i in range(lo, hi):
            rr = idx[i]
            if Xf[rr, bf] > cut:
                tbuf[a] = rr
                a += 1
        for i in range(n):
            idx[lo + i] = tbuf[i]
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        feat[node] = bf
        thr[node] = cut
        left[node] = l_id
        right[node] = r_id
        st_lo[top] = lo + nl
        st_hi[top] = hi
        st_node[top] = r_id
        st_depth[top] = dep + 1
        st_path[top] = path * _U(2) + _U(1)
        top += 1
        st_lo[top] = lo
        st_hi[top] = lo + nl
        st_node[top] = l_id
        st_depth[top] = dep + 1
        st_path[top] = path * _U(2)
        top += 1
    return (
        feat[:n_nodes].copy(),
        thr[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
        sse[:n_nodes].copy(),
        depth_a[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def route_mean(X, feat, thr, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@njit(cache=True, nogil=True)
def route_mean_collapsed(X, feat, thr, left, right, value, collapsed, out):
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0 and collapsed[node] == 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@njit(cache=True, nogil=True)
def mars_scan_feature(xcol, order, Braw, par_ids, Qt, q_used, r, piv_tol):
    """Best SSE reduction over all (parent, knot) hinge pairs for one feature.

    xcol: (n,) raw feature values; order: ascending argsort of xcol.
    Braw: (cap, n) raw basis function rows; par_ids selects eligible parents.
    Qt: (n, cap) orthonormal basis columns (first q_used valid); r: residual,
    already orthogonal to those columns.

    For parent z and knot t the pair is u = z*(x-t)+, v = z*(t-x)+ and the
    exact joint SSE reduction comes from a 2x2 solve in the basis-orthogonal
    complement.  All knot positions for one parent are swept in a single
    descending pass over sorted rows (suffix sums give the u side, totals
    minus suffix give the v side); rows where the parent is zero add nothing
    and are skipped, so the cost is O((nnz + distinct values) * q) per parent.
    Returns (reduction, parent_position, knot); parent_position == -1 when
    no candidate is numerically usable.
    """
    n = xcol.shape[0]
    q = q_used
    best_red = 0.0
    best_pp = np.int64(-1)
    best_knot = 0.0
    c = np.empty(q, np.float64)
    d = np.empty(q, np.float64)
    tc = np.empty(q, np.float64)
    td = np.empty(q, np.float64)
    gc = np.empty(q, np.float64)
    gd = np.empty(q, np.float64)
    for pp in range(par_ids.shape[0]):
        pid = par_ids[pp]
        tzr = 0.0
        tzrx = 0.0
        tzz = 0.0
        tzzx = 0.0
        tzzxx = 0.0
        for a in range(q):
            tc[a] = 0.0
            td[a] = 0.0
        for i in range(n):
            z = Braw[pid, i]
            if z == 0.0:
                continue
            x = xcol[i]
            zr = z * r[i]
            zz = z * z
            tzr += zr
            tzrx += zr * x
            tzz += zz
            tzzx += zz * x
            tzzxx += zz * x * x
            zx = z * x
            for a in range(q):
                qa = Qt[i, a]
                tc[a] += qa * z
                td[a] += qa * zx
        if tzz == 0.0:
            continue
        szr = 0.0
        szrx = 0.0
        szz = 0.0
        szzx = 0.0
        szzxx = 0.0
        for a in range(q):
            c[a] = 0.0
            d[a] = 0.0
        for a in range(q):
            gc[a] = 0.0
            gd[a] = 0.0
        gdirty = False
        i = n - 1
        while i >= 0:
            t = xcol[order[i]]
            gzr = 0.0
            gzrx = 0.0
            gzz = 0.0
            gzzx = 0.0
            gzzxx = 0.0
            if gdirty:
                for a in range(q):
                    gc[a] = 0.0
                    gd[a] = 0.0
                gdirty = False
            j = i
            while j >= 0 and xcol[order[j]] == t:
                row = order[j]
                z = Braw[pid, row]
                if z != 0.0:
                    zr = z * r[row]
                    zz = z * z
                    gzr += zr
                    gzrx += zr * t
                    gzz += zz
                    gzzx += zz * t
                    gzzxx += zz * t * t
                    zx = z * t
                    for a in range(q):
                        qa = Qt[row, a]
                        gc[a] += qa * z
                        gd[a] += qa * zx
                    gdirty = True
                j -= 1
            ru = szrx - t * szr
            uu = szzxx - 2.0 * t * szzx + t * t * szz
            uscale = szzxx + 2.0 * abs(t * szzx) + t * t * szz
            pzr = tzr - szr - gzr
            pzrx = tzrx - szrx - gzrx
            pzz = tzz - szz - gzz
            pzzx = tzzx - szzx - gzzx
            pzzxx = tzzxx - szzxx - gzzxx
            rv = t * pzr - pzrx
            vv = t * t * pzz - 2.0 * t * pzzx + pzzxx
            vscale = t * t * pzz + 2.0 * abs(t * pzzx) + abs(pzzxx)
            nu = 0.0
            nv = 0.0
            guv = 0.0
            for a in range(q):
                du = d[a] - t * c[a]
                pc = tc[a] - c[a] - gc[a]
                pd = td[a] - d[a] - gd[a]
                dv = t * pc - pd
                nu += du * du
                nv += dv * dv
                guv -= du * dv
                c[a] += gc[a]
                d[a] += gd[a]
            guu = uu - nu
            gvv = vv - nv
            ok_u = uu > 0.0 and guu > piv_tol * uscale
            ok_v = vv > 0.0 and gvv > piv_tol * vscale
            red = 0.0
            if ok_u and ok_v:
                det = guu * gvv - guv * guv
                if det > 1e-12 * guu * gvv:
                    red = (gvv * ru * ru - 2.0 * guv * ru * rv + guu * rv * rv) / det
                else:
                    r1 = ru * ru / guu
                    r2 = rv * rv / gvv
                    red = r1 if r1 > r2 else r2
            elif ok_u:
                red = ru * ru / guu
            elif ok_v:
                red = rv * rv / gvv
            if red > best_red:
                best_red = red
                best_pp = np.int64(pp)
                best_knot = t
            szr += gzr
            szrx += gzrx
            szz += gzz
            szzx += gzzx
            szzxx += gzzxx
            i = j
    return best_red, best_pp, best_knot
