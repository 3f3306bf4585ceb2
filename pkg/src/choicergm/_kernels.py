"""Compiled inner loops: local change statistics and the event chain."""

import math

import numpy as np
from numba import njit

EDGES = 0
TWO_STAR = 1
ISOLATES = 2
CONCURRENT = 3
SOCIALITY = 4
NODEMATCH = 5
NODEMATCH_LEVEL = 6
ABSDIFF = 7
EDGE_COVARIATE = 8
LOCAL_TRIANGLE = 9
CYCLIC_TIES = 10
BALANCE = 11
NSP0 = 12
TRIANGLE = 13


@njit(cache=True, nogil=True)
def _shared_partners(adj, a, b, skip):
    n = adj.shape[0]
    s = 0
    for m in range(n):
        if m != skip and adj[a, m] and adj[b, m]:
            s += 1
    return s


@njit(cache=True, nogil=True)
def change_stats(adj, i, j, directed, kinds, ivals, cat, num, mats, midx, out):
    """Fill ``out`` with t(y+_ij) - t(y-_ij), evaluated with ij clamped absent."""
    n = adj.shape[0]
    di = 0
    dj = 0
    for k in range(n):
        di += adj[i, k]
        dj += adj[j, k]
    di -= adj[i, j]
    dj -= adj[j, i]
    for p in range(kinds.shape[0]):
        kind = kinds[p]
        v = 0.0
        if kind == EDGES:
            v = 1.0
        elif kind == TWO_STAR:
            v = di + dj
        elif kind == ISOLATES:
            v = -((di == 0) * 1.0) - ((dj == 0) * 1.0)
        elif kind == CONCURRENT:
            v = (di == 1) * 1.0 + (dj == 1) * 1.0
        elif kind == SOCIALITY:
            if directed:
                v = (i == ivals[p]) * 1.0
            else:
                v = (i == ivals[p]) * 1.0 + (j == ivals[p]) * 1.0
        elif kind == NODEMATCH:
            v = (cat[p, i] == cat[p, j]) * 1.0
        elif kind == NODEMATCH_LEVEL:
            v = (cat[p, i] == ivals[p] and cat[p, j] == ivals[p]) * 1.0
        elif kind == ABSDIFF:
            v = abs(num[p, i] - num[p, j])
        elif kind == EDGE_COVARIATE:
            v = mats[midx[p], i, j]
        elif kind == LOCAL_TRIANGLE:
            c = mats[midx[p]]
            if c[i, j] != 0.0:
                for k in range(n):
                    if k != i and k != j and adj[i, k] and adj[j, k] and c[i, k] != 0.0 and c[j, k] != 0.0:
                        v += 1.0
        elif kind == TRIANGLE:
            for k in range(n):
                if k != i and k != j and adj[i, k] and adj[j, k]:
                    v += 1.0
        elif kind == CYCLIC_TIES:
            a = cat[p]
            common = 0
            for k in range(n):
                if k == i or k == j or not (adj[i, k] and adj[j, k]):
                    continue
                common += 1
                # edge ik (resp. jk) gains j (resp. i) as a shared partner
                if a[i] == a[k] and _shared_partners(adj, i, k, j) == 0:
                    v += 1.0
                if a[j] == a[k] and _shared_partners(adj, j, k, i) == 0:
                    v += 1.0
            if common > 0 and a[i] == a[j]:
                v += 1.0
        elif kind == BALANCE:
            for k in range(n):
                if k == i or k == j:
                    continue
                e = adj[i, k] + adj[j, k]
                if e == 2:
                    v += 1.0
                elif e == 0:
                    v -= 1.0
        elif kind == NSP0:
            if _shared_partners(adj, i, j, -1) == 0:
                v -= 1.0
            for k in range(n):
                if k == i or k == j:
                    continue
                # dyad ik acquires j as a shared partner when jk is present
                if adj[j, k] and not adj[i, k] and _shared_partners(adj, i, k, j) == 0:
                    v -= 1.0
                if adj[i, k] and not adj[j, k] and _shared_partners(adj, j, k, i) == 0:
                    v -= 1.0
        out[p] = v


@njit(cache=True, nogil=True)
def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True, nogil=True)
def run_events(Y, P, table, ei, ej, ev_edge, ev_slot, u, directed,
               kinds, ivals, cat, num, mats, midx, theta, offset,
               record_every, out_codes):
    """Apply a block of edge-updating events in place.

    ``P`` holds one slice per control slot, ``table`` maps the packed
    decision vector of an edge to its manifest state. When
    ``record_every > 0`` the edge-variable bit code of ``Y`` is written to
    ``out_codes`` after every ``record_every`` events.
    """
    ell = P.shape[0]
    m = ei.shape[0]
    cs = np.zeros(kinds.shape[0])
    rec = 0
    for t in range(ev_edge.shape[0]):
        k = ev_edge[t]
        s = ev_slot[t]
        i = ei[k]
        j = ej[k]
        idx = 0
        for r in range(ell):
            if P[r, i, j]:
                idx |= 1 << r
        y1 = table[idx | (1 << s)]
        y0 = table[idx & ~(1 << s)]
        if y1 == y0:
            prob = 0.5
        else:
            change_stats(Y, i, j, directed, kinds, ivals, cat, num, mats, midx, cs)
            delta = offset
            for p in range(cs.shape[0]):
                delta += theta[p] * cs[p]
            prob = _expit(delta) if y1 == 1 else _expit(-delta)
        new = 1 if u[t] < prob else 0
        P[s, i, j] = new
        yv = y1 if new else y0
        Y[i, j] = yv
        if not directed:
            P[s, j, i] = new
            Y[j, i] = yv
        if record_every > 0 and (t + 1) % record_every == 0:
            code = 0
            for q in range(m):
                if Y[ei[q], ej[q]]:
                    code |= 1 << q
            out_codes[rec] = code
            rec += 1
    return rec
