"""Compiled hot-path kernels for the incremental likelihood cache.

Numba is an optional accelerator: every kernel has a plain-numpy twin used
when it is not importable, and the full-recomputation likelihood (the
reference path the cache is tested against) never touches this module.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _dominated_mask_jit(X, loc):
    n, p = X.shape
    out = np.empty(n, dtype=np.bool_)
    for i in range(n):
        ok = True
        for j in range(p):
            if X[i, j] < loc[j]:
                ok = False
                break
        out[i] = ok
    return out


def _dominated_mask_np(X, loc):
    return np.all(X >= loc, axis=1)


@njit(cache=True)
def _masked_max_jit(dom, marks, alive, exclude, rows, origin):
    r = rows.size
    K = marks.shape[1]
    out = np.empty((r, K))
    for i in range(r):
        for k in range(K):
            out[i, k] = origin[k]
    for si in range(alive.size):
        s = alive[si]
        if s == exclude:
            continue
        for i in range(r):
            if dom[s, rows[i]]:
                for k in range(K):
                    v = marks[s, k]
                    if v > out[i, k]:
                        out[i, k] = v
    return out


def _masked_max_np(dom, marks, alive, exclude, rows, origin):
    out = np.tile(origin, (rows.size, 1))
    for s in alive:
        if s == exclude:
            continue
        sel = dom[s, rows]
        if sel.any():
            out[sel] = np.maximum(out[sel], marks[s])
    return out


@njit(cache=True)
def _birth_rows_jit(lam, dom, marks):
    n, K = lam.shape
    buf = np.empty(n, dtype=np.int64)
    m = 0
    for r in range(n):
        if dom[r]:
            for k in range(K):
                if lam[r, k] < marks[k]:
                    buf[m] = r
                    m += 1
                    break
    return buf[:m].copy()


def _birth_rows_np(lam, dom, marks):
    return np.flatnonzero(dom & (lam < marks).any(axis=1))


@njit(cache=True)
def _tie_rows_jit(lam, dom, old_marks, new_marks):
    """Rows where lowering a mark from old to new (or raising it above the
    envelope) can change the envelope."""
    n, K = lam.shape
    buf = np.empty(n, dtype=np.int64)
    m = 0
    for r in range(n):
        if dom[r]:
            for k in range(K):
                v = lam[r, k]
                if (v == old_marks[k] and new_marks[k] < old_marks[k]) or v < new_marks[k]:
                    buf[m] = r
                    m += 1
                    break
    return buf[:m].copy()


def _tie_rows_np(lam, dom, old_marks, new_marks):
    ties = (lam == old_marks) & (new_marks < old_marks)
    raises = lam < new_marks
    return np.flatnonzero(dom & (ties | raises).any(axis=1))


@njit(cache=True)
def _row_loglik_identity_jit(lam, rows, y):
    K = lam.shape[1]
    out = np.empty(rows.size)
    total = 0.0
    finite = True
    for i in range(rows.size):
        r = rows[i]
        yi = y[r]
        hi = 1.0 if yi == 1 else lam[r, yi - 1]
        lo = 0.0 if yi == K else lam[r, yi]
        p = hi - lo
        if p > 0.0:
            v = np.log(p)
        else:
            v = -np.inf
            finite = False
        out[i] = v
        total += v
    if not finite:
        total = -np.inf
    return out, total


@njit(cache=True)
def _row_loglik_logit_jit(lam, eta, rows, y):
    K = lam.shape[1]
    out = np.empty(rows.size)
    total = 0.0
    finite = True
    for i in range(rows.size):
        r = rows[i]
        yi = y[r]
        e = eta[r]
        hi = 1.0 if yi == 1 else 1.0 / (1.0 + np.exp(-(lam[r, yi - 1] + e)))
        lo = 0.0 if yi == K else 1.0 / (1.0 + np.exp(-(lam[r, yi] + e)))
        p = hi - lo
        if p > 0.0:
            v = np.log(p)
        else:
            v = -np.inf
            finite = False
        out[i] = v
        total += v
    if not finite:
        total = -np.inf
    return out, total


@njit(cache=True)
def _position_rows_jit(lam, old_dom, new_dom, marks):
    n, K = lam.shape
    buf = np.empty(n, dtype=np.int64)
    m = 0
    for r in range(n):
        hit = False
        if old_dom[r] and not new_dom[r]:
            for k in range(K):
                if lam[r, k] == marks[k]:
                    hit = True
                    break
        if not hit and new_dom[r]:
            for k in range(K):
                if lam[r, k] < marks[k]:
                    hit = True
                    break
        if hit:
            buf[m] = r
            m += 1
    return buf[:m].copy()


def _position_rows_np(lam, old_dom, new_dom, marks):
    drop = old_dom & ~new_dom & (lam == marks).any(axis=1)
    gain = new_dom & (lam < marks).any(axis=1)
    return np.flatnonzero(drop | gain)


@njit(cache=True)
def _cross_bounds_jit(loc, marks, alive, exclude, x, lower, upper):
    p = x.size
    K = lower.size
    for si in range(alive.size):
        s = alive[si]
        if s == exclude:
            continue
        below = True
        above = True
        for j in range(p):
            v = loc[s, j]
            if v > x[j]:
                below = False
            if v < x[j]:
                above = False
            if not (below or above):
                break
        if below:
            for k in range(K):
                if marks[s, k] > lower[k]:
                    lower[k] = marks[s, k]
        if above:
            for k in range(K):
                if marks[s, k] < upper[k]:
                    upper[k] = marks[s, k]


def _cross_bounds_np(loc, marks, alive, exclude, x, lower, upper):
    keep = alive[alive != exclude] if exclude >= 0 else alive
    if keep.size == 0:
        return
    locs = loc[keep]
    below = np.all(locs <= x, axis=1)
    above = np.all(locs >= x, axis=1)
    if below.any():
        np.maximum(lower, marks[keep][below].max(axis=0), out=lower)
    if above.any():
        np.minimum(upper, marks[keep][above].min(axis=0), out=upper)


if HAVE_NUMBA:
    dominated_mask = _dominated_mask_jit
    masked_max = _masked_max_jit
    birth_rows = _birth_rows_jit
    tie_rows = _tie_rows_jit
    position_rows = _position_rows_jit
    row_loglik_identity = _row_loglik_identity_jit
    row_loglik_logit = _row_loglik_logit_jit
    cross_bounds = _cross_bounds_jit
else:
    dominated_mask = _dominated_mask_np
    masked_max = _masked_max_np
    birth_rows = _birth_rows_np
    tie_rows = _tie_rows_np
    position_rows = _position_rows_np
    row_loglik_identity = None
    row_loglik_logit = None
    cross_bounds = _cross_bounds_np
