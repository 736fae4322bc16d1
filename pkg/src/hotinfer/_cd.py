"""Compiled coordinate-descent kernel for the weighted lasso.

The kernel works in covariance space: given ``G = D'D / n`` and the current
gradient ``g = D'(target - D b) / n`` it never touches the ``n``-row design.
"""

import numpy as np
from numba import njit

# relative slack on the soft threshold so that pen == lambda_max reliably gives
# an exact zero despite rounding differences in how the gradient was summed
_THR_SLACK = 1.0 + 1e-13


@njit(cache=True, nogil=True)
def _soft(g, thr, ck):
    if abs(g) <= thr * _THR_SLACK:
        return 0.0
    if g > thr:
        return (g - thr) / ck
    return (g + thr) / ck


@njit(cache=True, nogil=True)
def _sign(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True, nogil=True)
def _cholesky_solve(M, rhs):
    # Cholesky solve of an SPD block; returns (ok, x). Nearly singular
    # blocks (pivot below 1e-10 of the largest diagonal) are refused.
    m = M.shape[0]
    x = np.empty(m)
    scale = 0.0
    for i in range(m):
        if M[i, i] > scale:
            scale = M[i, i]
    try:
        L = np.linalg.cholesky(M)
    except Exception:
        return False, x
    for i in range(m):
        if L[i, i] * L[i, i] <= 1e-10 * scale:
            return False, x
    for i in range(m):
        acc = rhs[i]
        for t in range(i):
            acc -= L[i, t] * x[t]
        x[i] = acc / L[i, i]
    for i in range(m - 1, -1, -1):
        acc = x[i]
        for t in range(i + 1, m):
            acc -= L[t, i] * x[t]
        x[i] = acc / L[i, i]
    return True, x


@njit(cache=True, nogil=True)
def _exact_step(GA, gA, bA, penA):
    """Move toward the minimizer of the objective restricted to the current sign pattern.

    Solves ``G_FF x = c_F - pen_F * sign(b_F)`` over the nonzero and free
    coordinates ``F``, where ``c = g + G b``. If every penalized ``x_k`` keeps
    the sign of ``b_k`` the step goes all the way to ``x``. Otherwise it stops
    where the first coefficient reaches zero and sets that one to exactly
    zero; the objective still decreases because it is a convex quadratic on
    the segment. Returns 0 if the block is singular, 1 for a full step and
    2 for a partial one.
    """
    m = bA.size
    nF = 0
    F = np.empty(m, dtype=np.int64)
    for a in range(m):
        if bA[a] != 0.0 or penA[a] == 0.0:
            F[nF] = a
            nF += 1
    if nF == 0:
        return 0
    M = np.empty((nF, nF))
    rhs = np.empty(nF)
    for u in range(nF):
        a = F[u]
        c = gA[a]
        for e in range(m):
            c += GA[a, e] * bA[e]
        rhs[u] = c - penA[a] * _sign(bA[a])
        for v in range(nF):
            M[u, v] = GA[a, F[v]]
    ok, x = _cholesky_solve(M, rhs)
    if not ok:
        return 0
    t = 1.0
    hit = -1
    for u in range(nF):
        a = F[u]
        if penA[a] > 0.0 and _sign(x[u]) != _sign(bA[a]):
            tu = bA[a] / (bA[a] - x[u])
            if tu < t:
                t = tu
                hit = u
    for u in range(nF):
        a = F[u]
        if u == hit:
            new = 0.0
        elif hit < 0:
            new = x[u]
        else:
            new = bA[a] + t * (x[u] - bA[a])
            if penA[a] > 0.0 and _sign(new) != _sign(bA[a]):
                new = 0.0
        delta = new - bA[a]
        if delta != 0.0:
            for e in range(m):
                gA[e] -= delta * GA[a, e]
            bA[a] = new
    return 1 if hit < 0 else 2


@njit(cache=True, nogil=True)
def cd_kernel(G, pen, b, g, tol, max_iter):
    """Active-set cyclic coordinate descent; updates ``b`` and ``g`` in place.

    Minimizes ``(2n)^-1 ||target - D b||^2 + sum_k pen[k] |b_k|`` where
    ``G = D'D / n`` and ``g`` holds ``D'(target - D b) / n`` on entry.
    Alternates two phases: cyclic sweeps in ascending column order over the
    working set (nonzero and unpenalized coordinates) until no coefficient
    moves by more than ``tol``, then a check of every zero coordinate's
    subgradient condition, adding violators to the working set. Stops when
    the check adds nothing.

    The first time a sweep leaves a sign pattern unchanged, the working-set
    problem is solved exactly on that pattern and the iterate moves toward
    that solution as far as the signs allow; the following sweeps certify
    the result.

    Returns ``(sweeps, converged)``; inner sweeps and checks each count as one.
    """
    q = G.shape[0]
    in_set = np.zeros(q, dtype=np.bool_)
    for k in range(q):
        if G[k, k] > 0.0 and (b[k] != 0.0 or pen[k] == 0.0):
            in_set[k] = True
    sweeps = 0
    while sweeps < max_iter:
        A = np.flatnonzero(in_set)
        m = A.size
        if m:
            b0 = np.empty(m)
            bA = np.empty(m)
            gA = np.empty(m)
            penA = np.empty(m)
            GA = np.empty((m, m))
            for a in range(m):
                b0[a] = b[A[a]]
                bA[a] = b0[a]
                gA[a] = g[A[a]]
                penA[a] = pen[A[a]]
                for e in range(m):
                    GA[a, e] = G[A[a], A[e]]
            inner_ok = False
            tried = False
            stall = 0
            while sweeps < max_iter:
                sweeps += 1
                stall += 1
                max_change = 0.0
                pattern_changed = False
                for a in range(m):
                    ck = GA[a, a]
                    bk = bA[a]
                    new = _soft(gA[a] + ck * bk, penA[a], ck)
                    delta = new - bk
                    if delta != 0.0:
                        row = GA[a]
                        for e in range(m):
                            gA[e] -= delta * row[e]
                        bA[a] = new
                        if _sign(new) != _sign(bk):
                            pattern_changed = True
                        if abs(delta) > max_change:
                            max_change = abs(delta)
                if max_change <= tol:
                    inner_ok = True
                    break
                if pattern_changed:
                    tried = False
                    stall = 0
                elif not tried and (max_change > 100.0 * tol or stall >= 5):
                    # one full attempt per sign pattern; a partial step
                    # changes the pattern and earns another
                    tried = _exact_step(GA, gA, bA, penA) != 2
            for a in range(m):
                b[A[a]] = bA[a]
            for a in range(m):
                delta = b[A[a]] - b0[a]
                if delta != 0.0:
                    row = A[a]
                    for e in range(q):
                        g[e] -= delta * G[row, e]
            if not inner_ok:
                return sweeps, False
        if sweeps >= max_iter:
            return sweeps, False
        sweeps += 1
        added = False
        for k in range(q):
            if not in_set[k] and G[k, k] > 0.0 and abs(g[k]) > pen[k] * _THR_SLACK:
                in_set[k] = True
                added = True
        if not added:
            return sweeps, True
    return sweeps, False
