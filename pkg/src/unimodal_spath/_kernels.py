"""Compiled inner loops for drawing one S-path.

Specialised to product-form EPPFs and the Pareto-mixture base measure: the
caller passes lookup tables

    log_cell[e]   log of the per-cell EPPF weight for a cell of size e
    log_new[m]    log of the EPPF factor for opening cluster number m + 1
    log_fact[k]   log k!
    log_anu[nu]   log(alpha + nu)

and ``logq[j-1] = log max(|Q_j|, delta)`` so that
``log m^(nu)(Q_j) = c0 - log_anu[nu] - (alpha + nu) * logq[j-1]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _lcomb(n, k, log_fact):
    return log_fact[n] - log_fact[k] - log_fact[n - k]


@njit(cache=True, nogil=True)
def _lm(nu, j, logq, c0, alpha, log_anu):
    return c0 - log_anu[nu] - (alpha + nu) * logq[j - 1]


@njit(cache=True, nogil=True)
def draw_path(n, order, u, naive, force, logq, c0, alpha, log_anu, log_cell, log_new, offset, log_fact, S):
    """Fill ``S`` with a path and return its log trial probability.

    ``order`` holds the insertion order of locations ``1..n-1`` (ignored
    for ``naive``, which goes left to right on truncated paths).  With
    ``force`` the coordinates already in ``S`` are kept and only their
    trial probability is accumulated.
    """
    S[0] = 0
    S[n] = n
    if n <= 1:
        return 0.0
    prv = np.empty(n - 1, np.int64)
    nxt = np.empty(n - 1, np.int64)
    if not naive:
        left = np.arange(-1, n, 1)
        right = np.arange(1, n + 2, 1)
        # neighbours at insertion time = neighbours at deletion time, in reverse
        for r in range(n - 2, -1, -1):
            i = order[r]
            prv[r] = left[i]
            nxt[r] = right[i]
            right[left[i]] = right[i]
            left[right[i]] = left[i]
    w = np.empty(n + 1)
    K = 1
    log_kappa = 0.0
    for r in range(n - 1):
        if naive:
            i = r + 1
            p = i - 1
            q = i + 1
            Sq = i + 1
        else:
            i = order[r]
            p = prv[r]
            q = nxt[r]
            Sq = S[q]
        Sp = S[p]
        kmax = min(i, Sq)
        if kmax == Sp:
            if force and S[i] != Sp:
                return -np.inf
            S[i] = Sp
            continue
        L = Sq - Sp
        cnt = kmax - Sp + 1
        wmax = -np.inf
        for c in range(cnt):
            k = Sp + c
            if k == Sp:
                v = _lcomb(q - 1 - Sp, q - Sq, log_fact) + log_cell[L] + _lm(L, q, logq, c0, alpha, log_anu)
            elif k == Sq:
                v = _lcomb(i - 1 - Sp, i - Sq, log_fact) + log_cell[L] + _lm(L, i, logq, c0, alpha, log_anu)
            else:
                v = (
                    _lcomb(i - 1 - Sp, i - k, log_fact)
                    + _lcomb(q - 1 - k, q - Sq, log_fact)
                    + log_cell[k - Sp]
                    + log_cell[Sq - k]
                    + _lm(k - Sp, i, logq, c0, alpha, log_anu)
                    + _lm(Sq - k, q, logq, c0, alpha, log_anu)
                    + log_new[offset + K]
                )
            w[c] = v
            if v > wmax:
                wmax = v
        total = 0.0
        for c in range(cnt):
            total += np.exp(w[c] - wmax)
        if force:
            pick = S[i] - Sp
            if pick < 0 or pick >= cnt:
                return -np.inf
        else:
            target = u[r] * total
            acc = 0.0
            pick = cnt - 1
            for c in range(cnt):
                acc += np.exp(w[c] - wmax)
                if acc > target:
                    pick = c
                    break
        k = Sp + pick
        log_kappa += w[pick] - wmax - np.log(total)
        S[i] = k
        if Sp < k < Sq:
            K += 1
    return log_kappa


@njit(cache=True, nogil=True)
def path_log_weight(n, S, logq, c0, alpha, log_anu, log_fact, incs):
    """``log |C_S| + sum log m`` of a path; writes jump sizes to ``incs``.

    Returns ``(value, number_of_jumps)``.
    """
    out = 0.0
    K = 0
    for j in range(1, n + 1):
        d = S[j] - S[j - 1]
        if d > 0:
            out += _lcomb(j - 1 - S[j - 1], j - S[j], log_fact) + _lm(d, j, logq, c0, alpha, log_anu)
            incs[K] = d
            K += 1
    return out, K
