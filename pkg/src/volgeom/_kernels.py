"""Compiled inner loops for cell labeling.

Arrays here use 0-based indices, so a cell's 1-based coordinate is odd
exactly where its index is even. Gamma-neighbors therefore lie one step along
the axes with an odd index.
"""
import numpy as np
from numba import njit

LABEL_MAX = np.uint64(0xFFFFFFFF)


@njit(cache=True, nogil=True)
def _gather(tau, i, j, k, out):
    p = 0
    if i & 1:
        out[p] = tau[i - 1, j, k]
        out[p + 1] = tau[i + 1, j, k]
        p += 2
    if j & 1:
        out[p] = tau[i, j - 1, k]
        out[p + 1] = tau[i, j + 1, k]
        p += 2
    if k & 1:
        out[p] = tau[i, j, k - 1]
        out[p + 1] = tau[i, j, k + 1]
        p += 2
    return p


@njit(cache=True, nogil=True)
def once_into(x, p, y):
    """Positive entries of ``x[:p]`` occurring exactly once, ascending, zero-padded."""
    m = 0
    for a in range(p):
        v = x[a]
        if v == 0:
            continue
        count = 0
        for b in range(p):
            if x[b] == v:
                count += 1
        if count == 1:
            # insertion sort into y[:m]
            pos = m
            while pos > 0 and y[pos - 1] > v:
                y[pos] = y[pos - 1]
                pos -= 1
            y[pos] = v
            m += 1
    for a in range(m, p):
        y[a] = 0
    return m


@njit(cache=True, nogil=True)
def _signature_at(tau, i, j, k, x, y):
    p = _gather(tau, i, j, k, x)
    once_into(x, p, y)
    return p


@njit(cache=True, nogil=True)
def _grow_rows(a):
    b = np.zeros((a.shape[0] * 2, a.shape[1]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def _grow_stack(a):
    b = np.empty(a.shape[0] * 2, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True, nogil=True)
def label_components(tau, c):
    """Depth-first labeling of active ``c``-cells (``c`` in {1, 2}) in place.

    Returns ``(n, alpha)`` where ``alpha[q-1]`` is the signature of component q.
    Returns ``n = -1`` if the 32-bit label space is exhausted.
    """
    m1, m2, m3 = tau.shape
    p = 6 - 2 * c
    alpha = np.zeros((64, p), dtype=np.uint32)
    stack = np.empty(1024, dtype=np.int64)
    x = np.zeros(6, dtype=np.uint32)
    seed = np.zeros(6, dtype=np.uint32)
    y = np.zeros(6, dtype=np.uint32)
    n = 0
    for i in range(m1):
        for j in range(m2):
            for k in range(m3):
                # index parity even <=> coordinate odd; order = count of even indices
                order = (1 - (i & 1)) + (1 - (j & 1)) + (1 - (k & 1))
                if order != c or tau[i, j, k] != 0:
                    continue
                _signature_at(tau, i, j, k, x, seed)
                if seed[0] == 0:
                    continue
                if np.uint64(n) >= LABEL_MAX:
                    return -1, alpha
                n += 1
                if n > alpha.shape[0]:
                    alpha = _grow_rows(alpha)
                for a in range(p):
                    alpha[n - 1, a] = seed[a]
                lab = np.uint32(n)
                tau[i, j, k] = lab
                top = 0
                stack[0] = (i * m2 + j) * m3 + k
                top = 1
                while top > 0:
                    top -= 1
                    flat = stack[top]
                    uk = flat % m3
                    rest = flat // m3
                    uj = rest % m2
                    ui = rest // m2
                    u = (ui, uj, uk)
                    # v <-> u: v = t +/- e_b with t = u +/- e_a, a an odd-coordinate axis of u
                    for a in range(3):
                        if u[a] & 1:
                            continue
                        for sa in (-1, 1):
                            ti = ui + (sa if a == 0 else 0)
                            tj = uj + (sa if a == 1 else 0)
                            tk = uk + (sa if a == 2 else 0)
                            if ti < 0 or tj < 0 or tk < 0 or ti >= m1 or tj >= m2 or tk >= m3:
                                continue
                            tt = (ti, tj, tk)
                            for b in range(3):
                                if not tt[b] & 1:
                                    continue
                                for sb in (-1, 1):
                                    if b == a and sb == -sa:
                                        continue
                                    vi = ti + (sb if b == 0 else 0)
                                    vj = tj + (sb if b == 1 else 0)
                                    vk = tk + (sb if b == 2 else 0)
                                    if tau[vi, vj, vk] != 0:
                                        continue
                                    _signature_at(tau, vi, vj, vk, x, y)
                                    same = True
                                    for q in range(p):
                                        if y[q] != seed[q]:
                                            same = False
                                            break
                                    if not same:
                                        continue
                                    tau[vi, vj, vk] = lab
                                    if top >= stack.shape[0]:
                                        stack = _grow_stack(stack)
                                    stack[top] = (vi * m2 + vj) * m3 + vk
                                    top += 1
    return n, alpha[:n].copy()


@njit(cache=True, nogil=True)
def label_zero_cells(tau):
    """Label every active 0-cell with its own fresh label, in place.

    Returns ``(n, alpha, junctions)``. ``junctions`` has one row
    ``(label or 0, six raw 1-cell labels)`` per 0-cell that is active or
    touches at least two distinct 1-labels; these are the 0-cells whose
    status can change once labels from several blocks are reconciled.
    """
    m1, m2, m3 = tau.shape
    alpha = np.zeros((64, 6), dtype=np.uint32)
    junctions = np.zeros((64, 7), dtype=np.uint32)
    x = np.zeros(6, dtype=np.uint32)
    y = np.zeros(6, dtype=np.uint32)
    n = 0
    nj = 0
    for i in range(1, m1, 2):
        for j in range(1, m2, 2):
            for k in range(1, m3, 2):
                _gather(tau, i, j, k, x)
                once_into(x, 6, y)
                distinct = 0
                for a in range(6):
                    if x[a] == 0:
                        continue
                    first = True
                    for b in range(a):
                        if x[b] == x[a]:
                            first = False
                            break
                    if first:
                        distinct += 1
                lab = 0
                if y[0] != 0:
                    n += 1
                    if n > alpha.shape[0]:
                        alpha = _grow_rows(alpha)
                    for a in range(6):
                        alpha[n - 1, a] = y[a]
                    lab = n
                    tau[i, j, k] = np.uint32(n)
                if lab != 0 or distinct >= 2:
                    nj += 1
                    if nj > junctions.shape[0]:
                        junctions = _grow_rows(junctions)
                    junctions[nj - 1, 0] = np.uint32(lab)
                    for a in range(6):
                        junctions[nj - 1, a + 1] = x[a]
    return n, alpha[:n].copy(), junctions[:nj].copy()


@njit(cache=True, nogil=True)
def signatures_of_order(tau, c):
    """Signature of every ``c``-cell, as (flat index, signature) rows; used by audits."""
    m1, m2, m3 = tau.shape
    p = 6 - 2 * c
    count = 0
    for i in range(m1):
        for j in range(m2):
            for k in range(m3):
                if (1 - (i & 1)) + (1 - (j & 1)) + (1 - (k & 1)) == c:
                    count += 1
    idx = np.empty(count, dtype=np.int64)
    sig = np.zeros((count, p), dtype=np.uint32)
    x = np.zeros(6, dtype=np.uint32)
    y = np.zeros(6, dtype=np.uint32)
    r = 0
    for i in range(m1):
        for j in range(m2):
            for k in range(m3):
                if (1 - (i & 1)) + (1 - (j & 1)) + (1 - (k & 1)) != c:
                    continue
                _signature_at(tau, i, j, k, x, y)
                idx[r] = (i * m2 + j) * m3 + k
                for a in range(p):
                    sig[r, a] = y[a]
                r += 1
    return idx, sig
