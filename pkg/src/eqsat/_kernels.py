"""Compiled inner loops for clause extraction.

Each row of ``out`` receives the literal counts of one extracted clause set.
Draws are partial Fisher-Yates shuffles driven by caller-supplied uniforms,
so the random stream (and hence determinism) stays on the Python side. The
working permutation is not reset between rows: a Fisher-Yates prefix is
uniform whatever order the array starts in.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _fisher_yates_take(work, count, lits, u, row, offset, out):
    size = work.size
    width = lits.shape[1]
    for i in range(count):
        j = i + np.int64(u[row, offset + i] * (size - i))
        if j >= size:
            j = size - 1
        chosen = work[j]
        work[j] = work[i]
        work[i] = chosen
        for col in range(width):
            out[row, lits[chosen, col]] += 1


@njit(cache=True, nogil=True)
def draw_from_pool(lits, pool, takes, offsets, u, out):
    """Row r draws ``takes[r]`` distinct clauses of ``pool`` using ``u[r, offsets[r]:]``."""
    work = pool.copy()
    for row in range(takes.size):
        _fisher_yates_take(work, takes[row], lits, u, row, offsets[row], out)


@njit(cache=True, nogil=True)
def draw_conditioned(lits, occ_ptr, occ_idx, variables, pos_takes, neg_takes, u, out):
    """Row r draws exactly ``pos_takes[r]`` clauses containing x_j, ``neg_takes[r]``
    containing ¬x_j (j = ``variables[r]``, 0-based) and fills up to ``u.shape[1]``
    clauses from those mentioning neither."""
    total = u.shape[1]
    n_clauses = lits.shape[0]
    mark = np.zeros(n_clauses, np.uint8)
    rest = np.empty(n_clauses, np.int32)
    for row in range(variables.size):
        j = variables[row]
        pos = occ_idx[occ_ptr[2 * j]:occ_ptr[2 * j + 1]].copy()
        neg = occ_idx[occ_ptr[2 * j + 1]:occ_ptr[2 * j + 2]].copy()
        _fisher_yates_take(pos, pos_takes[row], lits, u, row, 0, out)
        _fisher_yates_take(neg, neg_takes[row], lits, u, row, pos_takes[row], out)
        for i in range(pos.size):
            mark[pos[i]] = 1
        for i in range(neg.size):
            mark[neg[i]] = 1
        size = 0
        for i in range(n_clauses):
            if mark[i] == 0:
                rest[size] = i
                size += 1
        for i in range(pos.size):
            mark[pos[i]] = 0
        for i in range(neg.size):
            mark[neg[i]] = 0
        used = pos_takes[row] + neg_takes[row]
        _fisher_yates_take(rest[:size], total - used, lits, u, row, used, out)
