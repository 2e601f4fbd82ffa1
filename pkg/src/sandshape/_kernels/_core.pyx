# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot image kernels.

Mirrors pyimpl.py exactly: every function returns bit-identical values to
the NumPy/SciPy fallback (all three kernels are pure integer algorithms).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Moore neighbourhood, clockwise on screen from West, and the same ring
# counterclockwise from West (rows grow downward).
cdef int[8] CW_R = [0, -1, -1, -1, 0, 1, 1, 1]
cdef int[8] CW_C = [-1, -1, 0, 1, 1, 1, 0, -1]
cdef int[8] CCW_R = [0, 1, 1, 1, 0, -1, -1, -1]
cdef int[8] CCW_C = [-1, -1, 0, 1, 1, 1, 0, -1]


def joint_hist(cnp.int64_t[::1] codes_a, cnp.int64_t[::1] codes_b, int n_bins):
    """Joint count table of two equally long bin-code vectors."""
    out = np.zeros((n_bins, n_bins), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] h = out
    cdef Py_ssize_t i, n = codes_a.shape[0]
    for i in range(n):
        h[codes_a[i], codes_b[i]] += 1
    return out


cdef inline cnp.int32_t _find(cnp.int32_t[::1] parent, cnp.int32_t x) nogil:
    cdef cnp.int32_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:  # path compression
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def label_components(cnp.uint8_t[:, ::1] mask):
    """8-connected component labelling; labels 1..n in raster-scan order.

    Classic two-pass union-find: provisional labels on a raster scan
    looking at the four already-visited neighbours, then a renumbering
    pass that assigns final labels in order of first appearance.
    """
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    out = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = out
    prov_arr = np.zeros(h * w // 2 + 2, dtype=np.int32)
    cdef cnp.int32_t[::1] parent = prov_arr
    cdef cnp.int32_t next_prov = 0, best, cand
    cdef Py_ssize_t r, c, k
    cdef int dr[4]
    cdef int dc[4]
    dr[0] = 0; dc[0] = -1   # W
    dr[1] = -1; dc[1] = -1  # NW
    dr[2] = -1; dc[2] = 0   # N
    dr[3] = -1; dc[3] = 1   # NE
    cdef Py_ssize_t r2, c2

    for r in range(h):
        for c in range(w):
            if mask[r, c] == 0:
                continue
            best = -1
            for k in range(4):
                r2 = r + dr[k]
                c2 = c + dc[k]
                if 0 <= r2 < h and 0 <= c2 < w and mask[r2, c2] != 0:
                    cand = _find(parent, labels[r2, c2] - 1)
                    if best < 0 or cand < best:
                        if best >= 0:
                            parent[best] = cand
                        best = cand
                    elif cand != best:
                        parent[cand] = best
            if best < 0:
                parent[next_prov] = next_prov
                best = next_prov
                next_prov += 1
            labels[r, c] = best + 1

    # renumber roots by first raster appearance
    final_arr = np.zeros(max(next_prov, 1), dtype=np.int32)
    cdef cnp.int32_t[::1] final = final_arr
    cdef cnp.int32_t n = 0, root
    for r in range(h):
        for c in range(w):
            if labels[r, c] == 0:
                continue
            root = _find(parent, labels[r, c] - 1)
            if final[root] == 0:
                n += 1
                final[root] = n
            labels[r, c] = final[root]
    return out, int(n)


def trace_border(cnp.uint8_t[:, ::1] mask, int start_r, int start_c):
    """Suzuki-Abe style outer-border following; see pyimpl.trace_border."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef int fr = -1, fc = -1
    cdef int r, c, k
    for k in range(8):
        r = start_r + CW_R[k]
        c = start_c + CW_C[k]
        if 0 <= r < h and 0 <= c < w and mask[r, c]:
            fr = r
            fc = c
            break
    if fr < 0:
        return np.array([[start_r, start_c]], dtype=np.int64)

    cdef Py_ssize_t total = 0
    cdef Py_ssize_t rr, cc
    for rr in range(h):
        for cc in range(w):
            if mask[rr, cc]:
                total += 1
    cdef Py_ssize_t cap = 8 * total + 8
    buf = np.empty((cap, 2), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] border = buf
    cdef Py_ssize_t count = 0

    cdef int prev_r = fr, prev_c = fc
    cdef int cur_r = start_r, cur_c = start_c
    cdef int nxt_r, nxt_c, pivot, dr, dc
    cdef Py_ssize_t step
    for step in range(cap):
        # index of (prev - cur) in the counterclockwise ring
        dr = prev_r - cur_r
        dc = prev_c - cur_c
        pivot = -1
        for k in range(8):
            if CCW_R[k] == dr and CCW_C[k] == dc:
                pivot = k
                break
        nxt_r = -1
        for k in range(1, 9):
            r = cur_r + CCW_R[(pivot + k) % 8]
            c = cur_c + CCW_C[(pivot + k) % 8]
            if 0 <= r < h and 0 <= c < w and mask[r, c]:
                nxt_r = r
                nxt_c = c
                break
        border[count, 0] = cur_r
        border[count, 1] = cur_c
        count += 1
        if nxt_r == start_r and nxt_c == start_c and cur_r == fr and cur_c == fc:
            break
        prev_r = cur_r
        prev_c = cur_c
        cur_r = nxt_r
        cur_c = nxt_c
    return buf[:count].copy()
