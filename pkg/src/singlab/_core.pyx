# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Grids are passed as 3-axis arrays; two-dimensional grids carry a trailing
axis of length one. Offset stencils have shape ``(2*n0-1, 2*n1-1, 2*n2-1)``
and are indexed by ``o + n - 1`` where ``o = x - y`` is the integer cell
offset between an output cell and a source cell.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cosh, floor, pow

cnp.import_array()


cdef inline double complex _profile(double t, int mode, int power_k) noexcept nogil:
    if mode == 1:
        return cosh(t)
    return pow(t, power_k)


def stencil_apply(
    const double complex[:, :, ::1] stencil,
    const cnp.int64_t[:, ::1] sup_idx,
    const double complex[::1] sup_val,
    const cnp.int64_t[:, ::1] out_idx,
    bint antisym,
    const cnp.int64_t[:, :, ::1] rank,
    int num_threads=1,
):
    """Sum ``stencil[x - y] * f[y]`` over support cells for every output cell."""
    cdef Py_ssize_t n0 = (stencil.shape[0] + 1) // 2
    cdef Py_ssize_t n1 = (stencil.shape[1] + 1) // 2
    cdef Py_ssize_t n2 = (stencil.shape[2] + 1) // 2
    cdef Py_ssize_t m = out_idx.shape[0]
    cdef Py_ssize_t s = sup_idx.shape[0]
    out_arr = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef cnp.int64_t x0, x1, x2, o0, o1, o2, p0, p1, p2, r
    cdef double complex acc, term
    for i in prange(m, nogil=True, schedule="static", num_threads=num_threads):
        x0 = out_idx[i, 0]
        x1 = out_idx[i, 1]
        x2 = out_idx[i, 2]
        acc = 0
        for k in range(s):
            o0 = x0 - sup_idx[k, 0]
            o1 = x1 - sup_idx[k, 1]
            o2 = x2 - sup_idx[k, 2]
            if not antisym:
                acc = acc + stencil[o0 + n0 - 1, o1 + n1 - 1, o2 + n2 - 1] * sup_val[k]
                continue
            if o0 == 0 and o1 == 0 and o2 == 0:
                continue
            # partner y' = 2x - y, i.e. offset -o
            p0 = x0 + o0
            p1 = x1 + o1
            p2 = x2 + o2
            r = -1
            if 0 <= p0 < n0 and 0 <= p1 < n1 and 0 <= p2 < n2:
                r = rank[p0, p1, p2]
            if 0 <= r < k:
                continue
            term = stencil[o0 + n0 - 1, o1 + n1 - 1, o2 + n2 - 1] * sup_val[k]
            if r >= 0:
                term = term + stencil[n0 - 1 - o0, n1 - 1 - o1, n2 - 1 - o2] * sup_val[r]
            acc = acc + term
        out[i] = acc
    return out_arr


def modulated_apply(
    const double complex[:, :, ::1] sstencil,
    const double[:, :, ::1] rstencil,
    const double[:, :, :, ::1] zstencil,
    const double[:, :, ::1] agrid,
    const double[:, ::1] coef,
    const cnp.int64_t[:, ::1] sup_idx,
    const double complex[::1] sup_val,
    const cnp.int64_t[:, ::1] out_idx,
    int mode,
    int power_k,
    bint antisym,
    const cnp.int64_t[:, :, ::1] rank,
    int num_threads=1,
):
    """Sum ``S[o] * G((A[x] - sum_a C_a[y] Z_a[o]) * R[o]) * f[y]``.

    ``mode`` 0 selects ``G(t) = t**power_k``, mode 1 selects ``cosh``.
    """
    cdef Py_ssize_t n0 = (sstencil.shape[0] + 1) // 2
    cdef Py_ssize_t n1 = (sstencil.shape[1] + 1) // 2
    cdef Py_ssize_t n2 = (sstencil.shape[2] + 1) // 2
    cdef Py_ssize_t na = zstencil.shape[0]
    cdef Py_ssize_t m = out_idx.shape[0]
    cdef Py_ssize_t s = sup_idx.shape[0]
    out_arr = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef Py_ssize_t i, k, a
    cdef cnp.int64_t x0, x1, x2, o0, o1, o2, p0, p1, p2, r
    cdef Py_ssize_t q0, q1, q2
    cdef double ax, tz, t
    cdef double complex acc, term
    for i in prange(m, nogil=True, schedule="static", num_threads=num_threads):
        x0 = out_idx[i, 0]
        x1 = out_idx[i, 1]
        x2 = out_idx[i, 2]
        ax = agrid[x0, x1, x2]
        acc = 0
        for k in range(s):
            o0 = x0 - sup_idx[k, 0]
            o1 = x1 - sup_idx[k, 1]
            o2 = x2 - sup_idx[k, 2]
            if o0 == 0 and o1 == 0 and o2 == 0:
                continue
            r = -1
            if antisym:
                p0 = x0 + o0
                p1 = x1 + o1
                p2 = x2 + o2
                if 0 <= p0 < n0 and 0 <= p1 < n1 and 0 <= p2 < n2:
                    r = rank[p0, p1, p2]
                if 0 <= r < k:
                    continue
            q0 = o0 + n0 - 1
            q1 = o1 + n1 - 1
            q2 = o2 + n2 - 1
            tz = 0.0
            for a in range(na):
                tz = tz + coef[a, k] * zstencil[a, q0, q1, q2]
            t = (ax - tz) * rstencil[q0, q1, q2]
            term = sstencil[q0, q1, q2] * _profile(t, mode, power_k) * sup_val[k]
            if r >= 0:
                q0 = n0 - 1 - o0
                q1 = n1 - 1 - o1
                q2 = n2 - 1 - o2
                tz = 0.0
                for a in range(na):
                    tz = tz + coef[a, r] * zstencil[a, q0, q1, q2]
                t = (ax - tz) * rstencil[q0, q1, q2]
                term = term + sstencil[q0, q1, q2] * _profile(t, mode, power_k) * sup_val[r]
            acc = acc + term
        out[i] = acc
    return out_arr


cdef inline cnp.uint64_t _slot(cnp.int64_t key, cnp.uint64_t mask) noexcept nogil:
    cdef cnp.uint64_t h = <cnp.uint64_t>key * 0x9E3779B97F4A7C15ULL
    return (h >> 17) & mask


def greedy_net(const double[:, ::1] nodes, double sep, Py_ssize_t bound):
    """Indices of a maximal ``sep``-separated subset, scanning nodes in order.

    A node is kept unless some already kept node lies at distance ``< sep``.
    Kept nodes are bucketed in a hash of cubic cells of side ``sep`` so each
    test only visits the 27 neighbouring cells.
    """
    cdef Py_ssize_t m = nodes.shape[0]
    cdef Py_ssize_t cap = 1024
    while cap < 2 * bound + 16:
        cap *= 2
    cdef cnp.uint64_t mask = cap - 1
    keys_arr = np.full(cap, -1, dtype=np.int64)
    heads_arr = np.full(cap, -1, dtype=np.int64)
    nxt_arr = np.full(bound, -1, dtype=np.int64)
    sel_arr = np.empty(bound, dtype=np.int64)
    cdef cnp.int64_t[::1] keys = keys_arr
    cdef cnp.int64_t[::1] heads = heads_arr
    cdef cnp.int64_t[::1] nxt = nxt_arr
    cdef cnp.int64_t[::1] sel = sel_arr
    cdef cnp.int64_t ncell = <cnp.int64_t>floor(2.0 / sep) + 3
    cdef double sep2 = sep * sep
    cdef Py_ssize_t count = 0
    cdef Py_ssize_t i, j
    cdef cnp.int64_t c0, c1, c2, d0, d1, d2, key, p
    cdef cnp.uint64_t slot
    cdef double dx, dy, dz
    cdef bint ok
    with nogil:
        for i in range(m):
            c0 = <cnp.int64_t>floor((nodes[i, 0] + 1.0) / sep) + 1
            c1 = <cnp.int64_t>floor((nodes[i, 1] + 1.0) / sep) + 1
            c2 = <cnp.int64_t>floor((nodes[i, 2] + 1.0) / sep) + 1
            ok = True
            for d0 in range(c0 - 1, c0 + 2):
                if not ok:
                    break
                for d1 in range(c1 - 1, c1 + 2):
                    if not ok:
                        break
                    for d2 in range(c2 - 1, c2 + 2):
                        key = (d0 * ncell + d1) * ncell + d2
                        slot = _slot(key, mask)
                        while keys[slot] != -1 and keys[slot] != key:
                            slot = (slot + 1) & mask
                        if keys[slot] == -1:
                            continue
                        p = heads[slot]
                        while p != -1:
                            j = sel[p]
                            dx = nodes[i, 0] - nodes[j, 0]
                            dy = nodes[i, 1] - nodes[j, 1]
                            dz = nodes[i, 2] - nodes[j, 2]
                            if dx * dx + dy * dy + dz * dz < sep2:
                                ok = False
                                break
                            p = nxt[p]
                        if not ok:
                            break
            if not ok:
                continue
            if count >= bound:
                with gil:
                    raise RuntimeError("direction net exceeded its size bound")
            key = (c0 * ncell + c1) * ncell + c2
            slot = _slot(key, mask)
            while keys[slot] != -1 and keys[slot] != key:
                slot = (slot + 1) & mask
            if keys[slot] == -1:
                keys[slot] = key
            sel[count] = i
            nxt[count] = heads[slot]
            heads[slot] = count
            count += 1
    return sel_arr[:count].copy()
