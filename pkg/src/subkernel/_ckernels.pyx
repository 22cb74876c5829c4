# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see ``_pykernels`` for the contracts)."""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef enum:
    BLOCK = 256


def truncated_convolve(a, b, Py_ssize_t K):
    cdef const double[::1] av = np.ascontiguousarray(a[: K + 1], dtype=float)
    cdef const double[::1] bv = np.ascontiguousarray(b[: K + 1], dtype=float)
    out = np.zeros(K + 1)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, na = av.shape[0], nb = bv.shape[0], jmax
    cdef double ai
    with nogil:
        for i in range(na):
            ai = av[i]
            if ai == 0.0:
                continue
            jmax = min(nb, K + 1 - i)
            for j in range(jmax):
                o[i + j] += ai * bv[j]
    return out


def renewal_sequence(pmf, Py_ssize_t S):
    cdef const double[::1] p = np.ascontiguousarray(pmf, dtype=float)
    cdef Py_ssize_t Kp = p.shape[0] - 1, s, k, m
    out = np.zeros(S + 1)
    cdef double[::1] u = out
    cdef double acc
    u[0] = 1.0
    with nogil:
        for s in range(1, S + 1):
            m = min(s, Kp)
            acc = 0.0
            for k in range(1, m + 1):
                acc += p[k] * u[s - k]
            u[s] = acc
    return out


cdef void _flush(const double[:, ::1] W, Py_ssize_t start, Py_ssize_t fill,
                 double[:, ::1] buf, double[:, ::1] acc) noexcept nogil:
    # acc (q x L) += W[:, start:start+fill] (q x fill) @ buf[:fill] (fill x L)
    # Row-major trick: compute acc^T = buf^T W^T in column-major terms.
    cdef int L = <int> buf.shape[1]
    cdef int q = <int> W.shape[0]
    cdef int kk = <int> fill
    cdef int ldw = <int> W.shape[1]
    cdef int ldb = L
    cdef int ldc = L
    cdef double one = 1.0
    cdef char tn = b'N'
    if kk == 0 or q == 0:
        return
    dgemm(&tn, &tn, &L, &q, &kk, &one, &buf[0, 0], &ldb,
          &W[0, start], &ldw, &one, &acc[0, 0], &ldc)


def power_accumulate(PT, Vt0, W, inv_mu, double leak_tol):
    P = PT.T.tocsr()  # forward CSR: row i lists successors of i
    cdef const cnp.int32_t[::1] ip = np.ascontiguousarray(P.indptr, dtype=np.int32)
    cdef const cnp.int32_t[::1] ix = np.ascontiguousarray(P.indices, dtype=np.int32)
    cdef const double[::1] pd = np.ascontiguousarray(P.data, dtype=float)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=float)
    cdef const double[::1] im = np.ascontiguousarray(inv_mu, dtype=float)
    cdef Py_ssize_t N = Vt0.shape[0], m = Vt0.shape[1]
    cdef Py_ssize_t q = Wv.shape[0], K = Wv.shape[1] - 1
    cdef Py_ssize_t L = N * m
    acc_a = np.zeros((q, L))
    mass_a = np.zeros((K + 1, m))
    sup_a = np.zeros((K + 1, m))
    buf_a = np.empty((BLOCK, L))
    cur_a = np.array(Vt0, dtype=float, order="C")
    nxt_a = np.zeros((N, m))
    cdef double[:, ::1] acc = acc_a, mass = mass_a, sup = sup_a, buf = buf_a
    cdef double[:, ::1] cur = cur_a, nxt = nxt_a, tmp
    cdef Py_ssize_t k, i, r, p, j, start = 0, fill = 0, K_eff = K
    cdef double a, s, d, best
    cdef bint stop = False
    with nogil:
        for k in range(K + 1):
            if k > 0:
                nxt[:, :] = 0.0
                for i in range(N):
                    for r in range(m):
                        a = cur[i, r]
                        if a == 0.0:
                            continue
                        for p in range(ip[i], ip[i + 1]):
                            nxt[ix[p], r] += a * pd[p]
                tmp = cur
                cur = nxt
                nxt = tmp
            for r in range(m):
                s = 0.0
                best = 0.0
                for i in range(N):
                    s += cur[i, r]
                    d = cur[i, r] * im[i]
                    if d > best:
                        best = d
                if k > 0 and 1.0 - s > leak_tol:
                    stop = True
                mass[k, r] = s
                sup[k, r] = best
            if stop:
                K_eff = k - 1
                break
            for i in range(N):
                for r in range(m):
                    buf[fill, i * m + r] = cur[i, r]
            fill += 1
            if fill == BLOCK:
                _flush(Wv, start, fill, buf, acc)
                start += fill
                fill = 0
        _flush(Wv, start, fill, buf, acc)
    return (acc_a.reshape(q, N, m), mass_a[: K_eff + 1], sup_a[: K_eff + 1], K_eff)


cdef inline Py_ssize_t _bisect_right(const double[::1] arr, Py_ssize_t lo,
                                     Py_ssize_t hi, double x) noexcept nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < arr[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def sample_paths(step_cdf, indptr, indices, cumprob, Py_ssize_t x0,
                 Py_ssize_t n_steps, Py_ssize_t n_paths, rng):
    cdef const double[::1] cdf = np.ascontiguousarray(step_cdf, dtype=float)
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] cp = np.ascontiguousarray(cumprob, dtype=float)
    pos_a = np.empty((n_paths, n_steps), dtype=np.int64)
    times_a = np.empty((n_paths, n_steps), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] pos = pos_a, times = times_a
    capsule = rng.bit_generator.capsule
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    cdef Py_ssize_t K = cdf.shape[0] - 1
    cdef Py_ssize_t path, n, R, j, x, lo, hi, p, status
    cdef long long T
    cdef double u
    lock = rng.bit_generator.lock
    lock.acquire()
    try:
        with nogil:
          for path in range(n_paths):
            x = x0
            T = 0
            status = 0
            for n in range(n_steps):
                if status == 0:
                    u = bg.next_double(bg.state)
                    R = _bisect_right(cdf, 0, K + 1, u)
                    if R > K:
                        status = -2
                    else:
                        T += R
                        for j in range(R):
                            lo = ip[x]
                            hi = ip[x + 1]
                            u = bg.next_double(bg.state)
                            p = _bisect_right(cp, lo, hi, u)
                            if p >= hi:
                                status = -1
                                break
                            x = ix[p]
                if status == 0:
                    pos[path, n] = x
                    times[path, n] = T
                else:
                    pos[path, n] = status
                    times[path, n] = -1
    finally:
        lock.release()
    return pos_a, times_a
