# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of _hawkes_np: per-event history sums for log lambda.

Same contract as _hawkes_np.point_logintensity_terms; the pairwise loop
over (target, prior source) dominates fit runtime, so it runs as plain C
parallelized over targets.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log

cnp.import_array()


cdef void _one_target(double t, Py_ssize_t k, const double* st,
                      const double* dm, const double* w, const double* rmax,
                      double logmu, double K, double c, double p,
                      bint have_k, bint need_grad,
                      double* loglam_i, double* grad_i) nogil:
    # all accumulators are stack locals: thread-private under prange
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double shift = logmu
    cdef double u, lu, e, total
    cdef Py_ssize_t h
    if have_k and k > 0:
        if rmax[k - 1] > shift:
            shift = rmax[k - 1]
        if need_grad:
            for h in range(k):
                u = (t - st[h]) / c + 1.0
                lu = log(u)
                e = exp(w[h] - shift - p * lu)
                s0 += e
                s1 += e * dm[h]
                s2 += e * (u - 1.0) / u
                s3 += e * lu
        else:
            for h in range(k):
                u = (t - st[h]) / c + 1.0
                s0 += exp(w[h] - shift - p * log(u))
    total = exp(logmu - shift) + s0
    loglam_i[0] = shift + log(total)
    if need_grad:
        grad_i[0] = exp(-shift) / total
        grad_i[1] = s0 / (K * total) if K > 0.0 else 0.0
        grad_i[2] = s1 / total
        grad_i[3] = s2 * (p / c) / total
        grad_i[4] = -s3 / total


def point_logintensity_terms(src_times, src_dm, tgt_times, tgt_prefix,
                             double mu, double K, double alpha, double c,
                             double p, bint need_grad=True):
    """log lambda at each target plus its ETAS-scale partial derivatives."""
    cdef const double[::1] st = np.ascontiguousarray(src_times, dtype=np.float64)
    cdef const double[::1] dm = np.ascontiguousarray(src_dm, dtype=np.float64)
    cdef const double[::1] tt = np.ascontiguousarray(tgt_times, dtype=np.float64)
    cdef const long long[::1] pre = np.ascontiguousarray(tgt_prefix, dtype=np.int64)
    cdef Py_ssize_t n = tt.shape[0]
    cdef Py_ssize_t m = st.shape[0]

    loglam_arr = np.empty(n)
    grad_arr = np.empty((n, 5))
    cdef double[::1] loglam = loglam_arr
    cdef double[:, ::1] grad = grad_arr

    cdef double logmu = log(mu) if mu > 0.0 else -np.inf
    cdef bint have_k = K > 0.0 and m > 0
    w_arr = (np.log(K) + alpha * np.asarray(src_dm, dtype=np.float64)
             if have_k else np.zeros(1))
    # running max of source log-weights: log u >= 0 makes it an upper
    # bound on every kernel term, a safe single-pass shift
    rmax_arr = np.maximum.accumulate(w_arr)
    cdef const double[::1] w = np.ascontiguousarray(w_arr)
    cdef const double[::1] rmax = np.ascontiguousarray(rmax_arr)

    cdef const double* st_p = &st[0] if m > 0 else NULL
    cdef const double* dm_p = &dm[0] if m > 0 else NULL
    cdef const double* w_p = &w[0]
    cdef const double* rmax_p = &rmax[0]
    cdef double* ll_p = &loglam[0] if n > 0 else NULL
    cdef double* g_p = &grad[0, 0] if n > 0 else NULL

    cdef Py_ssize_t i
    for i in prange(n, nogil=True, schedule="static"):
        _one_target(tt[i], pre[i], st_p, dm_p, w_p, rmax_p, logmu, K, c, p,
                    have_k, need_grad, ll_p + i, g_p + 5 * i)
    return loglam_arr, (grad_arr if need_grad else None)
