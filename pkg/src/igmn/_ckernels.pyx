# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled learning loops and batch prediction.

The loops process points until the end of the data or until a structural
event (a creation or a pruning) needs Python-side bookkeeping, then return
``(next_index, event)``.  Arithmetic mirrors :mod:`igmn.fast` and
:mod:`igmn.reference` term by term.
"""

from libc.math cimport log, log1p, exp, sqrt, INFINITY
from libc.stdint cimport int64_t

import numpy as np

cdef double LOG_2PI = 1.8378770664093453

EVENT_END = 0
EVENT_CREATE = 1
EVENT_PRUNE = 2
EVENT_DEGENERATE = 3

cdef enum:
    _END = 0
    _CREATE = 1
    _PRUNE = 2
    _DEGENERATE = 3


cdef inline void _softmax(double[::1] terms, double[::1] d2, Py_ssize_t K,
                          double* out) noexcept nogil:
    cdef Py_ssize_t k, best
    cdef double m = -INFINITY, s = 0.0, lse, bd
    for k in range(K):
        if terms[k] > m:
            m = terms[k]
    if m == -INFINITY:
        best = 0
        bd = d2[0]
        for k in range(1, K):
            if d2[k] < bd:
                bd = d2[k]
                best = k
        for k in range(K):
            out[k] = 0.0
        out[best] = 1.0
        return
    for k in range(K):
        s += exp(terms[k] - m)
    lse = m + log(s)
    for k in range(K):
        out[k] = exp(terms[k] - lse)


cdef inline bint _prune_due(int64_t[::1] age, double[::1] sp, Py_ssize_t K,
                            int64_t v_min, double sp_min) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(K):
        if age[k] > v_min and sp[k] < sp_min:
            return True
    return False


cdef inline void _renormalize(double[::1] sp, double[::1] prior, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t k
    cdef double total = 0.0
    for k in range(K):
        total += sp[k]
    for k in range(K):
        prior[k] = sp[k] / total


cdef int _cholesky(const double* a, double* L, Py_ssize_t n, Py_ssize_t lda,
                   Py_ssize_t ldl) noexcept nogil:
    """Lower Cholesky factor of the n x n matrix at ``a`` (row stride lda) into
    ``L`` (row stride ldl).  Returns 0, or -1 when not positive definite."""
    cdef Py_ssize_t i, j, p
    cdef double s
    for j in range(n):
        s = a[j * lda + j]
        for p in range(j):
            s -= L[j * ldl + p] * L[j * ldl + p]
        if not s > 0.0:
            return -1
        s = sqrt(s)
        L[j * ldl + j] = s
        for i in range(j + 1, n):
            L[j * ldl + i] = 0.0
        for i in range(j + 1, n):
            s = a[i * lda + j]
            for p in range(j):
                s -= L[i * ldl + p] * L[j * ldl + p]
            L[i * ldl + j] = s / L[j * ldl + j]
    return 0


# -- precision form ------------------------------------------------------------


cdef int _fast_loop(double[:, ::1] means, double[:, :, ::1] precs, double[::1] log_det,
                    double[::1] sp, int64_t[::1] age, double[::1] prior, Py_ssize_t K,
                    const double[:, ::1] X, Py_ssize_t start, double threshold,
                    double guard_eps, bint pruning, int64_t v_min, double sp_min,
                    int64_t[::1] counters, double[:, ::1] diff, double[:, ::1] lam_e,
                    double[::1] d2, double[::1] terms, double[::1] resp,
                    Py_ssize_t* stop) noexcept nogil:
    cdef Py_ssize_t N = X.shape[0], D = X.shape[1]
    cdef Py_ssize_t n, k, i, j
    cdef double q, r, w, c, g, one_m, inv, coef, vi
    cdef double half_norm = -0.5 * D * LOG_2PI
    cdef bint near
    cdef double* P
    cdef double* le

    for n in range(start, N):
        near = False
        for k in range(K):
            for j in range(D):
                diff[k, j] = X[n, j] - means[k, j]
            # row sweeps (axpy form) since the precision is symmetric
            P = &precs[k, 0, 0]
            le = &lam_e[k, 0]
            for j in range(D):
                le[j] = 0.0
            for i in range(D):
                vi = diff[k, i]
                for j in range(D):
                    le[j] += P[i * D + j] * vi
            q = 0.0
            for i in range(D):
                q = q + diff[k, i] * le[i]
            d2[k] = q
            if q < threshold:
                near = True
        if not near:
            stop[0] = n
            return _CREATE

        for k in range(K):
            terms[k] = half_norm - 0.5 * log_det[k] - 0.5 * d2[k] + log(prior[k])
        _softmax(terms, d2, K, &resp[0])

        for k in range(K):
            r = resp[k]
            age[k] += 1
            sp[k] += r
            w = r / sp[k]
            for j in range(D):
                means[k, j] += w * diff[k, j]
            if w == 0.0:
                continue
            c = w * (1.0 + w * (w - 3.0))
            one_m = 1.0 - w
            g = 1.0 + c / one_m * d2[k]
            if g <= guard_eps:
                counters[0] += 1
                continue
            # determinant first: it reads the previous precision through d2
            log_det[k] += D * log1p(-w) + log(g)
            inv = 1.0 / one_m
            coef = c / (one_m * one_m) / g
            P = &precs[k, 0, 0]
            le = &lam_e[k, 0]
            # full sweep; le[i] * le[j] commutes exactly, so symmetry is kept
            for i in range(D):
                vi = le[i]
                for j in range(D):
                    P[i * D + j] = P[i * D + j] * inv - coef * (vi * le[j])

        _renormalize(sp, prior, K)
        counters[1] += 1
        if pruning and _prune_due(age, sp, K, v_min, sp_min):
            stop[0] = n + 1
            return _PRUNE
    stop[0] = N
    return _END


def fast_run(double[:, ::1] means, double[:, :, ::1] precs, double[::1] log_det,
             double[::1] sp, int64_t[::1] age, double[::1] prior, Py_ssize_t K,
             const double[:, ::1] X, Py_ssize_t start, double threshold, double guard_eps,
             bint pruning, int64_t v_min, double sp_min, int64_t[::1] counters):
    """Precision-form learning from ``X[start]`` onwards.

    ``counters`` accumulates ``[skipped_updates, update_steps]``.
    """
    cdef Py_ssize_t KK = max(K, 1), D = X.shape[1]
    cdef double[:, ::1] diff = np.empty((KK, D))
    cdef double[:, ::1] lam_e = np.empty((KK, D))
    cdef double[::1] d2 = np.empty(KK)
    cdef double[::1] terms = np.empty(KK)
    cdef double[::1] resp = np.empty(KK)
    cdef Py_ssize_t stop = start
    cdef int event
    with nogil:
        event = _fast_loop(means, precs, log_det, sp, age, prior, K, X, start, threshold,
                           guard_eps, pruning, v_min, sp_min, counters, diff, lam_e, d2,
                           terms, resp, &stop)
    return stop, event


# -- covariance form -----------------------------------------------------------


cdef int _reference_loop(double[:, ::1] means, double[:, :, ::1] covs, double[::1] log_det,
                         double[::1] sp, int64_t[::1] age, double[::1] prior, Py_ssize_t K,
                         const double[:, ::1] X, Py_ssize_t start, double threshold,
                         double guard_eps, bint pruning, int64_t v_min, double sp_min,
                         int64_t[::1] counters, double[:, :, ::1] chol, double[:, ::1] tmp,
                         double[:, ::1] tmpL, double[:, ::1] diff, double[::1] z,
                         double[::1] estar, double[::1] dmu, double[::1] d2,
                         double[::1] terms, double[::1] resp, Py_ssize_t* stop) noexcept nogil:
    cdef Py_ssize_t N = X.shape[0], D = X.shape[1]
    cdef Py_ssize_t n, k, i, j, p
    cdef double s, q, r, w, c, g, one_m, ld
    cdef double half_norm = -0.5 * D * LOG_2PI
    cdef bint near

    for k in range(K):
        if _cholesky(&covs[k, 0, 0], &chol[k, 0, 0], D, D, D) != 0:
            stop[0] = k
            return _DEGENERATE

    for n in range(start, N):
        near = False
        for k in range(K):
            for j in range(D):
                diff[k, j] = X[n, j] - means[k, j]
            q = 0.0
            for i in range(D):
                s = diff[k, i]
                for p in range(i):
                    s -= chol[k, i, p] * z[p]
                z[i] = s / chol[k, i, i]
                q += z[i] * z[i]
            d2[k] = q
            if q < threshold:
                near = True
        if not near:
            stop[0] = n
            return _CREATE

        for k in range(K):
            terms[k] = half_norm - 0.5 * log_det[k] - 0.5 * d2[k] + log(prior[k])
        _softmax(terms, d2, K, &resp[0])

        for k in range(K):
            r = resp[k]
            age[k] += 1
            sp[k] += r
            w = r / sp[k]
            for j in range(D):
                dmu[j] = w * diff[k, j]
                means[k, j] += dmu[j]
                estar[j] = X[n, j] - means[k, j]
            if w == 0.0:
                continue
            c = w * (1.0 + w * (w - 3.0))
            one_m = 1.0 - w
            g = 1.0 + c / one_m * d2[k]
            if g <= guard_eps:
                counters[0] += 1
                continue
            for i in range(D):
                for j in range(i, D):
                    s = one_m * covs[k, i, j] + w * estar[i] * estar[j] - dmu[i] * dmu[j]
                    tmp[i, j] = s
                    tmp[j, i] = s
            if _cholesky(&tmp[0, 0], &tmpL[0, 0], D, D, D) != 0:
                counters[0] += 1
                continue
            ld = 0.0
            for i in range(D):
                ld += log(tmpL[i, i])
            log_det[k] = 2.0 * ld
            for i in range(D):
                for j in range(D):
                    covs[k, i, j] = tmp[i, j]
                    chol[k, i, j] = tmpL[i, j]

        _renormalize(sp, prior, K)
        counters[1] += 1
        if pruning and _prune_due(age, sp, K, v_min, sp_min):
            stop[0] = n + 1
            return _PRUNE
    stop[0] = N
    return _END


def reference_run(double[:, ::1] means, double[:, :, ::1] covs, double[::1] log_det,
                  double[::1] sp, int64_t[::1] age, double[::1] prior, Py_ssize_t K,
                  const double[:, ::1] X, Py_ssize_t start, double threshold, double guard_eps,
                  bint pruning, int64_t v_min, double sp_min, int64_t[::1] counters):
    """Covariance-form learning with a dense Cholesky per component and step.

    Event ``EVENT_DEGENERATE`` reports (as the index) a component whose
    covariance was not positive definite on entry.
    """
    cdef Py_ssize_t KK = max(K, 1), D = X.shape[1]
    cdef double[:, :, ::1] chol = np.zeros((KK, D, D))
    cdef double[:, ::1] tmp = np.empty((D, D))
    cdef double[:, ::1] tmpL = np.empty((D, D))
    cdef double[:, ::1] diff = np.empty((KK, D))
    cdef double[::1] z = np.empty(D)
    cdef double[::1] estar = np.empty(D)
    cdef double[::1] dmu = np.empty(D)
    cdef double[::1] d2 = np.empty(KK)
    cdef double[::1] terms = np.empty(KK)
    cdef double[::1] resp = np.empty(KK)
    cdef Py_ssize_t stop = start
    cdef int event
    with nogil:
        event = _reference_loop(means, covs, log_det, sp, age, prior, K, X, start, threshold,
                                guard_eps, pruning, v_min, sp_min, counters, chol, tmp, tmpL,
                                diff, z, estar, dmu, d2, terms, resp, &stop)
    return stop, event


# -- inference -----------------------------------------------------------------


cdef Py_ssize_t _precision_predict(const double[:, ::1] means, const double[:, :, ::1] precs,
                                   const double[::1] log_det, const double[::1] prior,
                                   Py_ssize_t K, const double[:, ::1] Xk,
                                   const int64_t[::1] known, const int64_t[::1] target,
                                   double[:, ::1] out_mean, double[:, :, ::1] out_cov,
                                   double[:, ::1] out_post, double[:, :, ::1] tinv,
                                   double[::1] log_det_marg, double[:, ::1] blk,
                                   double[:, ::1] Lt, double[::1] col, double[::1] r,
                                   double[::1] bvec, double[:, ::1] cmean,
                                   double[::1] terms, double[::1] d2,
                                   double* min_d2) noexcept nogil:
    cdef Py_ssize_t N = Xk.shape[0], ni = known.shape[0], o = target.shape[0]
    cdef Py_ssize_t oo = blk.shape[1]
    cdef Py_ssize_t n, k, a, b, t, u
    cdef double s, q, acc, ld
    cdef double half_norm = -0.5 * ni * LOG_2PI

    for k in range(K):
        for a in range(o):
            for b in range(o):
                blk[a, b] = precs[k, target[a], target[b]]
        if o > 0 and _cholesky(&blk[0, 0], &Lt[0, 0], o, oo, oo) != 0:
            return k
        ld = 0.0
        for a in range(o):
            ld += log(Lt[a, a])
        log_det_marg[k] = log_det[k] + 2.0 * ld
        # target-block inverse, one column at a time: L L^T x = e_u
        for u in range(o):
            for a in range(o):
                s = 1.0 if a == u else 0.0
                for b in range(a):
                    s -= Lt[a, b] * col[b]
                col[a] = s / Lt[a, a]
            for a in range(o - 1, -1, -1):
                s = col[a]
                for b in range(a + 1, o):
                    s -= Lt[b, a] * col[b]
                col[a] = s / Lt[a, a]
            for a in range(o):
                tinv[k, a, u] = col[a]
        for a in range(o):
            for b in range(a + 1, o):
                s = 0.5 * (tinv[k, a, b] + tinv[k, b, a])
                tinv[k, a, b] = s
                tinv[k, b, a] = s

    for n in range(N):
        for k in range(K):
            for a in range(ni):
                r[a] = Xk[n, a] - means[k, known[a]]
            q = 0.0
            for a in range(ni):
                acc = 0.0
                for b in range(ni):
                    acc += precs[k, known[a], known[b]] * r[b]
                q += r[a] * acc
            for t in range(o):
                acc = 0.0
                for a in range(ni):
                    acc += precs[k, target[t], known[a]] * r[a]
                bvec[t] = acc
            for t in range(o):
                acc = 0.0
                for u in range(o):
                    acc += tinv[k, t, u] * bvec[u]
                cmean[k, t] = means[k, target[t]] - acc
                q -= bvec[t] * acc
            d2[k] = q
            terms[k] = half_norm - 0.5 * log_det_marg[k] - 0.5 * q + log(prior[k])
        if min_d2 != NULL:
            q = d2[0]
            for k in range(1, K):
                if d2[k] < q:
                    q = d2[k]
            min_d2[n] = q
        _softmax(terms, d2, K, &out_post[n, 0])
        for t in range(o):
            acc = 0.0
            for k in range(K):
                acc += out_post[n, k] * cmean[k, t]
            out_mean[n, t] = acc
        for t in range(o):
            for u in range(o):
                acc = 0.0
                for k in range(K):
                    acc += out_post[n, k] * (tinv[k, t, u] + cmean[k, t] * cmean[k, u])
                out_cov[n, t, u] = acc - out_mean[n, t] * out_mean[n, u]
    return -1


def precision_predict(const double[:, ::1] means, const double[:, :, ::1] precs,
                      const double[::1] log_det, const double[::1] prior, Py_ssize_t K,
                      const double[:, ::1] Xk, const int64_t[::1] known,
                      const int64_t[::1] target, double[:, ::1] out_mean,
                      double[:, :, ::1] out_cov, double[:, ::1] out_post,
                      double[::1] out_min_d2=None):
    """Conditional means/covariances of the target block for every row of ``Xk``.

    Works from precision blocks only: a component's conditional covariance is
    the inverse of its target block, and the known-block marginal uses
    ``Lambda_i - Lambda_it Lambda_t^-1 Lambda_ti`` with
    ``log|Sigma_i| = log|Sigma| + log|Lambda_t|``.  Returns -1 on success or
    the index of a component whose target block is not positive definite.
    When given, ``out_min_d2[n]`` receives the smallest known-block squared
    Mahalanobis distance of row ``n`` over all components.
    """
    cdef Py_ssize_t ni = known.shape[0], o = target.shape[0]
    cdef Py_ssize_t KK = max(K, 1), oo = max(o, 1)
    cdef double[:, :, ::1] tinv = np.zeros((KK, oo, oo))
    cdef double[::1] log_det_marg = np.empty(KK)
    cdef double[:, ::1] blk = np.empty((oo, oo))
    cdef double[:, ::1] Lt = np.empty((oo, oo))
    cdef double[::1] col = np.empty(oo)
    cdef double[::1] r = np.empty(max(ni, 1))
    cdef double[::1] bvec = np.empty(oo)
    cdef double[:, ::1] cmean = np.empty((KK, oo))
    cdef double[::1] terms = np.empty(KK)
    cdef double[::1] d2 = np.empty(KK)
    cdef double* md = NULL
    cdef Py_ssize_t status
    if K < 1:
        raise ValueError("prediction needs at least one component")
    if out_min_d2 is not None:
        if out_min_d2.shape[0] < Xk.shape[0]:
            raise ValueError("out_min_d2 is shorter than Xk")
        md = &out_min_d2[0]
    with nogil:
        status = _precision_predict(means, precs, log_det, prior, K, Xk, known, target,
                                    out_mean, out_cov, out_post, tinv, log_det_marg, blk,
                                    Lt, col, r, bvec, cmean, terms, d2, md)
    return status
