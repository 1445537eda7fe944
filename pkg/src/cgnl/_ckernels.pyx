# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the z-first compact product and the oracle's
materialized pairwise matrix.  Signatures mirror ``_pykernels``."""

from libc.math cimport exp
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

cdef enum:
    DOT = 0
    EGAUSS = 1
    RBF = 2


cdef void _compact(const double[:, ::1] theta, const double[:, ::1] phi,
                   const double[:, ::1] g, const double[::1] at, const double[::1] ap,
                   double[:, :, ::1] tl, double[:, :, ::1] pl,
                   double[:, ::1] z, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t B = theta.shape[0], M = theta.shape[1], K = at.shape[0]
    cdef Py_ssize_t b, i, p
    cdef double pt, pp, acc
    for b in range(B):
        for i in range(M):
            pt = 1.0
            pp = 1.0
            for p in range(K):
                tl[b, i, p] = at[p] * pt
                pl[b, i, p] = ap[p] * pp
                pt = pt * theta[b, i]
                pp = pp * phi[b, i]
        for p in range(K):
            z[b, p] = 0.0
        for i in range(M):
            for p in range(K):
                z[b, p] = z[b, p] + pl[b, i, p] * g[b, i]
        for i in range(M):
            acc = 0.0
            for p in range(K):
                acc = acc + tl[b, i, p] * z[b, p]
            out[b, i] = acc


cdef void _pairwise(const double[::1] theta, const double[::1] phi, const double[::1] g,
                    const double[::1] alpha_sq, int family, double gamma, bint use_taylor,
                    double[:, ::1] pair, double[::1] out) noexcept nogil:
    cdef Py_ssize_t M = theta.shape[0], K = alpha_sq.shape[0]
    cdef Py_ssize_t i, j, p
    cdef double x, acc, pw, d
    for i in range(M):
        for j in range(M):
            x = theta[i] * phi[j]
            if use_taylor:
                acc = alpha_sq[0]
                pw = 1.0
                for p in range(1, K):
                    pw = pw * x
                    acc = acc + alpha_sq[p] * pw
            elif family == DOT:
                acc = x
            elif family == EGAUSS:
                acc = exp(x)
            else:
                d = theta[i] - phi[j]
                acc = exp(-gamma * (d * d))
            pair[i, j] = acc
    for i in range(M):
        acc = 0.0
        for j in range(M):
            acc = acc + pair[i, j] * g[j]
        out[i] = acc


def compact_forward(const double[:, ::1] theta, const double[:, ::1] phi,
                    const double[:, ::1] g, const double[::1] alpha_theta,
                    const double[::1] alpha_phi, double[:, :, ::1] theta_lift, double[:, :, ::1] phi_lift,
                    double[:, ::1] z, double[:, ::1] out):
    with nogil:
        _compact(theta, phi, g, alpha_theta, alpha_phi, theta_lift, phi_lift, z, out)


def pairwise_forward(const double[::1] theta, const double[::1] phi, const double[::1] g,
                     const double[::1] alpha_sq, int family, double gamma, bint use_taylor,
                     double[:, ::1] pair, double[::1] out):
    with nogil:
        _pairwise(theta, phi, g, alpha_sq, family, gamma, use_taylor, pair, out)


cdef long long _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <long long>ts.tv_sec * 1000000000 + ts.tv_nsec


def time_compact(const double[:, ::1] theta, const double[:, ::1] phi,
                 const double[:, ::1] g, const double[::1] alpha_theta,
                 const double[::1] alpha_phi, double[:, :, ::1] theta_lift, double[:, :, ::1] phi_lift,
                 double[:, ::1] z, double[:, ::1] out, Py_ssize_t iters):
    """Run the compact kernel ``iters`` times; return elapsed nanoseconds."""
    cdef long long t0, t1
    cdef Py_ssize_t k
    with nogil:
        t0 = _now()
        for k in range(iters):
            _compact(theta, phi, g, alpha_theta, alpha_phi, theta_lift, phi_lift, z, out)
        t1 = _now()
    return t1 - t0


def time_pairwise(const double[::1] theta, const double[::1] phi, const double[::1] g,
                  const double[::1] alpha_sq, int family, double gamma, bint use_taylor,
                  double[:, ::1] pair, double[::1] out, Py_ssize_t iters):
    cdef long long t0, t1
    cdef Py_ssize_t k
    with nogil:
        t0 = _now()
        for k in range(iters):
            _pairwise(theta, phi, g, alpha_sq, family, gamma, use_taylor, pair, out)
        t1 = _now()
    return t1 - t0
