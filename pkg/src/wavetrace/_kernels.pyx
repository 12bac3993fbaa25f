# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Same functions and signatures as :mod:`wavetrace._kernels_py`; see there for
the mathematical definitions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


cdef void _band(const double[:, ::1] w, const cnp.int64_t[::1] s, const double[::1] v,
                double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = w.shape[0], width = w.shape[1], i, k
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(width):
            acc += w[i, k] * v[s[i] + k]
        out[i] = acc


cdef void _band_t(const double[:, ::1] w, const cnp.int64_t[::1] s, const double[::1] v,
                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = w.shape[0], width = w.shape[1], i, k
    for i in range(out.shape[0]):
        out[i] = 0.0
    for i in range(n):
        for k in range(width):
            out[s[i] + k] += w[i, k] * v[i]


def band_apply(const double[:, ::1] weights, const cnp.int64_t[::1] starts, const double[::1] v):
    out = np.empty(weights.shape[0])
    _band(weights, starts, v, out)
    return out


def band_apply_t(const double[:, ::1] weights, const cnp.int64_t[::1] starts, const double[::1] v,
                 Py_ssize_t n):
    out = np.empty(n)
    _band_t(weights, starts, v, out)
    return out


cdef double _energy(const double[::1] x, const double[::1] mu, const double[::1] quad,
                    const double[:, ::1] dw, const cnp.int64_t[::1] ds,
                    const double[:, ::1] tw, const cnp.int64_t[::1] ts,
                    const double[:, ::1] aw, const cnp.int64_t[::1] at, double coef,
                    double[::1] u, double[::1] r, double[::1] g_r, double[::1] g_u,
                    double[::1] v, double[::1] ubar, double[::1] a,
                    double[::1] g) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], m = n - 1, i
    cdef double energy = 0.0
    _band(dw, ds, x, u)
    for i in range(m):
        r[i] = sqrt(mu[i] / u[i])
    _band(tw, ts, r, v)
    _band(aw, at, u, ubar)
    for i in range(n):
        energy += quad[i] * v[i] * v[i] / ubar[i]
        a[i] = 2.0 * coef * quad[i] * v[i] / ubar[i]
    _band_t(tw, ts, a, g_r)
    for i in range(n):
        a[i] = -coef * quad[i] * v[i] * v[i] / (ubar[i] * ubar[i])
    _band_t(aw, at, a, g_u)
    for i in range(m):
        g_u[i] = g_u[i] - 0.5 * g_r[i] * r[i] / u[i]
    _band_t(dw, ds, g_u, g)
    return coef * energy


def energy_gradient(const double[::1] x, const double[::1] mu, const double[::1] quad,
                    const double[:, ::1] dw, const cnp.int64_t[::1] ds,
                    const double[:, ::1] tw, const cnp.int64_t[::1] ts,
                    const double[:, ::1] aw, const cnp.int64_t[::1] at, double coef):
    cdef Py_ssize_t n = x.shape[0]
    grad = np.empty(n)
    cdef double energy
    cdef double[::1] u = np.empty(n - 1), r = np.empty(n - 1)
    cdef double[::1] g_r = np.empty(n - 1), g_u = np.empty(n - 1)
    cdef double[::1] v = np.empty(n), ubar = np.empty(n), a = np.empty(n)
    cdef double[::1] g = grad
    with nogil:
        energy = _energy(x, mu, quad, dw, ds, tw, ts, aw, at, coef, u, r, g_r, g_u, v, ubar, a, g)
    return energy, grad


cdef enum:
    S_MAX_STEPS = 0
    S_Z_FINAL = 1
    S_CROSSING = 2
    S_PARAXIAL = 3
    S_UNSTABLE = 4

STATUS_MAX_STEPS = S_MAX_STEPS
STATUS_Z_FINAL = S_Z_FINAL
STATUS_CROSSING = S_CROSSING
STATUS_PARAXIAL = S_PARAXIAL
STATUS_UNSTABLE = S_UNSTABLE


cdef void _expand(const double[::1] v_act, const double[:, ::1] left, const double[:, ::1] right,
                  Py_ssize_t nbuf, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0], nfit = left.shape[1], na = n - 2 * nbuf, i, j
    cdef double acc
    for i in range(na):
        out[nbuf + i] = v_act[i]
    for i in range(nbuf):
        acc = 0.0
        for j in range(nfit):
            acc += left[i, j] * v_act[j]
        out[i] = acc
        acc = 0.0
        for j in range(nfit):
            acc += right[i, j] * v_act[na - nfit + j]
        out[n - nbuf + i] = acc


cdef void _active_force(const double[::1] grad, const double[:, ::1] left,
                        const double[:, ::1] right, Py_ssize_t nbuf, const double[::1] mass,
                        double[::1] f) noexcept nogil:
    cdef Py_ssize_t n = grad.shape[0], nfit = left.shape[1], na = n - 2 * nbuf, i, j
    for i in range(na):
        f[i] = grad[nbuf + i]
    for j in range(nfit):
        for i in range(nbuf):
            f[j] += left[i, j] * grad[i]
        for i in range(nbuf):
            f[na - nfit + j] += right[i, j] * grad[n - nbuf + i]
    for i in range(na):
        f[i] = -f[i] / mass[i]


cdef double _median(const double[::1] z, double[::1] buf) noexcept nogil:
    """Median by quickselect on a scratch copy."""
    cdef Py_ssize_t n = z.shape[0], lo = 0, hi = n - 1, i, j, k
    cdef double pivot, tmp, lower
    for i in range(n):
        buf[i] = z[i]
    k = n // 2
    while lo < hi:
        pivot = buf[(lo + hi) // 2]
        i = lo
        j = hi
        while i <= j:
            while buf[i] < pivot:
                i += 1
            while buf[j] > pivot:
                j -= 1
            if i <= j:
                tmp = buf[i]
                buf[i] = buf[j]
                buf[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    if n % 2:
        return buf[k]
    lower = buf[0]
    for i in range(k):
        if buf[i] > lower:
            lower = buf[i]
    return 0.5 * (lower + buf[k])


def active_force(const double[::1] x, const double[::1] mu, const double[::1] quad,
                 const double[:, ::1] dw, const cnp.int64_t[::1] ds,
                 const double[:, ::1] tw, const cnp.int64_t[::1] ts,
                 const double[:, ::1] aw, const cnp.int64_t[::1] at, double coef,
                 const double[:, ::1] left, const double[:, ::1] right, Py_ssize_t nbuf,
                 const double[::1] mass):
    out = np.empty(x.shape[0] - 2 * nbuf)
    grad = energy_gradient(x, mu, quad, dw, ds, tw, ts, aw, at, coef)[1]
    _active_force(grad, left, right, nbuf, mass, out)
    return out


def expand_buffer(const double[::1] v_act, const double[:, ::1] left,
                  const double[:, ::1] right, Py_ssize_t nbuf, double[::1] out):
    _expand(v_act, left, right, nbuf, out)


def leapfrog_block(double[::1] x, double[::1] p, double[::1] z, double[::1] f,
                   const double[::1] mu, const double[::1] quad,
                   const double[:, ::1] dw, const cnp.int64_t[::1] ds,
                   const double[:, ::1] tw, const cnp.int64_t[::1] ts,
                   const double[:, ::1] aw, const cnp.int64_t[::1] at, double coef,
                   const double[:, ::1] left, const double[:, ::1] right, Py_ssize_t nbuf,
                   const double[::1] mass, double dt, Py_ssize_t max_steps, double z_final,
                   double stability, double eps):
    cdef Py_ssize_t n = x.shape[0], na = n - 2 * nbuf, i, k
    cdef double half = 0.5 * dt, smin, d
    cdef double[::1] u = np.empty(n - 1), r = np.empty(n - 1)
    cdef double[::1] g_r = np.empty(n - 1), g_u = np.empty(n - 1)
    cdef double[::1] v = np.empty(n), ubar = np.empty(n), a = np.empty(n)
    cdef double[::1] grad = np.empty(n), buf = np.empty(n)
    cdef double[::1] pa = np.empty(na), xa = np.empty(na)
    cdef int status = S_MAX_STEPS
    cdef Py_ssize_t where = -1, done = max_steps
    with nogil:
        for k in range(max_steps):
            if _median(z, buf) >= z_final:
                status = S_Z_FINAL
                done = k
                break
            if stability > 0:
                smin = x[1] - x[0]
                for i in range(1, n - 1):
                    d = x[i + 1] - x[i]
                    if d < smin:
                        smin = d
                if dt > stability * smin * smin / eps:
                    status = S_UNSTABLE
                    done = k
                    break
            for i in range(na):
                pa[i] = p[nbuf + i] + half * f[i]
            _expand(pa, left, right, nbuf, p)
            for i in range(n):
                if p[i] >= 1.0 or p[i] <= -1.0:
                    status = S_PARAXIAL
                    where = i
                    break
            if status != S_MAX_STEPS:
                done = k
                break
            for i in range(na):
                xa[i] = x[nbuf + i] + pa[i] * dt
            _expand(xa, left, right, nbuf, x)
            for i in range(n):
                z[i] = z[i] + sqrt(1.0 - p[i] * p[i]) * dt
            for i in range(n - 1):
                if not (x[i + 1] - x[i] > 0):
                    status = S_CROSSING
                    where = i
                    break
            if status != S_MAX_STEPS:
                done = k + 1
                break
            _energy(x, mu, quad, dw, ds, tw, ts, aw, at, coef, u, r, g_r, g_u, v, ubar, a, grad)
            _active_force(grad, left, right, nbuf, mass, f)
            for i in range(na):
                pa[i] = pa[i] + half * f[i]
            _expand(pa, left, right, nbuf, p)
            for i in range(n):
                if p[i] >= 1.0 or p[i] <= -1.0:
                    status = S_PARAXIAL
                    where = i
                    break
            if status != S_MAX_STEPS:
                done = k + 1
                break
    return done, status, where


cdef void _fornberg(const double* t, Py_ssize_t m, int order, double* c, double* work) noexcept nogil:
    """Weights for derivatives 0..order at 0 from nodes t[0..m-1].

    ``c`` receives the row for ``order`` only; ``work`` holds an
    ``m * (order + 1)`` scratch table.
    """
    cdef Py_ssize_t i, j, k, mn, p = order + 1
    cdef double c1 = 1.0, c2, c3, c4 = t[0], c5
    for i in range(m * p):
        work[i] = 0.0
    work[0] = 1.0
    for i in range(1, m):
        mn = i if i < order else order
        c2 = 1.0
        c5 = c4
        c4 = t[i]
        for j in range(i):
            c3 = t[i] - t[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    work[i * p + k] = c1 * (k * work[(i - 1) * p + k - 1] - c5 * work[(i - 1) * p + k]) / c2
                work[i * p] = -c1 * c5 * work[(i - 1) * p] / c2
            for k in range(mn, 0, -1):
                work[j * p + k] = (c4 * work[j * p + k] - k * work[j * p + k - 1]) / c3
            work[j * p] = c4 * work[j * p] / c3
        c1 = c2
    for i in range(m):
        c[i] = work[i * p + order]


def lagrange_derivative(const double[::1] xs, const double[::1] vals, int order, int width):
    cdef Py_ssize_t n = xs.shape[0], i, k, s
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double[::1] t = np.empty(width)
    cdef double[::1] c = np.empty(width)
    cdef double[::1] work = np.empty(width * (order + 1))
    cdef double scale, acc, sp
    with nogil:
        for i in range(n):
            s = i - width // 2
            if s < 0:
                s = 0
            if s > n - width:
                s = n - width
            scale = xs[s + width - 1] - xs[s]
            for k in range(width):
                t[k] = (xs[s + k] - xs[i]) / scale
            _fornberg(&t[0], width, order, &c[0], &work[0])
            acc = 0.0
            for k in range(width):
                acc += c[k] * vals[s + k]
            sp = scale
            if order == 2:
                sp = scale * scale
            o[i] = acc / sp
    return out
