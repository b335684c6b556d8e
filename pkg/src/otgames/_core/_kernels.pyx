# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same semantics as ``_fallback``; see there for docs."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, pow, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    NSTAGE = 7

cdef double TIE_BAND = 1e-13
cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0
cdef double HMIN_REL = 1e-14

# row-major Dormand-Prince coefficients, row s holds a_{s,0..5}
cdef double[42] AT = [
    0, 0, 0, 0, 0, 0,
    1.0 / 5, 0, 0, 0, 0, 0,
    3.0 / 40, 9.0 / 40, 0, 0, 0, 0,
    44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0,
    19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0,
    9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0,
    35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84,
]
cdef double[7] ET = [71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920,
                     -17253.0 / 339200, 22.0 / 525, -1.0 / 40]


cdef inline void _rhs(const double *y, const double *a, const Py_ssize_t *ei,
                      const Py_ssize_t *ej, Py_ssize_t n, Py_ssize_t m, double beta,
                      double tie, double *fbar, double *out) noexcept nogil:
    cdef Py_ssize_t i, j, e
    cdef double s, d, w
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i * n + j] * y[j]
        if beta > 0:
            s -= beta * log(y[i])
        fbar[i] = s
        out[i] = 0.0
    for e in range(m):
        i = ei[e]
        j = ej[e]
        d = fbar[i] - fbar[j]
        if d > tie:
            w = y[j]
        elif d < -tie:
            w = y[i]
        else:
            w = 0.5 * (y[i] + y[j])
        out[i] += w * d
        out[j] -= w * d


cdef inline long _project(double *y, Py_ssize_t n, double floor) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    cdef long nclamp = 0
    for i in range(n):
        s += y[i]
    for i in range(n):
        y[i] /= s
        if y[i] < floor:
            nclamp += 1
    if nclamp:
        s = 0.0
        for i in range(n):
            if y[i] < floor:
                y[i] = floor
            s += y[i]
        for i in range(n):
            y[i] /= s
    return nclamp


def fp_rhs(rho, F, double beta, ei, ej, double tie_band=TIE_BAND):
    cdef const double[::1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef const double[::1] f = np.ascontiguousarray(F, dtype=np.float64)
    cdef const Py_ssize_t[::1] ii = np.ascontiguousarray(ei, dtype=np.intp)
    cdef const Py_ssize_t[::1] jj = np.ascontiguousarray(ej, dtype=np.intp)
    cdef Py_ssize_t n = r.shape[0], m = ii.shape[0], i, j, e
    out_arr = np.zeros(n)
    fbar_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double[::1] fbar = fbar_arr
    cdef double d, w
    for i in range(n):
        fbar[i] = f[i] - beta * log(r[i]) if beta > 0 else f[i]
    for e in range(m):
        i = ii[e]
        j = jj[e]
        d = fbar[i] - fbar[j]
        if d > tie_band:
            w = r[j]
        elif d < -tie_band:
            w = r[i]
        else:
            w = 0.5 * (r[i] + r[j])
        out[i] += w * d
        out[j] -= w * d
    return out_arr


def integrate_matrix(a, ei, ej, y0, double beta, t_out, double rtol=1e-9,
                     double atol=1e-9, double h0=0.0, double floor=1e-12,
                     long max_steps=10_000_000, double tie_band=TIE_BAND):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const Py_ssize_t[::1] ii = np.ascontiguousarray(ei, dtype=np.intp)
    cdef const Py_ssize_t[::1] jj = np.ascontiguousarray(ej, dtype=np.intp)
    cdef const double[::1] tv = np.ascontiguousarray(t_out, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = ii.shape[0], nout = tv.shape[0]
    out_arr = np.full((nout, n), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] y0v = np.array(y0, dtype=np.float64)

    cdef double *y = <double *> malloc(n * sizeof(double))
    cdef double *ys = <double *> malloc(n * sizeof(double))
    cdef double *fbar = <double *> malloc(n * sizeof(double))
    cdef double *k = <double *> malloc(NSTAGE * n * sizeof(double))
    cdef Py_ssize_t i, s, q, idx = 1
    cdef long accepted = 0, rejected = 0, clamps = 0
    cdef int status = 0, hit
    cdef double t, h, h_try, remaining, target, err, sc, ev, fac, kmax
    try:
        with nogil:
            for i in range(n):
                y[i] = y0v[i]
            clamps += _project(y, n, floor)
            for i in range(n):
                out[0, i] = y[i]
            t = tv[0]
            if h0 <= 0:
                _rhs(y, &av[0, 0], &ii[0], &jj[0], n, m, beta, tie_band, fbar, k)
                kmax = 1e-10
                for i in range(n):
                    if fabs(k[i]) > kmax:
                        kmax = fabs(k[i])
                h0 = 0.01 / kmax
                if h0 > 0.1:
                    h0 = 0.1
            h = h0
            while idx < nout:
                if accepted + rejected >= max_steps:
                    status = 2
                    break
                target = tv[idx]
                remaining = target - t
                hit = h >= remaining
                h_try = remaining if hit else h
                _rhs(y, &av[0, 0], &ii[0], &jj[0], n, m, beta, tie_band, fbar, k)
                for s in range(1, NSTAGE):
                    for i in range(n):
                        ev = 0.0
                        for q in range(s):
                            ev += AT[s * 6 + q] * k[q * n + i]
                        ys[i] = y[i] + h_try * ev
                    _rhs(ys, &av[0, 0], &ii[0], &jj[0], n, m, beta, tie_band, fbar,
                         k + s * n)
                err = 0.0
                for i in range(n):
                    ev = 0.0
                    for q in range(NSTAGE):
                        ev += ET[q] * k[q * n + i]
                    sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ys[i]) else fabs(ys[i]))
                    ev = fabs(h_try * ev) / sc
                    if not isfinite(ev):
                        err = ev
                        break
                    if ev > err:
                        err = ev
                if err <= 1.0:
                    if hit:
                        t = target
                    else:
                        t = t + h_try
                    for i in range(n):
                        y[i] = ys[i]
                    clamps += _project(y, n, floor)
                    accepted += 1
                    if hit:
                        for i in range(n):
                            out[idx, i] = y[i]
                        idx += 1
                    if err == 0.0:
                        fac = FAC_MAX
                    else:
                        fac = SAFETY * pow(err, -0.2)
                        if fac < FAC_MIN:
                            fac = FAC_MIN
                        if fac > FAC_MAX:
                            fac = FAC_MAX
                    h = h_try * fac
                else:
                    rejected += 1
                    if not isfinite(err):
                        fac = FAC_MIN
                    else:
                        fac = SAFETY * pow(err, -0.2)
                        if fac < FAC_MIN:
                            fac = FAC_MIN
                    h = h_try * fac
                if h < HMIN_REL * (fabs(t) if fabs(t) > 1.0 else 1.0):
                    status = 1
                    break
    finally:
        free(y)
        free(ys)
        free(fbar)
        free(k)
    stats = dict(accepted=accepted, rejected=rejected, clamps=clamps, status=status,
                 t_reached=t, h_last=h)
    return out_arr, stats
