# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled order-zero Bessel/Hankel kernels.

Same algorithms and signatures as ``disp2d._kernels_py``: power series
below z = 4, trapezoid-rule Laplace integral for the Hankel amplitude on
[4, 25), Hankel asymptotic series beyond.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, exp, cos, sin, fabs, M_PI, INFINITY

cnp.import_array()

cdef double EULER_GAMMA = 0.57721566490153286061
cdef double SERIES_SWITCH = 4.0
cdef double ASYMPTOTIC_SWITCH = 25.0
cdef enum:
    NSERIES = 22
    TRAP_NODES = 19
    NASYMP = 40
cdef double TRAP_STEP = 0.35

cdef double C_J[NSERIES]
cdef double C_S[NSERIES]
cdef double S_NODES2[TRAP_NODES]
cdef double S_WEIGHTS[TRAP_NODES]


cdef void _init_tables():
    cdef int k
    cdef double fact2 = 1.0, harmonic = 0.0, sgn = 1.0
    for k in range(NSERIES):
        if k > 0:
            fact2 *= <double>k * <double>k
            harmonic += 1.0 / k
            sgn = -sgn
        C_J[k] = sgn / fact2
        C_S[k] = (-sgn) * harmonic / fact2 if k > 0 else 0.0
    for k in range(TRAP_NODES):
        S_NODES2[k] = (k * TRAP_STEP) * (k * TRAP_STEP)
        S_WEIGHTS[k] = TRAP_STEP * exp(-S_NODES2[k])
    S_WEIGHTS[0] *= 0.5


_init_tables()


cdef inline void _small(double z, double* jm1, double* s) nogil:
    cdef double q = 0.25 * z * z
    cdef double a = 0.0, b = 0.0
    cdef int k
    for k in range(NSERIES - 1, 0, -1):
        a = a * q + C_J[k]
        b = b * q + C_S[k]
    jm1[0] = a * q
    s[0] = b * q


cdef inline void _hankel_large(double z, double* hr, double* hi) nogil:
    # H0^{(1)}(z) = e^{iz} * amplitude(z)
    cdef double ar = 0.0, ai = 0.0, ur, ui, mod, rr, ri, tr, ti, f, c
    cdef double pref, ph, cr, ci
    cdef int k
    if z < ASYMPTOTIC_SWITCH:
        for k in range(TRAP_NODES):
            # 1/sqrt(1 + i w), w = s^2/(2z)
            ur = 1.0
            ui = S_NODES2[k] / (2.0 * z)
            mod = sqrt(ur * ur + ui * ui)
            rr = sqrt(0.5 * (mod + ur))
            ri = ui / (2.0 * rr)
            # 1/(rr + i ri) = (rr - i ri)/mod
            ar += S_WEIGHTS[k] * rr / mod
            ai -= S_WEIGHTS[k] * ri / mod
        ar *= 2.0 / sqrt(M_PI)
        ai *= 2.0 / sqrt(M_PI)
    else:
        tr = 1.0
        ti = 0.0
        ar = 1.0
        ai = 0.0
        for k in range(1, NASYMP):
            f = -((2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * z)
            # term *= i f
            c = tr
            tr = -ti * f
            ti = c * f
            ar += tr
            ai += ti
            if fabs(tr) + fabs(ti) < 1e-17:
                break
    pref = sqrt(2.0 / (M_PI * z))
    ph = z - 0.25 * M_PI
    cr = cos(ph)
    ci = sin(ph)
    hr[0] = pref * (cr * ar - ci * ai)
    hi[0] = pref * (cr * ai + ci * ar)


cdef inline void _j0y0(double z, double* j, double* y) nogil:
    cdef double jm1, s
    if z == 0.0:
        j[0] = 1.0
        y[0] = -INFINITY
    elif z < SERIES_SWITCH:
        _small(z, &jm1, &s)
        j[0] = 1.0 + jm1
        y[0] = (2.0 / M_PI) * ((log(0.5 * z) + EULER_GAMMA) * j[0] + s)
    else:
        _hankel_large(z, j, y)


def j0y0(z):
    """Return (J0(z), Y0(z)) for z >= 0; Y0(0) = -inf."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zf = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zf.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] jo = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yo = np.empty(n)
    cdef double[::1] zv = zf, jv = jo, yv = yo
    with nogil:
        for i in range(n):
            _j0y0(zv[i], &jv[i], &yv[i])
    shape = np.shape(z)
    return jo.reshape(shape), yo.reshape(shape)


def hankel0(z, int sign):
    """H0^{(1)} (sign=+1) or H0^{(2)} (sign=-1)."""
    j, y = j0y0(z)
    return j + (1j * sign) * y


def r0(z, int sign):
    """Free resolvent as a function of z = lam |x - y|: +-(i/4) J0 - Y0/4."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zf = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zf.shape[0], i
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef double[::1] zv = zf
    cdef double complex[::1] ov = out
    cdef double jj, yy
    with nogil:
        for i in range(n):
            _j0y0(zv[i], &jj, &yy)
            ov[i] = -0.25 * yy + 1j * (0.25 * sign * jj)
    return out.reshape(np.shape(z))


def e0(z, int sign):
    """Remainder r0(z) - (+-i/4) + (log(z/2) + gamma)/(2 pi), fused near 0."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zf = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zf.shape[0], i
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef double[::1] zv = zf
    cdef double complex[::1] ov = out
    cdef double zz, jm1, s, lg, jj, yy
    with nogil:
        for i in range(n):
            zz = zv[i]
            if zz == 0.0:
                ov[i] = 0.0
            elif zz < SERIES_SWITCH:
                _small(zz, &jm1, &s)
                lg = log(0.5 * zz) + EULER_GAMMA
                ov[i] = -(lg * jm1 + s) / (2.0 * M_PI) + 1j * (0.25 * sign * jm1)
            else:
                _hankel_large(zz, &jj, &yy)
                lg = log(0.5 * zz) + EULER_GAMMA
                ov[i] = (-0.25 * yy + lg / (2.0 * M_PI)) + 1j * (0.25 * sign * jj - 0.25 * sign)
    return out.reshape(np.shape(z))
