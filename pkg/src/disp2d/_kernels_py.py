"""NumPy fallback for the order-zero Bessel/Hankel kernels.

Mirrors the compiled module ``disp2d._kernels`` function for function.
All routines take a float64 array of non-negative arguments and return
arrays of the same shape.
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_SWITCH = 4.0
ASYMPTOTIC_SWITCH = 25.0

_NSERIES = 22
_TRAP_STEP = 0.35
_TRAP_NODES = 19  # s = 0, h, ..., 18h covers exp(-s^2) down to ~1e-17
_NASYMP = 40


def _series_coefficients():
    c = np.empty(_NSERIES)
    d = np.zeros(_NSERIES)
    harmonic = 0.0
    for k in range(_NSERIES):
        fact2 = math.factorial(k) ** 2
        c[k] = (-1.0) ** k / fact2
        if k > 0:
            harmonic += 1.0 / k
            d[k] = (-1.0) ** (k + 1) * harmonic / fact2
    return c, d


_C_J, _C_S = _series_coefficients()
_S_NODES = _TRAP_STEP * np.arange(_TRAP_NODES)
_S_WEIGHTS = _TRAP_STEP * np.exp(-(_S_NODES**2))
_S_WEIGHTS[0] *= 0.5


def _poly(coef, q, start):
    # sum_{k>=start} coef[k] q^k
    out = np.zeros_like(q)
    for k in range(len(coef) - 1, start - 1, -1):
        out = out * q + coef[k]
    return out * q**start if start else out


def _small(z):
    q = 0.25 * z * z
    jm1 = _poly(_C_J, q, 1)
    s = _poly(_C_S, q, 1)
    return q, jm1, s


def _amplitude_quadrature(z):
    # sqrt(2/(pi z)) e^{-i pi/4} (2/sqrt(pi)) int_0^inf e^{-s^2}(1 + i s^2/(2z))^{-1/2} ds
    u = 1.0 + 1j * (_S_NODES[None, :] ** 2) / (2.0 * z[:, None])
    acc = (_S_WEIGHTS[None, :] / np.sqrt(u)).sum(axis=1)
    return np.sqrt(2.0 / (math.pi * z)) * np.exp(-0.25j * math.pi) * (2.0 / math.sqrt(math.pi)) * acc


def _amplitude_asymptotic(z):
    term = np.ones(z.shape, dtype=complex)
    acc = term.copy()
    for k in range(1, _NASYMP):
        term = term * (1j * -((2 * k - 1) ** 2) / (8.0 * k * z))
        acc += term
        if np.all(np.abs(term) < 1e-17):
            break
    return np.sqrt(2.0 / (math.pi * z)) * np.exp(-0.25j * math.pi) * acc


def _hankel_plus_large(z):
    out = np.empty(z.shape, dtype=complex)
    mid = z < ASYMPTOTIC_SWITCH
    if mid.any():
        out[mid] = _amplitude_quadrature(z[mid])
    if (~mid).any():
        out[~mid] = _amplitude_asymptotic(z[~mid])
    return out * np.exp(1j * z)


def j0y0(z):
    """Return (J0(z), Y0(z)) for z >= 0; Y0(0) = -inf."""
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    j = np.empty_like(flat)
    y = np.empty_like(flat)
    small = flat < SERIES_SWITCH
    if small.any():
        zs = flat[small]
        with np.errstate(divide="ignore", invalid="ignore"):
            _, jm1, s = _small(zs)
            jj = 1.0 + jm1
            yy = (2.0 / math.pi) * ((np.log(0.5 * zs) + EULER_GAMMA) * jj + s)
        yy[zs == 0.0] = -np.inf
        j[small] = jj
        y[small] = yy
    if (~small).any():
        h = _hankel_plus_large(flat[~small])
        j[~small] = h.real
        y[~small] = h.imag
    return j.reshape(z.shape), y.reshape(z.shape)


def hankel0(z, sign):
    """H0^{(1)} (sign=+1) or H0^{(2)} (sign=-1)."""
    j, y = j0y0(z)
    return j + (1j * sign) * y


def r0(z, sign):
    """Free resolvent as a function of z = lam |x - y|: +-(i/4) J0 - Y0/4."""
    j, y = j0y0(z)
    return (0.25j * sign) * j - 0.25 * y


def e0(z, sign):
    """Remainder r0(z) - (+-i/4) + (log(z/2) + gamma)/(2 pi), fused near 0."""
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=complex)
    small = flat < SERIES_SWITCH
    if small.any():
        zs = flat[small]
        with np.errstate(divide="ignore", invalid="ignore"):
            _, jm1, s = _small(zs)
            val = (0.25j * sign) * jm1 - ((np.log(0.5 * zs) + EULER_GAMMA) * jm1 + s) / (2.0 * math.pi)
        val[zs == 0.0] = 0.0
        out[small] = val
    if (~small).any():
        zl = flat[~small]
        h = _hankel_plus_large(zl)
        rr = (0.25j * sign) * h.real - 0.25 * h.imag
        out[~small] = rr - 0.25j * sign + (np.log(0.5 * zl) + EULER_GAMMA) / (2.0 * math.pi)
    return out.reshape(z.shape)
