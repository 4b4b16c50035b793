"""Order-zero Bessel and Hankel functions and the free resolvent pieces.

The free resolvent of -Delta in the plane is

    R0^{+-}(lam^2)(x, y) = +-(i/4) H0^{+-}(lam |x - y|),

split near the origin as g^{+-}(lam)/||V||_1 + G0(x, y) + E0^{+-}(lam)(x, y)
with G0 = -(1/2pi) log|x - y|.  All kernels depend on ``z = lam |x - y|``
only (G0 aside), so the workhorse functions take z directly.

The numerical kernels come from the compiled module when it is importable
and from the NumPy fallback otherwise; ``BACKEND`` says which.
"""

import enum
import math
import os

import numpy as np

from . import _kernels_py

if os.environ.get("DISP2D_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

EULER_GAMMA = _kernels_py.EULER_GAMMA


class SignBranch(enum.IntEnum):
    """Limiting-absorption branch: PLUS for lam^2 + i0, MINUS for lam^2 - i0."""

    PLUS = 1
    MINUS = -1

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("plus", "+", "+1", "1"):
                return cls.PLUS
            if key in ("minus", "-", "-1"):
                return cls.MINUS
            raise ValueError(f"unknown branch {value!r}")
        return cls(int(value))

    @property
    def label(self):
        return "plus" if self is SignBranch.PLUS else "minus"


def _nonneg(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(~np.isfinite(z)):
        raise ValueError("argument must be finite and non-negative")
    return z


def _pos(z):
    z = _nonneg(z)
    if np.any(z == 0):
        raise ValueError("Y0 and H0 are singular at z = 0")
    return z


def _scalar(out, like):
    return out[()] if np.ndim(like) == 0 else out


def bessel_j0(z):
    """J0(z) for z >= 0."""
    z = _nonneg(z)
    return _scalar(_impl.j0y0(np.atleast_1d(z))[0].reshape(z.shape), z)


def bessel_y0(z):
    """Y0(z) for z > 0."""
    z = _pos(z)
    return _scalar(_impl.j0y0(np.atleast_1d(z))[1].reshape(z.shape), z)


def hankel0(branch, z):
    """H0^{+}(z) = J0 + iY0 or H0^{-}(z) = J0 - iY0 for z > 0."""
    b = SignBranch.coerce(branch)
    z = _pos(z)
    return _scalar(_impl.hankel0(np.atleast_1d(z), int(b)).reshape(z.shape), z)


def r0_of_z(branch, z):
    """Free resolvent as a function of z = lam |x - y| (z > 0)."""
    b = SignBranch.coerce(branch)
    z = np.asarray(z, dtype=float)
    return _impl.r0(np.atleast_1d(z), int(b)).reshape(z.shape)


def e0_of_z(branch, z):
    """E0 as a function of z = lam |x - y|; E0(0) = 0."""
    b = SignBranch.coerce(branch)
    z = np.asarray(z, dtype=float)
    return _impl.e0(np.atleast_1d(z), int(b)).reshape(z.shape)


def _distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != 2 or y.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of 2")
    return np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])


def _check_lam(lam):
    lam = float(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lam must be positive and finite, got {lam}")
    return lam


def free_resolvent_kernel(branch, lam, x, y):
    """R0^{+-}(lam^2)(x, y) = +-(i/4) H0^{+-}(lam |x - y|); singular on x = y."""
    lam = _check_lam(lam)
    d = _distance(x, y)
    if np.any(d == 0):
        raise ValueError("free resolvent kernel is singular on the diagonal x = y")
    out = r0_of_z(branch, lam * d)
    return _scalar(out, d)


def g_func(branch, lam, v_l1):
    """g^{+-}(lam) = ||V||_1 (+-i/4 - log(lam/2)/(2pi) - gamma/(2pi))."""
    b = SignBranch.coerce(branch)
    lam = _check_lam(lam)
    return float(v_l1) * (0.25j * int(b) - math.log(0.5 * lam) / (2 * math.pi) - EULER_GAMMA / (2 * math.pi))


def g0_kernel(x, y):
    """G0(x, y) = -(1/2pi) log|x - y|; singular on x = y."""
    d = _distance(x, y)
    if np.any(d == 0):
        raise ValueError("G0 is singular on the diagonal x = y")
    return _scalar(-np.log(d) / (2 * math.pi), d)


def e0_kernel(branch, lam, x, y):
    """E0^{+-}(lam)(x, y) = R0 - g/||V||_1 - G0, evaluated without cancellation."""
    lam = _check_lam(lam)
    d = _distance(x, y)
    return _scalar(e0_of_z(branch, lam * d), d)


def free_density_of_z(z):
    """R0^+ - R0^- = (i/2) J0(z)."""
    z = np.asarray(z, dtype=float)
    return 0.5j * _impl.j0y0(np.atleast_1d(z))[0].reshape(z.shape)
