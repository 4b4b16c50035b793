"""Perturbed resolvent kernels through the symmetric resolvent identity.

    R_V^{+-}(lam^2) = R0 - R0 v M^{+-}(lam)^{-1} v R0,

the Stone density R_V^+ - R_V^- = 2i Im R_V^+, and the finite Born series.

Three interchangeable "machineries" supply these kernels:

``GridMachinery``
    Nystrom discretization on a 2D quadrature grid; any pair of points.
``RadialMachinery``
    Radial potentials only, exact angular averaging (the m = 0 sector);
    pairs with at least one point at the potential's center, and radial
    source functions.  Much cheaper at high energy.
``FreeMachinery``
    V = 0.
"""

import csv
import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import specfun
from .operator import (
    DEFAULT_CONDITION_CAP,
    FreeResolventKernel,
    assemble_M,
    assemble_sandwiched,
    check_resolution,
    fehsbach_expansion,
    invert_M_direct,
    regularity_check,
    sign_operator,
)
from .specfun import SignBranch

DEFAULT_LAMBDA_MAX = 20.0
METHODS = ("symmetric_identity", "born_series")


class LambdaRangeError(ValueError):
    """lam outside the validated range (0, lambda_max]."""


def _pairs(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    return x, y


class _LRU:
    """Small thread-safe cache: concurrent readers, one writer at a time."""

    def __init__(self, size):
        self.size = size
        self.data = OrderedDict()
        self.lock = threading.Lock()

    def get(self, key, factory):
        with self.lock:
            if key in self.data:
                self.data.move_to_end(key)
                return self.data[key]
        value = factory()
        with self.lock:
            self.data[key] = value
            while len(self.data) > self.size:
                self.data.popitem(last=False)
        return value


class FreeMachinery:
    """V = 0: R_V = R0 and the Stone density is (i/2) J0(lam |x - y|)."""

    lambda_max = math.inf
    name = "free"

    def kernel(self, branch, lam, x, y):
        x, y = _pairs(x, y)
        return specfun.free_resolvent_kernel(branch, lam, x, y)

    def density(self, lam, x, y):
        x, y = _pairs(x, y)
        d = np.hypot(*(x - y).T)
        return specfun.free_density_of_z(lam * d)

    def density_table(self, lams, x, y):
        x, y = _pairs(x, y)
        d = np.hypot(*(x - y).T)
        return specfun.free_density_of_z(np.outer(lams, d))

    def applied_density_table(self, lams, source):
        """lam -> int (i/2) J0(lam |y|) f(|y|) dy for a radial source at the center."""
        j0 = specfun.bessel_j0(np.outer(lams, source.rho))
        return 0.5j * (j0 @ (source.values * source.area_weights))


class GridMachinery:
    """M^{-1} on a 2D grid; direct inversion or the zero-energy expansion."""

    name = "grid"

    def __init__(self, grid, spec, inverse="direct", condition_cap=DEFAULT_CONDITION_CAP,
                 lambda_max=DEFAULT_LAMBDA_MAX, cache_size=32):
        if inverse not in ("direct", "fehsbach"):
            raise ValueError(f"unknown inverse provider {inverse!r}")
        self.grid = grid
        self.spec = spec
        self.inverse = inverse
        self.condition_cap = condition_cap
        self.lambda_max = float(lambda_max)
        self._cache = _LRU(cache_size)
        self._U = sign_operator(grid, spec)
        self._s = np.sqrt(grid.weights) * spec.sqrt_abs(grid.nodes)
        self._expansion = None
        if inverse == "fehsbach":
            self._expansion = fehsbach_expansion(grid, spec, regularity_check(grid, spec))

    def _check_lam(self, lam):
        if not (0 < lam <= self.lambda_max):
            raise LambdaRangeError(f"lam = {lam} outside the validated range (0, {self.lambda_max}]")
        check_resolution(lam, self.grid)

    def m_inverse(self, branch, lam):
        branch = SignBranch.coerce(branch)
        lam = float(lam)
        self._check_lam(lam)

        def build():
            if self._expansion is not None:
                return self._expansion.approximate_inverse(branch, lam)
            return invert_M_direct(assemble_M(branch, lam, self.grid, self.spec), self.condition_cap)

        return self._cache.get((int(branch), lam), build)

    def sandwiched_resolvent(self, branch, lam):
        """K = v R0 v (weights folded), the Born-series building block."""
        return assemble_sandwiched(FreeResolventKernel(branch, lam), self.grid, self.spec)

    def source_vectors(self, branch, lam, points):
        """a(x)_i = R0(x, n_i) sqrt(w_i) v(n_i) for each point x."""
        pts = np.atleast_2d(points)
        diff = pts[:, None, :] - self.grid.nodes[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        hit = (d == 0) & (self._s[None, :] != 0)
        if np.any(hit):
            raise ValueError("evaluation point coincides with a grid node")
        with np.errstate(divide="ignore", invalid="ignore"):
            r0 = specfun.r0_of_z(branch, lam * d)
        r0 = np.where(self._s[None, :] == 0, 0.0, r0)
        return r0 * self._s[None, :]

    def _corrections(self, branch, lam, x, y):
        minv = self.m_inverse(branch, lam)
        pts, inv = np.unique(np.concatenate([x, y]), axis=0, return_inverse=True)
        inv = np.ravel(inv)
        a = self.source_vectors(branch, lam, pts)
        n = x.shape[0]
        return minv.bilinear(a[inv[:n]], a[inv[n:]])

    def kernel(self, branch, lam, x, y):
        x, y = _pairs(x, y)
        self._check_lam(lam)
        d = np.hypot(*(x - y).T)
        if np.any(d == 0):
            raise ValueError("resolvent kernel is singular on the diagonal x = y")
        return specfun.r0_of_z(branch, lam * d) - self._corrections(branch, lam, x, y)

    def density(self, lam, x, y):
        x, y = _pairs(x, y)
        self._check_lam(lam)
        d = np.hypot(*(x - y).T)
        corr = self._corrections(SignBranch.PLUS, lam, x, y)
        return 1j * (0.5 * specfun.bessel_j0(lam * d) - 2.0 * corr.imag)

    def density_table(self, lams, x, y):
        return np.array([self.density(lam, x, y) for lam in lams])


@dataclass(frozen=True)
class RadialSource:
    """Radial function f(|y - c|) sampled on a radial quadrature (area weights 2 pi rho d rho)."""

    rho: np.ndarray
    area_weights: np.ndarray
    values: np.ndarray
    profile: object = None

    @classmethod
    def gaussian(cls, sigma, rho_max=None, n=160):
        rho_max = 9.0 * sigma if rho_max is None else rho_max
        prof = lambda r: np.exp(-0.5 * (np.asarray(r) / sigma) ** 2)  # noqa: E731
        return cls.from_profile(prof, rho_max, n)

    @classmethod
    def from_profile(cls, profile, rho_max, n=160):
        rho, w = _composite_gauss(0.0, rho_max, n)
        return cls(rho, 2 * math.pi * rho * w, np.asarray(profile(rho), dtype=float), profile)


def _composite_gauss(a, b, n, panel=32):
    npan = max(1, int(math.ceil(n / panel)))
    x, w = leggauss(panel)
    edges = np.linspace(a, b, npan + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    return nodes, weights


class RadialMachinery:
    """Exact angular averaging for radial potentials (m = 0 sector).

    Radial functions live on Gauss-Legendre radii r_a in [0, R] with area
    weights W_a = 2 pi r_a w_a.  The ring-averaged free resolvent is
        Rbar(r, rho) = +-(i/4) J0(lam min(r, rho)) H0^{+-}(lam max(r, rho)).
    """

    name = "radial"

    def __init__(self, spec, n_radial=96, radius=None, lambda_max=DEFAULT_LAMBDA_MAX,
                 condition_cap=DEFAULT_CONDITION_CAP, cache_size=32):
        self.spec = spec
        self.radius = spec.effective_radius() if radius is None else float(radius)
        x, w = leggauss(int(n_radial))
        self.r = 0.5 * self.radius * (x + 1)
        self.area = 2 * math.pi * self.r * 0.5 * self.radius * w
        vals = spec.radial(self.r)
        self.U = np.where(vals >= 0, 1.0, -1.0)
        self.s = np.sqrt(self.area) * np.sqrt(np.abs(vals))
        if not np.any(self.s):
            raise ValueError("v vanishes on the radial grid")
        self.center = np.asarray(spec.center)
        self.lambda_max = float(lambda_max)
        self.condition_cap = condition_cap
        self.max_spacing = float(np.max(np.diff(np.concatenate([[0.0], self.r, [self.radius]]))))
        self._cache = _LRU(cache_size)

    def _check_lam(self, lam):
        if not (0 < lam <= self.lambda_max):
            raise LambdaRangeError(f"lam = {lam} outside the validated range (0, {self.lambda_max}]")
        if lam * self.max_spacing >= 0.5:
            raise LambdaRangeError(f"lam * radial spacing = {lam * self.max_spacing:.4g} violates the bound < 0.5")

    @staticmethod
    def ring_average(branch, lam, r, rho):
        lo = np.minimum(r, rho)
        hi = np.maximum(r, rho)
        j0 = specfun.bessel_j0(lam * lo)
        b = int(SignBranch.coerce(branch))
        h0 = specfun.r0_of_z(branch, lam * hi) * (4.0 / (1j * b))
        return (0.25j * b) * j0 * h0

    def m_inverse(self, branch, lam):
        branch = SignBranch.coerce(branch)
        self._check_lam(lam)

        def build():
            kbar = self.ring_average(branch, lam, self.r[:, None], self.r[None, :])
            m = np.diag(self.U) + self.s[:, None] * kbar * self.s[None, :]
            sv = np.linalg.svd(m, compute_uv=False)
            cond = sv[0] / sv[-1]
            if cond > self.condition_cap:
                raise np.linalg.LinAlgError(f"condition number {cond:.3e} exceeds cap")
            return np.linalg.inv(m)

        return self._cache.get((int(branch), float(lam)), build)

    def _radii(self, pts):
        p = np.atleast_2d(pts) - self.center
        return np.hypot(p[:, 0], p[:, 1])

    def _correction(self, branch, lam, rx, ry):
        minv = self.m_inverse(branch, lam)
        alpha = self.s[None, :] * self.ring_average(branch, lam, self.r[None, :], rx[:, None])
        beta = self.s[None, :] * self.ring_average(branch, lam, self.r[None, :], ry[:, None])
        return np.einsum("pa,ab,pb->p", alpha, minv, beta)

    def _split(self, x, y):
        x, y = _pairs(x, y)
        rx, ry = self._radii(x), self._radii(y)
        if np.any((rx > 0) & (ry > 0)):
            raise ValueError("radial machinery needs one point of each pair at the potential's center")
        d = np.hypot(*(x - y).T)
        # put the centered point first: the average over its ring is trivial
        return np.minimum(rx, ry), np.maximum(rx, ry), d

    def kernel(self, branch, lam, x, y):
        self._check_lam(lam)
        rx, ry, d = self._split(x, y)
        if np.any(d == 0):
            raise ValueError("resolvent kernel is singular on the diagonal x = y")
        return specfun.r0_of_z(branch, lam * d) - self._correction(branch, lam, rx, ry)

    def density(self, lam, x, y):
        self._check_lam(lam)
        rx, ry, d = self._split(x, y)
        corr = self._correction(SignBranch.PLUS, lam, rx, ry)
        return 1j * (0.5 * specfun.bessel_j0(lam * d) - 2.0 * corr.imag)

    def density_table(self, lams, x, y):
        return np.array([self.density(lam, x, y) for lam in lams])

    def _source_integrals(self, branch, lam, source, panel=24):
        """int Rbar(r_a, rho) f(rho) dA(rho) for every ring r_a, split at rho = r_a."""
        prof = source.profile
        rho_max = float(source.rho[-1] + (source.rho[-1] - source.rho[-2]))
        xg, wg = leggauss(panel)
        out = np.empty(self.r.size, dtype=complex)
        b = int(SignBranch.coerce(branch))
        for a, ra in enumerate(self.r):
            inner_n = max(1, int(math.ceil(lam * ra / 2.0)))
            outer_n = max(2, int(math.ceil(lam * (rho_max - ra) / 2.0)) + 1)
            pin, win = _panels(0.0, ra, inner_n, xg, wg)
            pout, wout = _panels(ra, rho_max, outer_n, xg, wg)
            fin = prof(pin) * 2 * math.pi * pin * win
            fout = prof(pout) * 2 * math.pi * pout * wout
            h0a = specfun.r0_of_z(branch, lam * ra) * (4.0 / (1j * b))
            j0a = specfun.bessel_j0(lam * ra)
            inner = h0a * np.sum(specfun.bessel_j0(lam * pin) * fin)
            outer = j0a * np.sum(specfun.r0_of_z(branch, lam * pout) * (4.0 / (1j * b)) * fout)
            out[a] = 0.25j * b * (inner + outer)
        return out

    def applied_density_table(self, lams, source):
        """lam -> int [R_V^+ - R_V^-](lam^2)(c, y) f(|y - c|) dy for a radial source."""
        out = np.empty(len(lams), dtype=complex)
        for i, lam in enumerate(lams):
            self._check_lam(lam)
            free = 0.5 * np.sum(specfun.bessel_j0(lam * source.rho) * source.values * source.area_weights)
            minv = self.m_inverse(SignBranch.PLUS, lam)
            alpha = self.s * self.ring_average(SignBranch.PLUS, lam, self.r, 0.0)
            beta = self.s * self._source_integrals(SignBranch.PLUS, lam, source)
            corr = alpha @ minv @ beta
            out[i] = 1j * (free - 2.0 * corr.imag)
        return out


def _panels(a, b, n, xg, wg):
    edges = np.linspace(a, b, n + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (xg[None, :] + 1)).ravel()
    weights = (0.5 * h[:, None] * wg[None, :]).ravel()
    return nodes, weights


# -- module-level operations ----------------------------------------------------


def _machinery(m):
    return FreeMachinery() if m is None else m


def _scalar(val, x, y):
    return val[0] if np.ndim(x) == 1 and np.ndim(y) == 1 else val


def perturbed_resolvent_kernel(branch, lam, x, y, machinery=None):
    """R_V^{+-}(lam^2)(x, y) by the symmetric resolvent identity."""
    m = _machinery(machinery)
    return _scalar(m.kernel(branch, float(lam), x, y), x, y)


def stone_density(lam, x, y, machinery=None):
    """[R_V^+ - R_V^-](lam^2)(x, y) = 2i Im R_V^+; finite on the diagonal."""
    m = _machinery(machinery)
    return _scalar(m.density(float(lam), x, y), x, y)


@dataclass
class BornResult:
    value: complex
    terms: list
    truncation_ratio: float
    truncation_estimate: float
    spectral_radius: float
    diverging: bool


def born_series_kernel(branch, lam, x, y, m_max, machinery):
    """sum_{m=0}^{m_max} R0 (-V R0)^m (x, y) on the machinery's grid.

    Term m >= 1 is (-1)^m a(x)^T U (K U)^{m-1} a(y) with K = v R0 v and
    a(x)_i = R0(x, n_i) sqrt(w_i) v(n_i).  Reports the ratio of the last two
    terms, a geometric tail estimate and the spectral radius of K U.
    """
    if not isinstance(machinery, GridMachinery):
        raise TypeError("the Born series needs a GridMachinery")
    if int(m_max) < 0:
        raise ValueError("m_max must be non-negative")
    branch = SignBranch.coerce(branch)
    lam = float(lam)
    machinery._check_lam(lam)
    x = np.asarray(x, dtype=float).reshape(2)
    y = np.asarray(y, dtype=float).reshape(2)
    d = float(np.hypot(*(x - y)))
    if d == 0:
        raise ValueError("resolvent kernel is singular on the diagonal x = y")
    terms = [complex(specfun.r0_of_z(branch, lam * d))]
    U = machinery._U
    radius = 0.0
    if m_max >= 1:
        K = machinery.sandwiched_resolvent(branch, lam)
        KU = K @ U
        radius = float(max(np.max(np.abs(np.linalg.eigvals(b))) for b in KU.blocks))
        ax, ay = machinery.source_vectors(branch, lam, np.vstack([x, y]))
        w = U.apply(ay)
        for m in range(1, int(m_max) + 1):
            terms.append(complex((-1) ** m * np.dot(ax, w)))
            w = U.apply(K.apply(w))
    diverging = radius >= 1.0
    if diverging:
        warnings.warn(f"Born series diverges: spectral radius of V R0 is {radius:.3f}", RuntimeWarning)
    if len(terms) >= 3 and abs(terms[-2]) > 0:
        ratio = abs(terms[-1]) / abs(terms[-2])
    else:
        ratio = 0.0 if len(terms) < 2 else radius
    # geometric tail with the worse of the observed ratio and the spectral radius, doubled
    # because the term ratios oscillate before settling
    r = max(ratio, radius)
    est = 2.0 * abs(terms[-1]) * r / (1 - r) if r < 1 else math.inf
    return BornResult(complex(sum(terms)), terms, float(ratio), float(est), radius, diverging)


# -- CSV ------------------------------------------------------------------------

RESOLVENT_COLUMNS = ("branch", "lambda", "x1", "x2", "y1", "y2", "re", "im", "method")


@dataclass(frozen=True)
class ResolventSample:
    branch: SignBranch
    lam: float
    x: tuple
    y: tuple
    value: complex
    method: str = "symmetric_identity"

    def row(self):
        return [SignBranch.coerce(self.branch).label, fmt(self.lam), fmt(self.x[0]), fmt(self.x[1]),
                fmt(self.y[0]), fmt(self.y[1]), fmt(self.value.real), fmt(self.value.imag), self.method]


def fmt(v):
    """17 significant digits, round-trip exact."""
    return format(float(v), ".17g")


def write_samples_csv(path, samples, header_lines=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESOLVENT_COLUMNS)
        for s in samples:
            w.writerow(s.row())


def read_samples_csv(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    for rec in csv.DictReader(rows):
        out.append(ResolventSample(
            SignBranch.coerce(rec["branch"]), float(rec["lambda"]),
            (float(rec["x1"]), float(rec["x2"])), (float(rec["y1"]), float(rec["y2"])),
            complex(float(rec["re"]), float(rec["im"])), rec["method"]))
    return out
