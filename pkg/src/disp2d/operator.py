"""Discretized Birman-Schwinger operators and the zero-energy analysis.

Operators act on weighted L^2 over a quadrature grid with the weights
folded symmetrically, entry_ij = sqrt(w_i) v(x_i) K(x_i, x_j) v(x_j) sqrt(w_j).

On polar grids with a potential centered on the grid every distance
kernel gives a block-circulant matrix (rotation by one angular step is a
symmetry).  Such operators are stored as their angular Fourier blocks,
``blocks[m]`` of size n_radial x n_radial, which is an exact unitary
change of basis: the dense matrix is available through ``entries``.
Dense grids store a single block.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .grid import QuadratureGrid, build_grid  # noqa: F401  (re-exported)
from .potential import ConfigurationError, DegeneratePotentialError, PotentialSpec  # noqa: F401
from .specfun import EULER_GAMMA, SignBranch

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-6
DEFAULT_CONDITION_CAP = 1e12
RESOLUTION_LIMIT = 0.5
DIAGONAL_RULES = ("skip", "log_corrected", "equal_area_disk")


class ResolutionError(ValueError):
    """lam * (max node spacing) exceeds the resolution limit."""


class NearSingularError(np.linalg.LinAlgError):
    """Condition number above the configured cap."""

    def __init__(self, message, condition_number):
        super().__init__(message)
        self.condition_number = condition_number


class ExpansionUnavailableError(RuntimeError):
    """The zero-energy expansion needs a regular verdict."""


# -- kernels ------------------------------------------------------------------


class DistanceKernel:
    """Kernel K(|x - y|) = c log_coefficient * G0 + (regular part).

    ``regular_limit`` is lim_{d -> 0} [K(d) - log_coefficient * G0(d)].
    """

    log_coefficient = 0.0
    regular_limit = 0.0
    real = True

    def __call__(self, d):
        raise NotImplementedError


class ZeroKernel(DistanceKernel):
    def __call__(self, d):
        return np.zeros_like(np.asarray(d, dtype=float))


class G0Kernel(DistanceKernel):
    """G0 = -(1/2pi) log|x - y|."""

    log_coefficient = 1.0

    def __call__(self, d):
        with np.errstate(divide="ignore"):
            return -np.log(np.asarray(d, dtype=float)) / (2 * math.pi)


class FreeResolventKernel(DistanceKernel):
    """R0^{+-}(lam^2) as a distance kernel."""

    log_coefficient = 1.0
    real = False

    def __init__(self, branch, lam):
        self.branch = SignBranch.coerce(branch)
        self.lam = float(lam)
        self.regular_limit = specfun.g_func(self.branch, self.lam, 1.0)

    def __call__(self, d):
        return specfun.r0_of_z(self.branch, self.lam * np.asarray(d, dtype=float))


class E0Kernel(DistanceKernel):
    """E0^{+-}(lam), continuous with E0 = 0 on the diagonal."""

    real = False

    def __init__(self, branch, lam):
        self.branch = SignBranch.coerce(branch)
        self.lam = float(lam)

    def __call__(self, d):
        return specfun.e0_of_z(self.branch, self.lam * np.asarray(d, dtype=float))


# -- operators ----------------------------------------------------------------


class DiscreteOperator:
    """Square matrix on grid nodes, stored densely or as angular Fourier blocks.

    For a block-circulant operator on a polar grid with n_angle = K,
    node index (a, j) = a * K + j, and
        entries[(a, j), (b, k)] = C[(k - j) mod K][a, b],
        blocks[m] = sum_d C[d] exp(2 pi i m d / K).
    """

    def __init__(self, blocks, grid, circulant, weighted=True, meta=None):
        blocks = np.asarray(blocks)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must have shape (n_blocks, n, n)")
        self.blocks = blocks
        self.grid = grid
        self.circulant = bool(circulant)
        self.weighted = weighted
        self.meta = dict(meta or {})
        self.blocks.setflags(write=False)

    # construction helpers
    @classmethod
    def from_dense(cls, grid, matrix, meta=None):
        m = np.asarray(matrix)
        return cls(m[None, :, :], grid, False, meta=meta)

    @classmethod
    def identity(cls, grid, circulant=None):
        circ = _use_circulant(grid) if circulant is None else circulant
        n = grid.n_radial if circ else grid.size
        nb = grid.n_angle if circ else 1
        return cls(np.broadcast_to(np.eye(n), (nb, n, n)).copy(), grid, circ)

    @property
    def grid_id(self):
        return self.grid.grid_id

    @property
    def dim(self):
        return self.blocks.shape[0] * self.blocks.shape[1] if self.circulant else self.blocks.shape[1]

    @property
    def n_angle(self):
        return self.blocks.shape[0]

    def _check(self, other):
        if not isinstance(other, DiscreteOperator):
            raise TypeError("expected a DiscreteOperator")
        if other.circulant != self.circulant or other.blocks.shape != self.blocks.shape:
            raise ValueError("operators live on different grids or representations")

    def _new(self, blocks, meta=None):
        return DiscreteOperator(blocks, self.grid, self.circulant, self.weighted, meta)

    def __add__(self, other):
        self._check(other)
        return self._new(self.blocks + other.blocks)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.blocks - other.blocks)

    def __neg__(self):
        return self._new(-self.blocks)

    def __mul__(self, scalar):
        return self._new(self.blocks * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, DiscreteOperator):
            self._check(other)
            return self._new(self.blocks @ other.blocks)
        return self.apply(other)

    def conj(self):
        """Entrywise complex conjugate."""
        if not self.circulant:
            return self._new(np.conj(self.blocks))
        k = self.n_angle
        return self._new(np.conj(self.blocks[(-np.arange(k)) % k]))

    def transpose(self):
        if not self.circulant:
            return self._new(np.swapaxes(self.blocks, 1, 2))
        k = self.n_angle
        return self._new(np.swapaxes(self.blocks[(-np.arange(k)) % k], 1, 2))

    def inverse(self):
        return self._new(np.linalg.inv(self.blocks))

    @property
    def entries(self):
        """Dense matrix over all grid nodes."""
        if not self.circulant:
            return self.blocks[0]
        k = self.n_angle
        n = self.blocks.shape[1]
        c = np.fft.fft(self.blocks, axis=0) / k
        if np.isrealobj(self.blocks) and np.max(np.abs(c.imag), initial=0.0) <= 1e-14 * np.max(np.abs(c), initial=1.0):
            c = c.real
        idx = (np.arange(k)[None, :] - np.arange(k)[:, None]) % k  # (j, k) -> k - j
        full = c[idx]  # (j, k, a, b)
        return np.ascontiguousarray(full.transpose(2, 0, 3, 1).reshape(n * k, n * k))

    def hs_norm(self):
        """Hilbert-Schmidt (Frobenius) norm of the dense matrix."""
        return float(np.sqrt(np.sum(np.abs(self.blocks) ** 2)))

    def norm2(self):
        """Spectral norm."""
        return float(max(np.linalg.norm(b, 2) for b in self.blocks))

    def singular_values(self):
        return np.sort(np.concatenate([np.linalg.svd(b, compute_uv=False) for b in self.blocks]))

    def is_hermitian(self, tol=1e-12):
        diff = self - self.conj().transpose()
        return diff.hs_norm() <= tol * max(1.0, self.hs_norm())

    # node-space vectors
    def to_modes(self, x):
        """Angular Fourier coefficients X[m] = sum_k x(a, k) e^{-2 pi i m k / K}; shape (..., K, n)."""
        x = np.asarray(x)
        if not self.circulant:
            return x[..., None, :]
        k = self.n_angle
        xr = x.reshape(x.shape[:-1] + (-1, k))
        return np.swapaxes(np.fft.fft(xr, axis=-1), -1, -2)

    def to_comodes(self, u):
        """U[m] = sum_j u(a, j) e^{+2 pi i m j / K}, used on the left of bilinear forms."""
        u = np.asarray(u)
        if not self.circulant:
            return u[..., None, :]
        k = self.n_angle
        ur = u.reshape(u.shape[:-1] + (-1, k))
        return np.swapaxes(np.fft.ifft(ur, axis=-1) * k, -1, -2)

    def apply(self, x):
        x = np.asarray(x)
        if not self.circulant:
            return x @ self.blocks[0].T
        modes = self.to_modes(x)
        y = np.einsum("mab,...mb->...ma", self.blocks, modes)
        return np.fft.ifft(np.swapaxes(y, -1, -2), axis=-1).reshape(x.shape)

    def bilinear(self, u, x):
        """u^T A x (no conjugation), vectorized over leading axes of u and x."""
        if not self.circulant:
            return np.einsum("...a,ab,...b->...", u, self.blocks[0], x)
        um = self.to_comodes(u)
        xm = self.to_modes(x)
        return np.einsum("...ma,mab,...mb->...", um, self.blocks, xm) / self.n_angle


def _use_circulant(grid, spec=None):
    if not grid.is_polar:
        return False
    if spec is None:
        return True
    return tuple(spec.center) == tuple(grid.center)


def _sandwich_factor(grid, spec):
    v = spec.sqrt_abs(grid.nodes)
    return np.sqrt(grid.weights) * v


def assemble_sandwiched(kernel, grid, spec, diagonal_rule="log_corrected"):
    """Nystrom matrix of v K v with weights folded symmetrically.

    ``kernel`` is a DistanceKernel or a plain callable K(x, y) on arrays of
    points.  ``log_corrected`` replaces the singular diagonal by singularity
    subtraction against the exact integral of G0 over the grid domain;
    ``equal_area_disk`` uses the integral of G0 over a disk of area w_i;
    ``skip`` zeros the diagonal and flags singular kernels in ``meta``.
    """
    if diagonal_rule not in DIAGONAL_RULES:
        raise ConfigurationError(f"unknown diagonal rule {diagonal_rule!r}")
    meta = {"diagonal_rule": diagonal_rule, "warnings": []}
    s = _sandwich_factor(grid, spec)
    if isinstance(kernel, DistanceKernel):
        coef = kernel.log_coefficient
        if _use_circulant(grid, spec):
            blocks = _assemble_circulant(kernel, grid, s, diagonal_rule, coef, meta)
            return DiscreteOperator(blocks, grid, True, meta=meta)
        kmat = np.array(kernel(grid.pair_distances), dtype=complex if not kernel.real else float)
        offsums = grid.g0_offdiagonal_sums
        if grid.is_polar:
            offsums = np.repeat(offsums, grid.n_angle)
        diag = _diagonal_values(grid, kernel, coef, diagonal_rule, meta, grid.weights,
                                offsums, grid.nodes)
        np.fill_diagonal(kmat, diag)
    else:
        if diagonal_rule != "skip":
            raise ConfigurationError("diagonal correction needs a DistanceKernel with a known log coefficient")
        nodes = grid.nodes
        with np.errstate(all="ignore"):
            kmat = np.asarray(kernel(nodes[:, None, :], nodes[None, :, :]))
        if kmat.ndim == 0:
            kmat = np.full((grid.size, grid.size), kmat)
        kmat = np.array(kmat)
        np.fill_diagonal(kmat, 0.0)
        meta["warnings"].append("diagonal skipped for a kernel of unknown singularity")
    mat = s[:, None] * kmat * s[None, :]
    return DiscreteOperator.from_dense(grid, mat, meta=meta)


def _diagonal_values(grid, kernel, coef, rule, meta, w, offsums, points):
    reg = kernel.regular_limit
    if coef == 0:
        return np.full(np.shape(w), reg)
    if rule == "skip":
        meta["warnings"].append("diagonal skipped for a log-singular kernel")
        return np.zeros(np.shape(w))
    if rule == "equal_area_disk":
        rho = np.sqrt(w / math.pi)
        return coef * (-(np.log(rho) - 0.5) / (2 * math.pi)) + reg
    integral = grid.g0_domain_integral(points)
    return coef * (integral - offsums) / w + reg


def _assemble_circulant(kernel, grid, s_nodes, rule, coef, meta):
    nr, na = grid.n_radial, grid.n_angle
    s = s_nodes[::na]
    d = grid.ring_distances
    with np.errstate(divide="ignore", invalid="ignore"):
        kd = np.array(kernel(d))
    wring = grid.ring_weights * (2 * math.pi / na)
    diag = _diagonal_values(grid, kernel, coef, rule, meta, wring, grid.g0_offdiagonal_sums,
                            grid.ring_nodes())
    idx = np.arange(nr)
    kd[idx, idx, 0] = diag
    c = s[:, None, None] * kd * s[None, :, None]
    blocks = np.fft.ifft(c, axis=2) * na
    blocks = np.ascontiguousarray(np.moveaxis(blocks, 2, 0))
    if kernel.real:
        blocks = np.ascontiguousarray(blocks.real)
    return blocks


def sign_operator(grid, spec):
    """Diagonal operator U = sign(V)."""
    u = spec.sign(grid.nodes)
    if _use_circulant(grid, spec):
        ur = u[:: grid.n_angle]
        return DiscreteOperator(np.broadcast_to(np.diag(ur), (grid.n_angle, ur.size, ur.size)).copy(), grid, True)
    return DiscreteOperator.from_dense(grid, np.diag(u))


def projection_vector(grid, spec):
    """Unit vector p with P = p p^T; per ring on polar grids (block 0), per node otherwise."""
    s = _sandwich_factor(grid, spec)
    if _use_circulant(grid, spec):
        s = s[:: grid.n_angle]
    nrm = np.linalg.norm(s)
    if nrm == 0 or not np.isfinite(nrm):
        raise DegeneratePotentialError("v vanishes on the grid; the projection onto v is undefined")
    return s / nrm


def discrete_l1_norm(grid, spec):
    """Quadrature value of ||V||_1 = ||v||_2^2."""
    return float(np.sum(grid.weights * np.abs(spec(grid.nodes))))


def projection_P(grid, spec):
    """Orthogonal projection onto the discretized v."""
    p = projection_vector(grid, spec)
    if _use_circulant(grid, spec):
        blocks = np.zeros((grid.n_angle, p.size, p.size))
        blocks[0] = np.outer(p, p)
        return DiscreteOperator(blocks, grid, True)
    return DiscreteOperator.from_dense(grid, np.outer(p, p))


def operator_T(grid, spec, diagonal_rule="log_corrected"):
    """T = U + v G0 v."""
    return sign_operator(grid, spec) + assemble_sandwiched(G0Kernel(), grid, spec, diagonal_rule)


def _complement_basis(p):
    """Orthonormal basis of the orthogonal complement of the unit vector p."""
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(p.size)]))
    return q[:, 1:]


def _restricted_blocks(T, p):
    """QTQ restricted to QL^2, block by block (only block 0 feels P)."""
    e = _complement_basis(p)
    out = [e.T @ T.blocks[0] @ e]
    out.extend(T.blocks[1:])
    return e, out


@dataclass
class RegularityReport:
    sigma_min: float
    condition_number: float
    verdict: str
    threshold: float
    abs_bound_norm: float
    t_norm: float = float("nan")
    critical_mode: int = 0
    d0_norm: float = float("nan")

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("sigma_min", "condition_number", "verdict", "threshold", "abs_bound_norm",
                 "t_norm", "critical_mode", "d0_norm")}


def _verdict(sigma, bound):
    if sigma > bound:
        return "regular"
    if sigma > bound / 10.0:
        return "inconclusive"
    return "non_regular"


def _qd0q(T, p):
    e, restricted = _restricted_blocks(T, p)
    blocks = np.empty_like(T.blocks, dtype=np.result_type(T.blocks, float))
    blocks[0] = e @ np.linalg.inv(restricted[0]) @ e.T
    if T.blocks.shape[0] > 1:
        blocks[1:] = np.linalg.inv(T.blocks[1:])
    return T._new(blocks)


def regularity_check(grid, spec, threshold=DEFAULT_THRESHOLD, T=None):
    """Smallest singular value of QTQ on QL^2 and the regularity verdict.

    Verdict bands (relative to ||T||_2): regular iff sigma_min > threshold;
    inconclusive within a factor 10 below it; non_regular further down.
    """
    T = operator_T(grid, spec) if T is None else T
    p = projection_vector(grid, spec)
    _, restricted = _restricted_blocks(T, p)
    svals = [np.linalg.svd(b, compute_uv=False) for b in restricted]
    mins = np.array([sv[-1] for sv in svals])
    maxs = np.array([sv[0] for sv in svals])
    sigma = float(mins.min())
    mode = int(np.argmin(mins)) if T.circulant else 0
    t_norm = T.norm2()
    bound = threshold * t_norm
    verdict = _verdict(sigma, bound)
    cond = float(maxs.max() / sigma) if sigma > 0 else math.inf
    if sigma > 0:
        d0 = _qd0q(T, p)
        abs_norm = _abs_norm(d0)
        d0_norm = 1.0 / sigma
    else:
        abs_norm = d0_norm = math.inf
    return RegularityReport(sigma, cond, verdict, threshold, abs_norm, t_norm, mode, d0_norm)


def amplitude_scan(template, amplitudes, radial_order, angular_order, radius=None,
                   threshold=DEFAULT_THRESHOLD):
    """Regularity reports for template.amplitude replaced by each value (grid fixed by the width)."""
    radius = template.effective_radius() if radius is None else radius
    out = []
    for a in amplitudes:
        spec = _with_amplitude(template, a)
        grid = build_grid(spec, radial_order, angular_order, radius=radius)
        out.append((float(a), regularity_check(grid, spec, threshold)))
    return out


def _with_amplitude(template, amplitude):
    return PotentialSpec(template.form, float(amplitude), template.width, template.center,
                         template.beta, template.table)


def critical_eigenvalue(grid, spec, mode):
    """Eigenvalue of smallest modulus of QTQ restricted to angular block ``mode`` (signed, continuous)."""
    T = operator_T(grid, spec)
    _, restricted = _restricted_blocks(T, projection_vector(grid, spec))
    b = restricted[mode % len(restricted)]
    ev = np.linalg.eigvalsh(0.5 * (b + b.conj().T))
    return float(ev[np.argmin(np.abs(ev))])


@dataclass
class NonRegularWindow:
    """Amplitudes where sigma_min(QTQ) < threshold * ||T||_2, around the crossing ``center``."""

    center: float
    lower: float
    upper: float
    mode: int
    t_norm: float


def locate_nonregular_window(template, bracket, radial_order, angular_order, mode=1, radius=None,
                             threshold=DEFAULT_THRESHOLD, xtol=1e-13):
    """Root of the critical eigenvalue of block ``mode`` in amplitude, and the window around it.

    The eigenvalue is linear in the amplitude near the root, so the window
    half-width is threshold * ||T||_2 / |slope|.
    """
    from scipy.optimize import brentq

    radius = template.effective_radius() if radius is None else radius

    def f(a):
        spec = _with_amplitude(template, a)
        return critical_eigenvalue(build_grid(spec, radial_order, angular_order, radius=radius), spec, mode)

    lo, hi = bracket
    if f(lo) * f(hi) > 0:
        raise ValueError(f"no sign change of the block-{mode} eigenvalue in {bracket}")
    center = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    h = 1e-4 * max(1.0, abs(center))
    slope = (f(center + h) - f(center - h)) / (2 * h)
    spec = _with_amplitude(template, center)
    t_norm = operator_T(build_grid(spec, radial_order, angular_order, radius=radius), spec).norm2()
    half = threshold * t_norm / abs(slope)
    return NonRegularWindow(float(center), float(center - half), float(center + half), int(mode), float(t_norm))


def _abs_norm(op):
    """Spectral norm of the entrywise absolute value of op's dense matrix."""
    if not op.circulant:
        return float(np.linalg.norm(np.abs(op.blocks[0]), 2))
    k = op.n_angle
    c = np.abs(np.fft.fft(op.blocks, axis=0) / k)
    blocks = np.fft.ifft(c, axis=0) * k
    return float(max(np.linalg.norm(b, 2) for b in blocks))


def check_resolution(lam, grid):
    prod = lam * grid.max_spacing
    if prod >= RESOLUTION_LIMIT:
        raise ResolutionError(
            f"lam * max_spacing = {lam:.6g} * {grid.max_spacing:.6g} = {prod:.6g} violates the bound < {RESOLUTION_LIMIT}"
        )


def assemble_M(branch, lam, grid, spec, diagonal_rule="log_corrected"):
    """M^{+-}(lam) = U + v R0^{+-}(lam^2) v."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    check_resolution(lam, grid)
    return sign_operator(grid, spec) + assemble_sandwiched(
        FreeResolventKernel(branch, lam), grid, spec, diagonal_rule)


def invert_M_direct(M, condition_cap=DEFAULT_CONDITION_CAP):
    """Blockwise dense inverse; meta carries the residual and condition number."""
    svals = [np.linalg.svd(b, compute_uv=False) for b in M.blocks]
    smax = max(sv[0] for sv in svals)
    smin = min(sv[-1] for sv in svals)
    cond = smax / smin if smin > 0 else math.inf
    if cond > condition_cap:
        raise NearSingularError(f"condition number {cond:.3e} exceeds cap {condition_cap:.1e}", cond)
    inv = np.linalg.inv(M.blocks)
    eye = np.eye(M.blocks.shape[1])
    resid = float(np.sqrt(np.sum(np.abs(M.blocks @ inv - eye) ** 2)))
    return M._new(inv, meta={"residual": resid, "condition_number": cond})


@dataclass
class ExpansionBundle:
    """Pieces of the zero-energy inversion of M = gP + T + E1.

    ``D0`` holds QD0Q (zero on the range of P).  ``approximate_inverse``
    returns h^{-1} S + QD0Q with h = g + c.
    """

    P: DiscreteOperator
    Q: DiscreteOperator
    T: DiscreteOperator
    D0: DiscreteOperator
    S: DiscreteOperator
    c: float
    v_l1: float
    grid: QuadratureGrid = field(repr=False)
    spec: PotentialSpec = field(repr=False)

    def h(self, branch, lam):
        return specfun.g_func(branch, lam, self.v_l1) + self.c

    def g(self, branch, lam):
        return specfun.g_func(branch, lam, self.v_l1)

    def approximate_inverse(self, branch, lam):
        return self.S * (1.0 / self.h(branch, lam)) + self.D0

    def leading_operator(self, branch, lam):
        """A(lam) = g P + T, whose exact inverse is approximate_inverse."""
        return self.P * self.g(branch, lam) + self.T

    def e1(self, branch, lam):
        """E1 = v E0 v (zero diagonal); M = gP + T + E1."""
        return assemble_sandwiched(E0Kernel(branch, lam), self.grid, self.spec)

    def expansion_error(self, branch, lam, M_inverse=None):
        """||M^{-1} - (h^{-1} S + QD0Q)||_HS."""
        if M_inverse is None:
            M_inverse = invert_M_direct(assemble_M(branch, lam, self.grid, self.spec))
        return (M_inverse - self.approximate_inverse(branch, lam)).hs_norm()

    def neumann_ratio(self, branch, lam):
        """||E1 A^{-1}||_2; the expansion is valid where this is below 1."""
        return (self.e1(branch, lam) @ self.approximate_inverse(branch, lam)).norm2()


def fehsbach_expansion(grid, spec, regularity, T=None):
    """Build P, Q, T, QD0Q, S and c for a regular potential."""
    if regularity.verdict != "regular":
        raise ExpansionUnavailableError(f"zero energy is {regularity.verdict}; the expansion needs a regular point")
    T = operator_T(grid, spec) if T is None else T
    P = projection_P(grid, spec)
    Q = DiscreteOperator.identity(grid, T.circulant) - P
    p = projection_vector(grid, spec)
    D = _qd0q(T, p)
    PTQD = P @ T @ D
    DTP = D @ T @ P
    S = P - PTQD - DTP + D @ T @ P @ T @ D
    t0 = T.blocks[0]
    d0 = D.blocks[0]
    c = float(np.real(p @ t0 @ p - p @ t0 @ d0 @ t0 @ p))
    return ExpansionBundle(P, Q, T, D, S, c, discrete_l1_norm(grid, spec), grid, spec)


def g_constant(branch, lam):
    """g(lam) / ||V||_1 = +-i/4 - log(lam/2)/(2pi) - gamma/(2pi)."""
    b = SignBranch.coerce(branch)
    return 0.25j * int(b) - (math.log(0.5 * lam) + EULER_GAMMA) / (2 * math.pi)
