"""Finite-difference time-domain oracle for e^{itH} P_ac f.

H = -Delta_h + V on the interior nodes of a square box (5-point Laplacian,
Dirichlet walls), optionally with a quartic absorbing layer +iW so that
e^{itH} damps outgoing waves.  Time stepping is Crank-Nicolson,
    (I - i dt H / 2) u_{n+1} = (I + i dt H / 2) u_n,
with one sparse LU reused for all steps.  For V = 0 with Dirichlet walls
the same scheme is applied exactly in the discrete sine basis.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .potential import ConfigurationError
from .resolvent import RadialSource, fmt
from .stone import CutoffSpec, QuadConfig, StoneEngine

BOUNDARIES = ("dirichlet", "absorbing_layer")
EPS_BOUND = 1e-8
NEAR_THRESHOLD = 1e-6
ABSORBER_FRACTION = 0.2
COMPARISON_COLUMNS = ("t", "x1", "x2", "oracle_re", "oracle_im", "spectral_re", "spectral_im", "rel_err")


class OracleUnavailableError(RuntimeError):
    """Eigensolver or time stepper could not deliver a trustworthy result."""


class ReflectionError(RuntimeError):
    """The wave reached a Dirichlet wall; reflected waves would contaminate the oracle."""


@dataclass(frozen=True)
class BoxDiscretization:
    half_width: float
    n_per_side: int
    boundary: str = "dirichlet"
    absorber_strength: float = 0.0
    absorber_width: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0 or self.n_per_side < 4 or self.n_per_side % 2:
            raise ConfigurationError("box needs half_width > 0 and an even n_per_side >= 4")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        if self.boundary == "absorbing_layer":
            if not (self.absorber_strength > 0 and self.absorber_width > 0):
                raise ConfigurationError("absorbing layer needs positive strength and width")
            if self.absorber_width >= self.half_width:
                raise ConfigurationError("absorbing layer wider than the box")

    @classmethod
    def absorbing(cls, half_width, n_per_side, strength=20.0):
        return cls(half_width, n_per_side, "absorbing_layer", strength, ABSORBER_FRACTION * half_width)

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n_per_side

    @property
    def m(self):
        """Interior nodes per side."""
        return self.n_per_side - 1

    @property
    def axis(self):
        return -self.half_width + self.spacing * np.arange(1, self.n_per_side)

    @property
    def center_index(self):
        c = self.n_per_side // 2 - 1
        return c * self.m + c

    def coordinates(self):
        x = self.axis
        gx, gy = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def check_resolution(self, spec=None, lambda_max=None):
        limits = []
        if spec is not None:
            limits.append(spec.width / 8.0)
        if lambda_max is not None:
            limits.append(math.pi / (4.0 * lambda_max))
        if limits and self.spacing > min(limits) * (1 + 1e-12):
            raise ConfigurationError(f"box spacing {self.spacing:.4g} exceeds the resolution limit {min(limits):.4g}")

    def absorber(self):
        """W >= 0: quartic ramp over the outer absorber_width of each side."""
        if self.boundary != "absorbing_layer":
            return np.zeros(self.m * self.m)
        p = self.coordinates()
        inner = self.half_width - self.absorber_width
        depth = np.maximum(np.max(np.abs(p), axis=1) - inner, 0.0) / self.absorber_width
        return self.absorber_strength * depth**4


def _laplacian_1d(box):
    m = box.m
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / box.spacing**2


def build_hamiltonian(box, spec=None, lambda_max=None):
    """-Delta_h + V as a real symmetric CSR matrix (the absorber is added by the stepper)."""
    box.check_resolution(spec, lambda_max)
    d1 = _laplacian_1d(box)
    eye = sp.identity(box.m)
    h = sp.kron(d1, eye) + sp.kron(eye, d1)
    if spec is not None:
        h = h + sp.diags(spec(box.coordinates()))
    return h.tocsr()


@dataclass
class SpectralDecomposition:
    negative_eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    count: int

    def project_ac(self, f):
        """f minus its components along the bound states (Euclidean inner product)."""
        if self.count == 0:
            return np.array(f, dtype=complex)
        c = self.eigenvectors.T @ f
        return f - self.eigenvectors @ c


def bound_states(H, eps=EPS_BOUND, k_start=4, k_max=64):
    """All eigenpairs below -eps, by shift-invert Lanczos below the spectrum."""
    diag = H.diagonal()
    offsum = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(diag)
    lower = float(np.min(diag - offsum)) - 1.0  # Gershgorin bound below the spectrum
    n = H.shape[0]
    k = k_start
    while True:
        k = min(k, n - 2)
        try:
            vals, vecs = spla.eigsh(H, k=k, sigma=lower, which="LM", tol=1e-13)
        except spla.ArpackError as exc:
            raise OracleUnavailableError(f"eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[-1] >= -eps or k >= min(k_max, n - 2):
            break
        k *= 2
    if vals[-1] < -eps:
        raise OracleUnavailableError(f"more than {k} bound states; raise k_max")
    near = vals[(vals >= -NEAR_THRESHOLD) & (vals < 0)]
    if near.size:
        warnings.warn(f"near-threshold eigenvalue(s) {near}; zero-energy regularity is suspect", stacklevel=2)
    keep = vals < -eps
    vals, vecs = vals[keep], vecs[:, keep]
    if vecs.shape[1]:
        vecs, _ = np.linalg.qr(vecs)
        vecs = vecs * np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
        resid = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
        if np.any(resid > 1e-8 * max(1.0, np.max(np.abs(vals)))):
            raise OracleUnavailableError(f"eigenpair residuals {resid.max():.2e} above tolerance")
    return SpectralDecomposition(vals, vecs, int(vals.size))


class CrankNicolson:
    """Reusable factorized Crank-Nicolson stepper for u' = i (H + i W) u."""

    def __init__(self, H, dt, absorber=None):
        n = H.shape[0]
        a = H.astype(complex)
        if absorber is not None and np.any(absorber):
            a = a + sp.diags(1j * absorber)
        eye = sp.identity(n, dtype=complex, format="csc")
        self.dt = float(dt)
        self._lhs = spla.splu((eye - 0.5j * dt * a).tocsc(), permc_spec="COLAMD")
        self._rhs = (eye + 0.5j * dt * a).tocsr()

    def step(self, u, n=1):
        for _ in range(n):
            u = self._lhs.solve(self._rhs @ u)
        return u


def _plan(t_list, dt_max):
    """Uniform step dt <= dt_max hitting every requested time exactly (times share the step)."""
    t_list = np.asarray(t_list, dtype=float)
    if np.any(t_list < 0) or np.any(np.diff(t_list) <= 0):
        raise ValueError("t_list must be increasing and non-negative")
    steps = np.ceil(np.diff(np.concatenate([[0.0], t_list])) / dt_max).astype(int)
    return steps


def evolve(f, t_list, box, spec=None, dt_max=None, boundary_tol=1e-6):
    """u(t) = e^{itH} f at each t (sparse LU Crank-Nicolson); returns an array (n_t, N)."""
    H = build_hamiltonian(box, spec)
    dt_max = box.spacing**2 / 4.0 if dt_max is None else min(dt_max, box.spacing**2 / 4.0)
    steps = _plan(t_list, dt_max)
    out = []
    u = np.asarray(f, dtype=complex)
    t_prev = 0.0
    band = _boundary_band(box)
    steppers = {}
    for t, n in zip(t_list, steps):
        if n:
            dt = (t - t_prev) / n
            key = round(dt, 15)
            if key not in steppers:
                steppers = {key: CrankNicolson(H, dt, box.absorber())}
            u = steppers[key].step(u, n)
        t_prev = t
        if box.boundary == "dirichlet":
            _check_reflection(u, band, boundary_tol, t)
        out.append(u.copy())
    return np.array(out)


def _boundary_band(box, fraction=0.1):
    p = box.coordinates()
    return np.max(np.abs(p), axis=1) > (1 - fraction) * box.half_width


def _check_reflection(u, band, tol, t):
    frac = np.sum(np.abs(u[band]) ** 2) / np.sum(np.abs(u) ** 2)
    if frac > tol:
        raise ReflectionError(f"t={t}: {frac:.2e} of the norm lies at the Dirichlet wall")


def evolve_free_sine(f, t_list, box, boundary_tol=1e-6):
    """Crank-Nicolson for V = 0 and Dirichlet walls, applied exactly in the discrete sine basis."""
    if box.boundary != "dirichlet":
        raise ConfigurationError("the sine-basis stepper needs Dirichlet walls")
    m, h = box.m, box.spacing
    k = np.arange(1, m + 1)
    mu1 = (4.0 / h**2) * np.sin(0.5 * math.pi * k / (m + 1)) ** 2
    mu = mu1[:, None] + mu1[None, :]
    coef = scipy.fft.dstn(np.asarray(f, dtype=complex).reshape(m, m), type=1, norm="ortho")
    dt_max = h * h / 4.0
    steps = _plan(t_list, dt_max)
    band = _boundary_band(box)
    out = []
    t_prev = 0.0
    for t, n in zip(t_list, steps):
        if n:
            dt = (t - t_prev) / n
            amp = (1 + 0.5j * dt * mu) / (1 - 0.5j * dt * mu)
            coef = coef * amp**n
        t_prev = t
        u = scipy.fft.idstn(coef, type=1, norm="ortho").ravel()
        _check_reflection(u, band, boundary_tol, t)
        out.append(u)
    return np.array(out)


def free_gaussian_evolution(t, x, sigma):
    """e^{-it Delta} exp(-|x|^2/(2 sigma^2)) in closed form."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = sigma**2 - 2j * t
    return sigma**2 / z * np.exp(-np.sum(x * x, axis=1) / (2 * z))


# -- spectral side --------------------------------------------------------------

STONE_NORMALIZATION = 1.0 / (math.pi * 1j)


def spectral_evolution(t_list, source, machinery, cutoff, quad, normalization=STONE_NORMALIZATION, level=0):
    """normalization * int e^{it lam^2} lam chi(lam/L) D_f(lam) dlam at the source center.

    D_f is the Stone density applied to the radial source; the cutoff's L is
    taken as given (no L iteration).
    """
    engine = StoneEngine(lambda lams: np.asarray(machinery.applied_density_table(lams, source)).reshape(-1, 1),
                         cutoff, quad)
    res, _, _ = engine.evaluate(np.asarray(t_list, dtype=float), (cutoff.L,), level)
    val, err, _ = res[cutoff.L]
    return normalization * val[:, 0], np.abs(normalization) * err[:, 0]


def pin_normalization(sigma, t, cutoff, quad, machinery_free=None, level=0):
    """Constant c with c * (Stone integral of the free applied density) = free closed form at x = 0."""
    from .resolvent import FreeMachinery

    machinery_free = FreeMachinery() if machinery_free is None else machinery_free
    src = RadialSource.gaussian(sigma)
    raw, _ = spectral_evolution([t], src, machinery_free, cutoff, quad, normalization=1.0, level=level)
    exact = free_gaussian_evolution(t, [(0.0, 0.0)], sigma)[0]
    return complex(exact / raw[0])


@dataclass
class ComparisonRow:
    t: float
    x: tuple
    oracle: complex
    spectral: complex
    rel_err: float

    def row(self):
        return [fmt(self.t), fmt(self.x[0]), fmt(self.x[1]), fmt(self.oracle.real), fmt(self.oracle.imag),
                fmt(self.spectral.real), fmt(self.spectral.imag), fmt(self.rel_err)]


def evolve_and_compare(sigma, t_list, box, spec, spectral_machinery, cutoff=None, quad=None,
                       normalization=None, pin_time=5.0):
    """Gaussian data exp(-|x|^2/(2 sigma^2)) centered on the potential; compare at x = center.

    The oracle projects out the discrete bound states and evolves with
    Crank-Nicolson; the spectral value is the normalized Stone integral.
    The normalization is pinned on V = 0 unless given.
    """
    cutoff = CutoffSpec(lambda1=0.5, L=10.0) if cutoff is None else cutoff
    quad = QuadConfig(panels_init=8, lambda_max=cutoff.lambda1 * cutoff.L) if quad is None else quad
    if normalization is None:
        normalization = pin_normalization(sigma, pin_time, cutoff, quad)
    p = box.coordinates() - np.asarray(spec.center)
    f = np.exp(-np.sum(p * p, axis=1) / (2 * sigma**2))
    H = build_hamiltonian(box, spec)
    dec = bound_states(H)
    f_ac = dec.project_ac(f)
    u = evolve(f_ac, t_list, box, spec)
    oracle = u[:, box.center_index]
    src = RadialSource.gaussian(sigma)
    spectral, _ = spectral_evolution(t_list, src, spectral_machinery, cutoff, quad, normalization)
    rows = []
    for t, o, s in zip(t_list, oracle, spectral):
        rows.append(ComparisonRow(float(t), tuple(spec.center), complex(o), complex(s), float(abs(s - o) / abs(o))))
    return rows


def write_comparison_csv(path, rows, header_lines=()):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for r in rows:
            w.writerow(r.row())
