"""Radial potentials V on the plane and their Birman-Schwinger factors.

``U = sign(V)`` (with U = +1 where V = 0) and ``v = |V|^{1/2}`` so that
V = U v^2.  All built-in forms are radial about ``center``.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

FORMS = ("gaussian_well", "compact_bump", "tabulated")


class ConfigurationError(ValueError):
    """Invalid potential, grid or box parameters."""


class DegeneratePotentialError(ValueError):
    """v vanishes identically on the grid; the Birman-Schwinger framework is undefined."""


@dataclass(frozen=True)
class PotentialSpec:
    """A real radial potential.

    ``gaussian_well``: A exp(-|x - c|^2 / (2 width^2)).
    ``compact_bump``: A exp(1 - 1/(1 - (|x - c|/width)^2)) inside the disk of radius width.
    ``tabulated``: A times the linear interpolant of ``table = (radii, values)``,
    zero beyond the last radius.

    ``beta`` is the decay exponent in |V(x)| <= C <x>^{-2 beta}; it is
    infinite for the two analytic forms and must be supplied for tables.
    """

    form: str
    amplitude: float
    width: float = 1.0
    center: tuple = (0.0, 0.0)
    beta: float = math.inf
    table: tuple = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ConfigurationError(f"unknown potential form {self.form!r}; expected one of {FORMS}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ConfigurationError("potential width must be positive and finite")
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("potential amplitude must be finite")
        if not self.beta > 1.5:
            raise ConfigurationError(f"decay exponent beta must exceed 3/2, got {self.beta}")
        if len(self.center) != 2:
            raise ConfigurationError("center must be a point in the plane")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.form == "tabulated":
            if self.table is None:
                raise ConfigurationError("tabulated potential requires a (radii, values) table")
            r, val = (np.asarray(a, dtype=float) for a in self.table)
            if r.ndim != 1 or r.shape != val.shape or r.size < 2:
                raise ConfigurationError("table must hold two equal-length columns with at least two rows")
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ConfigurationError("table radii must be non-negative and strictly increasing")
            object.__setattr__(self, "table", (tuple(r.tolist()), tuple(val.tolist())))

    # -- evaluation ---------------------------------------------------------

    def radial(self, r):
        """V as a function of the distance to the center."""
        r = np.asarray(r, dtype=float)
        if self.form == "gaussian_well":
            return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)
        if self.form == "compact_bump":
            u = r / self.width
            out = np.zeros_like(u)
            inside = u < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
            return self.amplitude * out
        radii, values = (np.asarray(a) for a in self.table)
        return self.amplitude * np.interp(r, radii, values, right=0.0)

    def _radius_of(self, points):
        p = np.asarray(points, dtype=float)
        return np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])

    def __call__(self, points):
        return self.radial(self._radius_of(points))

    def sign(self, points):
        """U(x) = +1 where V >= 0, -1 where V < 0."""
        return np.where(self(points) >= 0, 1.0, -1.0)

    def sqrt_abs(self, points):
        """v(x) = |V(x)|^{1/2}."""
        return np.sqrt(np.abs(self(points)))

    # -- integrals and support ----------------------------------------------

    def _support_radius(self):
        if self.form == "compact_bump":
            return self.width
        if self.form == "tabulated":
            return self.table[0][-1]
        return self.width * 40.0

    def l1_norm(self):
        """||V||_1 = int |V| dx, by composite Gauss-Legendre in the radius."""
        if self.form == "gaussian_well":
            return abs(self.amplitude) * 2.0 * math.pi * self.width**2
        return self._radial_mass(0.0, self._support_radius())

    def _radial_mass(self, a, b):
        if b <= a:
            return 0.0
        if self.form == "tabulated":
            breaks = np.asarray(self.table[0])
            breaks = np.unique(np.clip(np.concatenate([[a, b], breaks]), a, b))
        else:
            breaks = np.linspace(a, b, 65)
        x, w = leggauss(16)
        total = 0.0
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            r = 0.5 * (hi - lo) * (x + 1) + lo
            total += 0.5 * (hi - lo) * np.sum(w * np.abs(self.radial(r)) * 2 * math.pi * r)
        return float(total)

    def tail_mass(self, radius):
        """int_{|x - c| > radius} |V| dx."""
        if self.form == "gaussian_well":
            return abs(self.amplitude) * 2 * math.pi * self.width**2 * math.exp(-0.5 * (radius / self.width) ** 2)
        return self._radial_mass(radius, self._support_radius())

    def effective_radius(self, tol=1e-10):
        """Smallest radius with tail mass below tol * ||V||_1."""
        if self.amplitude == 0:
            raise DegeneratePotentialError("zero potential has no effective support")
        if self.form == "gaussian_well":
            return self.width * math.sqrt(2.0 * math.log(1.0 / tol))
        if self.form == "compact_bump":
            return self.width
        total = self.l1_norm()
        lo, hi = 0.0, self._support_radius()
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.tail_mass(mid) < tol * total:
                hi = mid
            else:
                lo = mid
        return hi

    def decay_constant(self, beta=None, r_max=60.0, samples=4000):
        """Sampled sup of |V(x)| <x>^{2 beta}; finite iff the decay hypothesis holds on the range.

        For the analytic forms (beta = inf) the check is made with beta = 10.
        """
        b = self.beta if beta is None else beta
        if not math.isfinite(b):
            b = 10.0
        r = np.linspace(0.0, r_max, samples)
        vals = np.abs(self.radial(r)) * (1.0 + r**2) ** b
        c = float(np.max(vals))
        if not math.isfinite(c):
            raise ConfigurationError("potential violates the decay hypothesis on the sampled range")
        return c

    def identity(self):
        """Canonical text identity used in output headers and hashes."""
        parts = [self.form, repr(float(self.amplitude)), repr(float(self.width)),
                 repr(self.center[0]), repr(self.center[1]), repr(float(self.beta))]
        if self.table is not None:
            parts.append(repr(self.table))
        return ";".join(parts)


def load_table(path):
    """Read a two-column (radius, value) text table; '#' starts a comment."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigurationError(f"{path}: expected two columns, got {line!r}")
            rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 2:
        raise ConfigurationError(f"{path}: table needs at least two rows")
    r, v = zip(*rows)
    return tuple(r), tuple(v)


def standard_well(amplitude=0.5):
    """The repository's standard test well A exp(-|x|^2/2)."""
    return PotentialSpec("gaussian_well", amplitude, 1.0)
