"""Quadrature grids over the effective support of a potential.

``polar_gauss``: Gauss-Legendre in the radius times the trapezoid rule in
the angle, nodes ordered ring by ring (index = ring * n_angle + angle).
``tensor_gauss``: tensor Gauss-Legendre on the square inscribed in the disk.

Grids also know how to integrate G0 = -(1/2pi) log|x - y| exactly over
their own domain, which the log-singular diagonal correction needs.
"""

import hashlib
import math
import struct
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .potential import ConfigurationError

SCHEMES = ("polar_gauss", "tensor_gauss")
_MAGIC = b"D2DGRID1"


class QuadratureGrid:
    """Nodes and positive weights discretizing integrals over a disk or square."""

    def __init__(self, nodes, weights, radius, scheme, center=(0.0, 0.0), *,
                 radii=None, ring_weights=None, n_angle=None, half_side=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.radius = float(radius)
        self.scheme = scheme
        self.center = (float(center[0]), float(center[1]))
        self.radii = None if radii is None else np.asarray(radii, dtype=float)
        self.ring_weights = None if ring_weights is None else np.asarray(ring_weights, dtype=float)
        self.n_angle = n_angle
        self.half_side = half_side
        for arr in (self.nodes, self.weights):
            arr.setflags(write=False)
        if self.nodes.shape != (self.weights.size, 2):
            raise ConfigurationError("node count must equal weight count")

    @property
    def size(self):
        return self.weights.size

    @property
    def is_polar(self):
        return self.scheme == "polar_gauss"

    @property
    def n_radial(self):
        return None if self.radii is None else self.radii.size

    @cached_property
    def grid_id(self):
        h = hashlib.sha256()
        h.update(self.scheme.encode())
        h.update(np.asarray(self.center).tobytes())
        h.update(self.nodes.tobytes())
        h.update(self.weights.tobytes())
        return h.hexdigest()[:16]

    @cached_property
    def max_spacing(self):
        """Largest gap between neighbouring nodes along the grid lines."""
        if self.is_polar:
            r = self.radii
            radial = np.max(np.diff(np.concatenate([[-r[0]], r, [self.radius]])))
            return float(max(radial, 2 * math.pi * r[-1] / self.n_angle))
        xs = np.unique(self.nodes[:, 0])
        return float(np.max(np.diff(np.concatenate([[-self.half_side], xs, [self.half_side]]))))

    # -- distance tables and the exact G0 domain integral -------------------

    @cached_property
    def ring_distances(self):
        """D[a, b, d] = |node(a, 0) - node(b, d)| for polar grids."""
        r = self.radii
        ang = 2 * math.pi * np.arange(self.n_angle) / self.n_angle
        d2 = r[:, None, None] ** 2 + r[None, :, None] ** 2 - 2 * r[:, None, None] * r[None, :, None] * np.cos(ang)
        d = np.sqrt(np.maximum(d2, 0.0))
        idx = np.arange(r.size)
        d[idx, idx, 0] = 0.0
        d.setflags(write=False)
        return d

    @cached_property
    def pair_distances(self):
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        d.setflags(write=False)
        return d

    def g0_domain_integral(self, points):
        """int over the grid domain of -(1/2pi) log|x - y| dy, for x inside it."""
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        if self.is_polar:
            rho2 = np.sum(p * p, axis=-1)
            big_r = self.radius
            integral = math.pi * big_r**2 * math.log(big_r) - 0.5 * math.pi * (big_r**2 - rho2)
            return -integral / (2 * math.pi)
        a = self.half_side
        x, y = p[..., 0], p[..., 1]
        total = 0.0
        for sx, xe in ((1, a - x), (-1, -a - x)):
            for sy, ye in ((1, a - y), (-1, -a - y)):
                total = total + sx * sy * _log_square_antiderivative(xe, ye)
        return -0.5 * total / (2 * math.pi)

    @cached_property
    def g0_offdiagonal_sums(self):
        """sum_{j != i} w_j G0(x_i, x_j); one value per ring (polar) or per node (tensor)."""
        if self.is_polar:
            d = self.ring_distances
            with np.errstate(divide="ignore"):
                g = -np.log(d) / (2 * math.pi)
            idx = np.arange(self.radii.size)
            g[idx, idx, 0] = 0.0
            wnode = self.ring_weights * (2 * math.pi / self.n_angle)
            return np.einsum("abd,b->a", g, wnode)
        d = self.pair_distances.copy()
        np.fill_diagonal(d, 1.0)
        g = -np.log(d) / (2 * math.pi)
        return g @ self.weights

    def ring_nodes(self):
        """Node coordinates of angle index 0 on each ring (polar grids)."""
        return np.column_stack([self.radii + self.center[0], np.full(self.radii.size, self.center[1])])


def _log_square_antiderivative(x, y):
    """F with d^2F/dxdy = ln(x^2 + y^2); F = 0 on the coordinate axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        t1 = np.where(x != 0, x * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        t2 = np.where(y != 0, y * y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return x * y * lg - 3 * x * y + t1 + t2


def build_grid(spec, radial_order, angular_order, radius=None, scheme="polar_gauss", tail_tol=1e-10):
    """Quadrature grid centered on the potential.

    ``radius`` defaults to the smallest R with int_{|x|>R} |V| < tail_tol ||V||_1.
    For ``tensor_gauss`` the domain is the square of half side R, so it
    contains the effective support; its circumradius R sqrt(2) is reported
    as the grid radius, ``radial_order`` points are used per side and
    ``angular_order`` is ignored.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown grid scheme {scheme!r}; expected one of {SCHEMES}")
    if int(radial_order) < 2 or int(angular_order) < 2:
        raise ConfigurationError("grid orders must be at least 2")
    if radius is None:
        radius = spec.effective_radius(tail_tol)
    radius = float(radius)
    if not radius > 0:
        raise ConfigurationError("grid radius must be positive")
    cx, cy = spec.center
    x, w = leggauss(int(radial_order))
    if scheme == "polar_gauss":
        nr, na = int(radial_order), int(angular_order)
        r = 0.5 * radius * (x + 1.0)
        wr = 0.5 * radius * w * r
        ang = 2 * math.pi * np.arange(na) / na
        nodes = np.empty((nr * na, 2))
        nodes[:, 0] = (r[:, None] * np.cos(ang)[None, :]).ravel() + cx
        nodes[:, 1] = (r[:, None] * np.sin(ang)[None, :]).ravel() + cy
        weights = np.repeat(wr * (2 * math.pi / na), na)
        return QuadratureGrid(nodes, weights, radius, scheme, spec.center,
                              radii=r, ring_weights=wr, n_angle=na)
    a = radius
    s = a * x
    ws = a * w
    gx, gy = np.meshgrid(s, s, indexing="ij")
    nodes = np.column_stack([gx.ravel() + cx, gy.ravel() + cy])
    weights = np.outer(ws, ws).ravel()
    return QuadratureGrid(nodes, weights, a * math.sqrt(2.0), scheme, spec.center, half_side=a)


# -- binary container -------------------------------------------------------
#
# little-endian layout:
#   8 bytes magic "D2DGRID1"
#   uint64 N, uint64 scheme (0 polar, 1 tensor), uint64 n_radial, uint64 n_angle,
#   uint64 has_entries
#   float64 radius, float64 half_side, float64 center_x, float64 center_y
#   float64 nodes[N][2], float64 weights[N]
#   float64 entries[N][N][2] (real, imag; row-major), present iff has_entries

_HEADER = struct.Struct("<8s5Q4d")


def write_container(path, grid, entries=None):
    """Serialize a grid and, optionally, a dense operator matrix on it."""
    n = grid.size
    if entries is not None:
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (n, n):
            raise ValueError("operator entries must be N x N for the grid")
    header = _HEADER.pack(
        _MAGIC, n, SCHEMES.index(grid.scheme), grid.n_radial or 0, grid.n_angle or 0,
        int(entries is not None), grid.radius, grid.half_side or 0.0, grid.center[0], grid.center[1],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.nodes.astype("<f8").tobytes())
        fh.write(grid.weights.astype("<f8").tobytes())
        if entries is not None:
            fh.write(entries.astype("<c16").tobytes())


def read_container(path):
    """Inverse of write_container: returns (grid, entries or None)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, scheme_code, nr, na, has_entries, radius, half_side, cx, cy = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a grid container")
    off = _HEADER.size
    nodes = np.frombuffer(raw, dtype="<f8", count=2 * n, offset=off).reshape(n, 2)
    off += 16 * n
    weights = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
    off += 8 * n
    entries = None
    if has_entries:
        entries = np.frombuffer(raw, dtype="<c16", count=n * n, offset=off).reshape(n, n).copy()
    scheme = SCHEMES[scheme_code]
    if scheme == "polar_gauss":
        ring = nodes[::na] - np.array([cx, cy])
        radii = np.hypot(ring[:, 0], ring[:, 1])
        ring_weights = weights[::na] * na / (2 * math.pi)
        grid = QuadratureGrid(nodes.copy(), weights.copy(), radius, scheme, (cx, cy),
                              radii=radii, ring_weights=ring_weights, n_angle=int(na))
    else:
        grid = QuadratureGrid(nodes.copy(), weights.copy(), radius, scheme, (cx, cy), half_side=half_side)
    return grid, entries
