import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad
from scipy.special import erf

from disp2d.grid import build_grid, read_container, write_container
from disp2d.potential import ConfigurationError, PotentialSpec, load_table, standard_well

QUAD_TOL = 1e-12


def test_gaussian_l1_norm_matches_quadrature():
    spec = PotentialSpec("gaussian_well", -1.3, 0.7)
    ref, _ = quad(lambda r: 1.3 * math.exp(-0.5 * (r / 0.7) ** 2) * 2 * math.pi * r, 0, 50)
    assert spec.l1_norm() == pytest.approx(ref, rel=1e-12)


def test_bump_l1_norm_matches_quadrature():
    spec = PotentialSpec("compact_bump", 2.0, 1.5)
    ref, _ = quad(lambda r: float(spec.radial(np.array([r]))[0]) * 2 * math.pi * r, 0, 1.5, epsabs=1e-14)
    assert spec.l1_norm() == pytest.approx(ref, rel=1e-10)


def test_sign_and_sqrt_factor(rng):
    spec = PotentialSpec("gaussian_well", -0.8, 1.0)
    pts = rng.normal(size=(50, 2))
    assert np.all(spec.sign(pts) == -1)
    assert np.allclose(spec.sign(pts) * spec.sqrt_abs(pts) ** 2, spec(pts), rtol=1e-15, atol=0)


def test_effective_radius_tail():
    spec = standard_well()
    r = spec.effective_radius(1e-10)
    assert spec.tail_mass(r) == pytest.approx(1e-10 * spec.l1_norm(), rel=1e-9)


def test_tabulated_potential(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("# r v\n0 1\n1 0.5\n2 0\n")
    spec = PotentialSpec("tabulated", 2.0, beta=3.0, table=load_table(path))
    assert spec.radial(np.array([0.5, 3.0])) == pytest.approx([1.5, 0.0])
    # exact mass of the piecewise linear profile
    ref = 2 * (2 * math.pi) * (quad(lambda r: (1 - 0.5 * r) * r, 0, 2)[0])
    assert spec.l1_norm() == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    {"form": "nope", "amplitude": 1.0},
    {"form": "gaussian_well", "amplitude": 1.0, "width": 0.0},
    {"form": "gaussian_well", "amplitude": 1.0, "beta": 1.5},
    {"form": "tabulated", "amplitude": 1.0, "beta": 3.0},
])
def test_invalid_potentials(kwargs):
    with pytest.raises(ConfigurationError):
        PotentialSpec(**kwargs)


@given(st.integers(4, 40), st.integers(4, 40))
def test_polar_grid_integrates_gaussian(nr, na):
    spec = standard_well()
    grid = build_grid(spec, max(nr, 24), na, radius=6.0)
    f = np.exp(-0.5 * np.sum(grid.nodes**2, axis=1))
    assert np.sum(grid.weights * f) == pytest.approx(2 * math.pi * (1 - math.exp(-18.0)), rel=QUAD_TOL)


def test_tensor_grid_integrates_gaussian():
    spec = standard_well()
    grid = build_grid(spec, 40, 2, radius=5.0, scheme="tensor_gauss")
    f = np.exp(-0.5 * np.sum(grid.nodes**2, axis=1))
    ref = (math.sqrt(2 * math.pi) * erf(5.0 / math.sqrt(2))) ** 2
    assert np.sum(grid.weights * f) == pytest.approx(ref, rel=QUAD_TOL)
    assert grid.radius == pytest.approx(5.0 * math.sqrt(2))


@pytest.mark.parametrize("point", [(0.0, 0.0), (0.3, -0.7), (1.9, 1.2)])
def test_square_log_integral_matches_dblquad(point):
    grid = build_grid(standard_well(), 4, 2, radius=2.0, scheme="tensor_gauss")
    x0, y0 = point
    val, _ = dblquad(lambda y, x: -math.log(math.hypot(x - x0, y - y0) + 1e-300) / (2 * math.pi),
                     -2, 2, -2, 2, epsabs=1e-11, epsrel=1e-11)
    assert float(grid.g0_domain_integral(np.array(point))) == pytest.approx(val, abs=1e-8)


def test_disk_log_integral_matches_radial_formula():
    grid = build_grid(standard_well(), 8, 8, radius=3.0)
    for rho in (0.0, 1.0, 2.5):
        # angular mean of log|x - y| over a ring of radius s is log max(rho, s)
        val, _ = quad(lambda s: -math.log(max(rho, s)) * s, 0, 3.0, points=[rho] if rho > 0 else None)
        assert float(grid.g0_domain_integral(np.array([rho, 0.0]))) == pytest.approx(val, abs=1e-12)


def test_container_round_trip(tmp_path):
    grid = build_grid(standard_well(), 6, 8)
    entries = np.arange(grid.size**2, dtype=float).reshape(grid.size, grid.size) * (1 + 2j)
    path = tmp_path / "g.bin"
    write_container(path, grid, entries)
    g2, e2 = read_container(path)
    assert np.array_equal(g2.nodes, grid.nodes)
    assert np.array_equal(g2.weights, grid.weights)
    assert g2.grid_id == grid.grid_id
    assert np.array_equal(e2, entries)


def test_grid_rejects_bad_orders():
    with pytest.raises(ConfigurationError):
        build_grid(standard_well(), 1, 8)
    with pytest.raises(ConfigurationError):
        build_grid(standard_well(), 8, 8, scheme="hexagonal")
