import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from disp2d import specfun
from disp2d.grid import build_grid
from disp2d.resolvent import (
    FreeMachinery,
    GridMachinery,
    LambdaRangeError,
    RadialMachinery,
    RadialSource,
    ResolventSample,
    born_series_kernel,
    perturbed_resolvent_kernel,
    read_samples_csv,
    stone_density,
    write_samples_csv,
)
from disp2d.specfun import SignBranch

ROUTE_TOL = 1e-5


@pytest.fixture(scope="module")
def grid_machinery(well):
    return GridMachinery(build_grid(well, 64, 128), well)


@pytest.fixture(scope="module")
def radial_machinery(well):
    return RadialMachinery(well, n_radial=256)


def test_free_machinery_density():
    m = FreeMachinery()
    x, y = (0.3, 0.1), (-1.0, 2.0)
    d = np.hypot(1.3, 1.9)
    assert stone_density(0.7, x, y, m) == pytest.approx(0.5j * specfun.bessel_j0(0.7 * d), abs=1e-15)
    assert perturbed_resolvent_kernel(1, 0.7, x, y) == pytest.approx(specfun.r0_of_z(1, 0.7 * d))


@pytest.mark.parametrize("lam", [0.05, 0.5, 1.4])
def test_grid_and_radial_routes_agree(grid_machinery, radial_machinery, lam):
    x, y = (0.0, 0.0), (2.0, 1.0)
    for branch in (1, -1):
        a = grid_machinery.kernel(branch, lam, x, y)[0]
        b = radial_machinery.kernel(branch, lam, x, y)[0]
        assert abs(a - b) < ROUTE_TOL * max(1.0, abs(a))


@pytest.mark.parametrize("lam", [0.05, 0.8])
def test_density_is_branch_difference(grid_machinery, lam):
    x, y = (0.5, 0.2), (1.5, -1.0)
    plus = grid_machinery.kernel(1, lam, x, y)
    minus = grid_machinery.kernel(-1, lam, x, y)
    assert grid_machinery.density(lam, x, y) == pytest.approx(plus - minus, abs=1e-12)


def test_minus_branch_is_conjugate(grid_machinery):
    x, y = (0.5, 0.2), (1.5, -1.0)
    plus = grid_machinery.kernel(1, 0.3, x, y)
    minus = grid_machinery.kernel(-1, 0.3, x, y)
    assert minus == pytest.approx(np.conj(plus), abs=1e-13)


def test_kernel_is_symmetric(grid_machinery):
    x, y = (0.5, 0.2), (1.5, -1.0)
    assert grid_machinery.kernel(1, 0.6, x, y) == pytest.approx(grid_machinery.kernel(1, 0.6, y, x), abs=1e-13)


def test_density_finite_on_diagonal(grid_machinery, radial_machinery):
    d1 = grid_machinery.density(0.4, (0.0, 0.0), (0.0, 0.0))
    d2 = radial_machinery.density(0.4, (0.0, 0.0), (0.0, 0.0))
    assert np.isfinite(d1).all()
    assert d1 == pytest.approx(d2, abs=ROUTE_TOL)
    with pytest.raises(ValueError):
        grid_machinery.kernel(1, 0.4, (0.0, 0.0), (0.0, 0.0))


def test_lambda_range_guard(grid_machinery, radial_machinery):
    with pytest.raises(LambdaRangeError):
        grid_machinery.kernel(1, 0.0, (0.0, 0.0), (1.0, 0.0))
    with pytest.raises(LambdaRangeError):
        radial_machinery.density(25.0, (0.0, 0.0), (1.0, 0.0))


def test_radial_machinery_needs_a_centered_point(radial_machinery):
    with pytest.raises(ValueError):
        radial_machinery.kernel(1, 0.5, (1.0, 0.0), (0.0, 1.0))


def test_fehsbach_provider_agrees_at_low_energy(well):
    grid = build_grid(well, 16, 32)
    direct = GridMachinery(grid, well)
    approx = GridMachinery(grid, well, inverse="fehsbach")
    x, y = (0.0, 0.0), (1.0, 0.5)
    a = direct.kernel(1, 1e-4, x, y)[0]
    b = approx.kernel(1, 1e-4, x, y)[0]
    assert abs(a - b) < 1e-2 * abs(a)


@pytest.mark.parametrize("lam", [0.8, 1.4])
def test_born_series_within_estimate(grid_machinery, lam):
    x, y = (0.0, 0.0), (2.0, 1.0)
    res = born_series_kernel(1, lam, x, y, 12, grid_machinery)
    assert not res.diverging
    exact = grid_machinery.kernel(1, lam, x, y)[0]
    assert abs(res.value - exact) <= res.truncation_estimate


def test_born_series_divergence_warning(well):
    deep = type(well)("gaussian_well", -4.0, 1.0)
    m = GridMachinery(build_grid(deep, 16, 32), deep)
    with pytest.warns(RuntimeWarning):
        res = born_series_kernel(1, 0.1, (0.0, 0.0), (1.0, 0.0), 3, m)
    assert res.diverging


def test_applied_density_free_closed_form(well, radial_machinery):
    # free part: radial quadrature of J0 against a Gaussian has the closed form sigma^2 exp(-lam^2 sigma^2/2)
    src = RadialSource.gaussian(1.5)
    lams = np.array([0.3, 1.0, 2.0])
    free = FreeMachinery().applied_density_table(lams, src)
    ref = 0.5j * 2 * np.pi * 1.5**2 * np.exp(-0.5 * (lams * 1.5) ** 2)
    assert np.max(np.abs(free - ref)) < 1e-12
    pert = radial_machinery.applied_density_table(lams, src)
    assert np.all(np.abs(pert.real) == 0)


def test_samples_csv_round_trip(tmp_path):
    samples = [ResolventSample(SignBranch.PLUS, 0.1, (0.0, 0.0), (1.0, 2.0), 1 / 3 + 1j / 7),
               ResolventSample(SignBranch.MINUS, 2.5, (1.0, 0.0), (0.0, 0.5), -0.25 - 2e-17j, "born_series")]
    path = tmp_path / "r.csv"
    write_samples_csv(path, samples, ["potential test"])
    back = read_samples_csv(path)
    assert back == samples
    assert path.read_text().startswith("# potential test\n")


@given(st.floats(0.01, 5.0))
def test_free_density_matches_jump(lam):
    m = FreeMachinery()
    x, y = (0.0, 0.0), (1.2, -0.4)
    jump = m.kernel(1, lam, x, y) - m.kernel(-1, lam, x, y)
    assert m.density(lam, x, y) == pytest.approx(jump, abs=1e-13)
