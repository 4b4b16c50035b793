import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from disp2d import specfun
from disp2d.grid import build_grid
from disp2d.operator import (
    DiscreteOperator,
    amplitude_scan,
    ExpansionUnavailableError,
    FreeResolventKernel,
    G0Kernel,
    NearSingularError,
    ResolutionError,
    assemble_M,
    assemble_sandwiched,
    fehsbach_expansion,
    invert_M_direct,
    locate_nonregular_window,
    operator_T,
    projection_P,
    projection_vector,
    regularity_check,
)
from disp2d.potential import DegeneratePotentialError, PotentialSpec, standard_well

ALGEBRA_TOL = 1e-12
WINDOW_STABILITY = 0.02


def dense_from_kernel(grid, spec, kernel):
    """Off-diagonal Nystrom entries built directly from node pairs."""
    s = np.sqrt(grid.weights) * spec.sqrt_abs(grid.nodes)
    d = grid.pair_distances.copy()
    np.fill_diagonal(d, 1.0)
    k = np.array(kernel(d), dtype=complex)
    np.fill_diagonal(k, 0.0)
    return s[:, None] * k * s[None, :]


def test_circulant_storage_matches_pairwise_assembly(well, small_grid):
    for kernel in (G0Kernel(), FreeResolventKernel(1, 0.3)):
        op = assemble_sandwiched(kernel, small_grid, well)
        assert op.circulant
        dense = op.entries.copy()
        np.fill_diagonal(dense, 0.0)
        ref = dense_from_kernel(small_grid, well, kernel)
        assert np.max(np.abs(dense - ref)) < ALGEBRA_TOL * np.max(np.abs(ref))


def test_off_center_potential_uses_dense_storage():
    spec = PotentialSpec("gaussian_well", 0.5, 1.0, center=(0.0, 0.0))
    grid = build_grid(spec, 8, 8)
    shifted = PotentialSpec("gaussian_well", 0.5, 1.0, center=(0.1, 0.0))
    op = assemble_sandwiched(G0Kernel(), grid, shifted)
    assert not op.circulant
    assert np.all(np.isfinite(op.entries))
    assert np.allclose(op.entries, op.entries.T, atol=1e-14)


def test_log_corrected_diagonal_reproduces_log_potential(well):
    grid = build_grid(well, 32, 48)
    op = assemble_sandwiched(G0Kernel(), grid, well)
    s = np.sqrt(grid.weights) * well.sqrt_abs(grid.nodes)
    u = np.real(op.apply(s)) / s
    rings = grid.radii[::4]
    ref = []
    for rho in rings:
        val, _ = quad(lambda r: -0.5 * math.log(max(rho, r)) * math.exp(-0.5 * r * r) * r,
                      0, grid.radius, points=[rho], epsabs=1e-13)
        ref.append(val)
    got = u[:: grid.n_angle][::4]
    assert np.max(np.abs(got - np.array(ref))) < 1e-4


def test_log_corrected_beats_equal_area_disk(well):
    grid = build_grid(well, 24, 48)
    s = np.sqrt(grid.weights) * well.sqrt_abs(grid.nodes)
    rho = grid.radii[0]
    ref, _ = quad(lambda r: -0.5 * math.log(max(rho, r)) * math.exp(-0.5 * r * r) * r,
                  0, grid.radius, points=[rho], epsabs=1e-13)
    errs = {}
    for rule in ("log_corrected", "equal_area_disk"):
        op = assemble_sandwiched(G0Kernel(), grid, well, diagonal_rule=rule)
        errs[rule] = abs(np.real(op.apply(s))[0] / s[0] - ref)
    assert errs["log_corrected"] < errs["equal_area_disk"]


def test_operator_algebra_matches_dense(well, small_grid, rng):
    a = assemble_sandwiched(FreeResolventKernel(1, 0.4), small_grid, well)
    b = operator_T(small_grid, well)
    da, db = a.entries, b.entries
    assert np.allclose((a @ b).entries, da @ db, atol=1e-12)
    assert np.allclose(a.conj().entries, np.conj(da), atol=1e-14)
    assert np.allclose(a.transpose().entries, da.T, atol=1e-14)
    m = a + b
    assert np.allclose(m.inverse().entries, np.linalg.inv(da + db), atol=1e-10)
    x = rng.normal(size=small_grid.size) + 1j * rng.normal(size=small_grid.size)
    u = rng.normal(size=small_grid.size)
    assert np.allclose(a.apply(x), da @ x, atol=1e-12)
    assert a.bilinear(u, x) == pytest.approx(u @ da @ x, abs=1e-12)
    assert a.hs_norm() == pytest.approx(np.linalg.norm(da), rel=1e-12)
    assert a.norm2() == pytest.approx(np.linalg.norm(da, 2), rel=1e-12)


def test_projection_algebra(well, small_grid):
    P = projection_P(small_grid, well)
    eye = DiscreteOperator.identity(small_grid)
    Q = eye - P
    assert (P @ P - P).hs_norm() < ALGEBRA_TOL
    assert (P @ Q).hs_norm() < ALGEBRA_TOL
    assert (Q @ Q - Q).hs_norm() < ALGEBRA_TOL
    s = np.sqrt(small_grid.weights) * well.sqrt_abs(small_grid.nodes)
    assert np.allclose(P.apply(s), s, atol=1e-14)
    assert P.hs_norm() == pytest.approx(1.0)
    assert np.linalg.norm(projection_vector(small_grid, well)) == pytest.approx(1.0)


def test_T_is_real_symmetric(well, small_grid):
    T = operator_T(small_grid, well)
    assert T.is_hermitian()
    assert np.isrealobj(T.entries)


def test_degenerate_potential():
    spec = PotentialSpec("gaussian_well", 0.0, 1.0)
    grid = build_grid(spec, 6, 6, radius=3.0)
    with pytest.raises(DegeneratePotentialError):
        projection_vector(grid, spec)


def test_resolution_guard(well, small_grid):
    lam = 0.6 / small_grid.max_spacing
    with pytest.raises(ResolutionError):
        assemble_M(1, lam, small_grid, well)


def test_near_singular_cap(well, small_grid):
    M = assemble_M(1, 0.1, small_grid, well)
    with pytest.raises(NearSingularError):
        invert_M_direct(M, condition_cap=1.0)


def test_standard_well_is_regular(well, medium_grid):
    rep = regularity_check(medium_grid, well)
    assert rep.verdict == "regular"
    assert rep.sigma_min > 0.5
    assert math.isfinite(rep.abs_bound_norm)


def test_regular_verdict_required_for_expansion(medium_grid, well):
    rep = regularity_check(medium_grid, well)
    bad = type(rep)(**{**rep.as_dict(), "verdict": "non_regular"})
    with pytest.raises(ExpansionUnavailableError):
        fehsbach_expansion(medium_grid, well, bad)


def test_expansion_inverts_leading_operator(well, small_grid):
    b = fehsbach_expansion(small_grid, well, regularity_check(small_grid, well))
    for branch in (1, -1):
        lam = 1e-3
        prod = b.leading_operator(branch, lam) @ b.approximate_inverse(branch, lam)
        assert (prod - DiscreteOperator.identity(small_grid)).hs_norm() < 1e-10


def test_expansion_error_shrinks(well, small_grid):
    b = fehsbach_expansion(small_grid, well, regularity_check(small_grid, well))
    errs = [b.expansion_error(1, lam) for lam in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert b.neumann_ratio(1, 1e-3) < 1


@given(st.floats(1e-4, 1.0))
def test_g_constant_matches_specfun(lam):
    from disp2d.operator import g_constant
    assert g_constant(1, lam) == pytest.approx(specfun.g_func(1, lam, 1.0), abs=1e-15)


def test_resonant_window_is_grid_stable():
    template = standard_well(-1.0)
    coarse = locate_nonregular_window(template, (-3.6, -3.1), 16, 32)
    fine = locate_nonregular_window(template, (-3.6, -3.1), 32, 64)
    assert coarse.lower < coarse.center < coarse.upper
    assert abs(fine.center - coarse.center) < WINDOW_STABILITY * abs(fine.center)
    width = fine.upper - fine.lower
    assert abs((coarse.upper - coarse.lower) - width) < WINDOW_STABILITY * width


def test_amplitude_scan_dips_in_window():
    template = standard_well(-1.0)
    win = locate_nonregular_window(template, (-3.6, -3.1), 16, 32)
    amps = [-3.0, win.center, -3.7]
    reports = amplitude_scan(template, amps, 16, 32)
    verdicts = [r.verdict for _, r in reports]
    assert verdicts == ["regular", "non_regular", "regular"]
    assert reports[1][1].critical_mode in (1, 31)
