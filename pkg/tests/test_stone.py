import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import j0, j1

from disp2d.stone import (
    AccuracyNotReachedError,
    CertificateUnavailableError,
    CutoffSpec,
    QuadConfig,
    STONE_COLUMNS,
    ZERO_AT_ORIGIN_CALIBRATION,
    WITH_BOUNDARY_CALIBRATION,
    filon_integral,
    free_reference,
    ibp_certificate,
    oscillatory_integral,
    panel_breaks,
    propagator_kernel,
    propagator_kernels,
    smooth_cutoff,
    smooth_cutoff_derivative,
    spline_density,
)

ORACLE_TOL = 1e-6
CUTOFF = CutoffSpec(lambda1=1.0)


def qawf_free_kernel(t, d):
    """(i/4) int_0^inf e^{its} J0(d sqrt(s)) ds by scipy's Fourier-integral routine."""
    f = lambda s: j0(d * math.sqrt(s))  # noqa: E731
    c, _ = quad(f, 0, np.inf, weight="cos", wvar=t, limlst=200)
    s, _ = quad(f, 0, np.inf, weight="sin", wvar=t, limlst=200)
    return 0.25j * (c + 1j * s)


def qawo_integral(t, E, lam_end):
    """int_0^lam_end e^{it lam^2} lam E(lam) dlam = (1/2) int_0^{lam_end^2} e^{its} E(sqrt s) ds."""
    def part(fn, weight):
        val, _ = quad(lambda s: fn(E(math.sqrt(s))), 0, lam_end**2, weight=weight, wvar=t, limit=400,
                      epsabs=1e-15, epsrel=1e-11)
        return val
    re = part(lambda z: z.real, "cos") - part(lambda z: z.imag, "sin")
    im = part(lambda z: z.real, "sin") + part(lambda z: z.imag, "cos")
    return 0.5 * complex(re, im)


def test_free_reference_matches_qawf():
    t, d = 50.0, 3.0
    assert abs(free_reference(t, (0, 0), (d, 0)) - qawf_free_kernel(t, d)) < ORACLE_TOL * 0.25 / t


@pytest.mark.parametrize("t,d", [(50.0, 3.0), (100.0, 0.0), (1000.0, 2.0)])
def test_free_stone_kernel_matches_oracle(t, d):
    k = propagator_kernel(t, (0.0, 0.0), (d, 0.0))
    ref = free_reference(t, (0.0, 0.0), (d, 0.0))
    assert k.saturated
    assert abs(k.value - ref) < ORACLE_TOL * abs(ref)
    assert abs(k.value - ref) <= k.abs_error_estimate


def test_negative_time_identity():
    ks = propagator_kernels([50.0, -50.0], [(0.0, 0.0)], [(3.0, 0.0)])
    kp, km = ks[0][0].value, ks[1][0].value
    # the Stone density is purely imaginary, so K_{-t} = -conj(K_t)
    assert km == pytest.approx(-np.conj(kp), abs=1e-15)


def test_refinement_reduces_error():
    quad_cfg = QuadConfig(panels_init=4, max_refine=0, rtol=1.0)
    ref = free_reference(30.0, (0, 0), (2.0, 0))
    errs = []
    for level in range(3):
        k = propagator_kernels([30.0], [(0.0, 0.0)], [(2.0, 0.0)], quad=quad_cfg, level=level)[0][0]
        errs.append((abs(k.value - ref), k.abs_error_estimate))
    assert errs[0][0] > errs[1][0] > errs[2][0]
    for actual, est in errs:
        assert actual <= est


def test_panels_are_nested():
    q = QuadConfig(panels_init=8)
    coarse = panel_breaks(3.0, q, 0)
    fine = panel_breaks(3.0, q, 1)
    assert np.all(np.isin(coarse, fine))
    assert fine.size == 2 * coarse.size - 1


def test_accuracy_not_reached():
    q = QuadConfig(panels_init=1, max_refine=0, rtol=1e-14, atol=0.0)
    with pytest.raises(AccuracyNotReachedError) as info:
        propagator_kernel(500.0, (0.0, 0.0), (4.0, 0.0), quad=q)
    assert not info.value.best.converged


def test_short_times_rejected():
    with pytest.raises(ValueError):
        propagator_kernel(1.5, (0.0, 0.0), (1.0, 0.0))


def test_row_format():
    k = propagator_kernel(50.0, (0.0, 0.0), (1.0, 0.0))
    row = k.row()
    assert len(row) == len(STONE_COLUMNS)
    assert float(row[5]) == k.value.real


@given(st.floats(-3.0, 3.0), st.floats(0.05, 2.0))
def test_cutoff_invariants(u, lambda1):
    spec = CutoffSpec(lambda1=lambda1)
    c = float(smooth_cutoff(u, spec))
    assert 0.0 <= c <= 1.0
    assert c == float(smooth_cutoff(-u, spec))
    if abs(u) <= lambda1 / 2:
        assert c == 1.0
    if abs(u) >= lambda1:
        assert c == 0.0


def test_cutoff_monotone_and_derivative():
    u = np.linspace(0.0, 1.2, 2001)
    c = smooth_cutoff(u, CUTOFF)
    assert np.all(np.diff(c) <= 0)
    h = 1e-6
    uu = np.linspace(0.51, 0.99, 50)
    fd = (smooth_cutoff(uu + h, CUTOFF) - smooth_cutoff(uu - h, CUTOFF)) / (2 * h)
    assert np.allclose(smooth_cutoff_derivative(uu, CUTOFF), fd, atol=1e-7)


def test_cutoff_dilation():
    spec = CutoffSpec(lambda1=0.1, L=5.0)
    assert spec(0.24) == 1.0
    assert spec(0.5) == 0.0


def test_filon_exact_for_quadratics():
    nodes = np.linspace(0.0, 2.0, 9)
    f = (1 + nodes - 0.5 * nodes**2)[:, None]
    for t in (0.0, 3.0, 400.0):
        got = filon_integral(np.array([t]), nodes, f, 2, 1)[0, 0]
        re, _ = quad(lambda s: (1 + s - 0.5 * s * s) * math.cos(t * s), 0, 2, limit=200)
        im, _ = quad(lambda s: (1 + s - 0.5 * s * s) * math.sin(t * s), 0, 2, limit=200)
        assert got == pytest.approx(complex(re, im), abs=1e-12)


def test_oscillatory_integral_matches_qawo():
    def E(lam):
        return 0.5j * smooth_cutoff(lam, CUTOFF) * (j0(3.0 * lam) - 1.0)
    for t in (10.0, 100.0):
        got, err = oscillatory_integral([t], lambda lams: E(np.asarray(lams)), 1.0)
        ref = qawo_integral(t, lambda lam: complex(E(np.array([lam]))[0]), 1.0)
        assert abs(got[0] - ref) < 1e-9
        assert abs(got[0] - ref) <= err[0]


def free_density(r):
    def density(lam):
        lam = np.asarray(lam, dtype=float)
        chi = smooth_cutoff(lam, CUTOFF)
        dchi = smooth_cutoff_derivative(lam, CUTOFF)
        e = 0.5j * (j0(r * lam) - 1.0)
        de = -0.5j * r * j1(r * lam)
        return chi * e, dchi * e + chi * de
    return density


@pytest.mark.parametrize("r", [1.0, 3.0])
@pytest.mark.parametrize("t", [10.0, 100.0, 1000.0])
def test_zero_at_origin_certificate_is_sound(r, t):
    dens = free_density(r)
    cert = ibp_certificate(dens, t, "zero_at_origin", 1.0)
    assert cert.calibration == ZERO_AT_ORIGIN_CALIBRATION
    integral = qawo_integral(t, lambda lam: complex(dens(np.array([lam]))[0][0]), 1.0)
    assert abs(integral) <= cert.calibration * cert.value


@pytest.mark.parametrize("t", [10.0, 100.0, 1000.0])
def test_with_boundary_certificate_is_sound(t):
    def dens(lam):
        lam = np.asarray(lam, dtype=float)
        return 1j * smooth_cutoff(lam, CUTOFF), 1j * smooth_cutoff_derivative(lam, CUTOFF)
    cert = ibp_certificate(dens, t, "with_boundary", 1.0, e_origin=1j)
    assert cert.calibration == WITH_BOUNDARY_CALIBRATION
    integral = qawo_integral(t, lambda lam: complex(dens(np.array([lam]))[0][0]), 1.0)
    # boundary term i E(0) / (2t) with E(0) = i
    assert abs(integral + 1 / (2 * t)) <= cert.calibration * cert.value


def test_zero_at_origin_certificate_decays():
    dens = free_density(1.0)
    ts = np.array([100.0, 1000.0, 10000.0])
    vals = [ibp_certificate(dens, t, "zero_at_origin", 1.0).value for t in ts]
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    assert slope <= -1.15


def test_certificate_guards():
    dens = free_density(1.0)
    with pytest.raises(ValueError):
        ibp_certificate(dens, 1.0, "zero_at_origin", 1.0)
    with pytest.raises(ValueError):
        ibp_certificate(dens, 10.0, "bogus", 1.0)
    with pytest.raises(CertificateUnavailableError):
        ibp_certificate(dens, 10.0, "zero_at_origin", 1.0, n=4, rtol=1e-12)


def test_spline_density_reproduces_smooth_samples():
    lam = np.geomspace(1e-6, 1.0, 400)
    vals = 0.5j * j0(2.0 * lam)
    E = spline_density(lam, vals, CutoffSpec(lambda1=1.0))
    probe = np.array([0.01, 0.2, 0.45])
    e, de = E(probe)
    assert np.allclose(e, 0.5j * j0(2.0 * probe), atol=1e-8)
    assert np.allclose(de, -1j * j1(2.0 * probe), atol=1e-5)
