import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from droplet_inverse.droplets import (
    admissible_c_window,
    alpha_bar,
    ball_basis,
    make_resonance,
    radial_eigenvalue_exact,
    radial_overlap_exact,
    scattering_alpha,
    solve_ball_spectrum,
)
from droplet_inverse.foldy_lax import fit_slope


def _radial_root(n):
    # interior sin(kr)/r matched to exterior 1/r: the condition k cos k = 0
    return brentq(lambda k: k * math.cos(k), (n - 1) * math.pi + 0.1, n * math.pi - 0.1)


def test_transcendental_oracle():
    for n in (1, 2, 3):
        k = _radial_root(n)
        assert radial_eigenvalue_exact(n) == pytest.approx(1 / k**2, rel=1e-12)


def test_first_two_radial_eigenvalues(spectrum):
    lam = spectrum.radial_eigenvalues()
    assert abs(lam[0] - 4 / math.pi**2) < 1e-3
    assert abs(lam[1] - 4 / (9 * math.pi**2)) < 1e-3
    assert lam[0] == pytest.approx(0.405285, abs=1e-6)


def test_first_overlap(spectrum):
    ov = spectrum.radial_overlaps()[0]
    assert abs(ov - 8 * math.sqrt(2) * math.pi**-1.5) < 1e-3
    assert ov <= math.sqrt(4 * math.pi / 3)
    # direct radial integral of the normalised sin(pi r/2)/r profile
    k = math.pi / 2
    norm = math.sqrt(4 * math.pi * quad(lambda r: math.sin(k * r) ** 2, 0, 1)[0])
    mass = 4 * math.pi * quad(lambda r: math.sin(k * r) * r, 0, 1)[0] / norm
    assert radial_overlap_exact(1) == pytest.approx(mass, rel=1e-10)
    assert ov == pytest.approx(mass, abs=1e-3)


def test_nonradial_overlaps_vanish(spectrum):
    assert np.all(spectrum.overlaps[spectrum.degrees > 0] == 0.0)
    assert spectrum.nonradial_overlaps_quadrature().max() < 1e-10


def test_eigenvalue_rescaling(spectrum):
    a = 0.1
    small = solve_ball_spectrum(radius=a)
    assert np.allclose(small.eigenvalues, a**2 * spectrum.eigenvalues, rtol=1e-10)


def test_spectrum_descending_and_accurate(spectrum):
    assert np.all(np.diff(spectrum.eigenvalues) <= 0)
    assert spectrum.residuals[: len(spectrum.residuals) // 2].max() < 1e-8


def test_resonance_P_squared(spectrum):
    p = make_resonance(spectrum, c_n0=-1.0, k0=1.0, rho1=1.0)
    assert p.P_sq == pytest.approx(32 / math.pi, rel=2e-3)
    assert p.P_sq == pytest.approx(10.186, abs=0.02)


def test_P_squared_blows_up_as_c_tends_to_zero(spectrum):
    cs = [-1.0, -0.5, -0.1, -0.01, -1e-4]
    P2 = [make_resonance(spectrum, c_n0=c).P_sq for c in cs]
    assert np.all(np.diff(P2) > 0)
    assert P2[-1] > 1e4


@pytest.mark.parametrize("a, h", [(0.05, 0.5), (1 / 64, 0.0), (0.1, 0.9)])
def test_dispersion_identity(spectrum, a, h):
    p = make_resonance(spectrum, c_n0=-0.5, a=a, h=h)
    assert abs(p.dispersion_residual()) <= 1e-15 * max(p.k1, 1e-300) * 10


def test_invalid_detuning(spectrum):
    with pytest.raises(ValueError, match="negative"):
        make_resonance(spectrum, c_n0=1.0)
    lo, hi = admissible_c_window(spectrum, 0)
    assert hi == 0.0
    with pytest.raises(ValueError, match="admissible"):
        make_resonance(spectrum, c_n0=1.1 * lo)


def test_dominant_alpha_term(spectrum):
    p = make_resonance(spectrum, c_n0=-0.25, a=1 / 32, h=0.5)
    r = scattering_alpha(p, spectrum)
    assert r.dominant == -p.P_sq * p.a ** (1 - p.h)
    # the n0 summand differs from the dominant term by the detuning factor
    assert r.resonant_term / r.dominant == pytest.approx(1 - p.c_n0 * p.a**p.h / p.k0, rel=1e-12)
    assert r.alpha == pytest.approx(r.dominant + r.tail, rel=1e-14)


def test_alpha_tail_is_order_a(spectrum):
    a = np.array([1 / 16, 1 / 32, 1 / 64])
    tails = [abs(scattering_alpha(make_resonance(spectrum, c_n0=-0.25, a=x, h=0.5), spectrum).tail) for x in a]
    assert fit_slope(a, np.array(tails)) >= 0.9


def test_alpha_ratio_converges(spectrum):
    p = make_resonance(spectrum, c_n0=-0.25, a=1 / 64, h=0.5)
    ratio = scattering_alpha(p, spectrum).alpha / p.a ** (1 - p.h)
    assert abs(ratio / -p.P_sq - 1) < 0.05


def test_alpha_bar_negative(spectrum):
    p = make_resonance(spectrum, c_n0=-1.0, k0=0.25, rho1=10.0, a=1 / 16, h=0.0)
    assert alpha_bar(p, spectrum) < 0


def test_too_many_terms(spectrum):
    p = make_resonance(spectrum, c_n0=-0.5)
    with pytest.raises(ValueError):
        scattering_alpha(p, spectrum, n_terms=100)


def test_ball_basis_moments():
    b = ball_basis(radial_order=12, angular_order=8)
    ones = np.ones(b.nodes.shape[0])
    assert np.sum(b.weights) == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert np.allclose(b.values.T @ (b.weights * ones), b.moments, atol=1e-12)
    G = b.values.T @ (b.weights[:, None] * b.values)
    assert np.allclose(G, b.gram, atol=1e-10)


@given(c=st.floats(-3.0, -1e-3), a=st.floats(1e-3, 0.2), h=st.floats(0.0, 0.95))
def test_P_squared_matches_dominant_alpha(spectrum, c, a, h):
    try:
        p = make_resonance(spectrum, c_n0=c, a=a, h=h, min_separation=0.0)
        r = scattering_alpha(p, spectrum)
    except (ValueError, ZeroDivisionError):
        return
    assert -r.dominant / a ** (1 - h) == pytest.approx(p.P_sq, rel=1e-13)
