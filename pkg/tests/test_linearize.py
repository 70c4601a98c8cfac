import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from droplet_inverse.droplets import make_resonance
from droplet_inverse.forward import pairing, solve_qf, solve_ug
from droplet_inverse.kernels import MediumSpec, newtonian_norm, make_gp
from droplet_inverse.linearize import (
    born_tail,
    born_terms,
    default_f_set,
    linearization_residual,
    resolved_truncation,
    solve_W,
)
from droplet_inverse.spectral import BoundaryField, SpectralField, boundary_pairing, trace, wavenumbers_squared

N = 8
P_SWEEP = [4.0, 8.0, 16.0, 32.0]


@pytest.fixture(scope="module")
def omega(spectrum, medium):
    return make_resonance(spectrum, c_n0=-1.0, k0=0.25, rho1=10.0, a=1 / 8, h=0.0, n2_sup=medium.sup_norm).omega


@pytest.fixture(scope="module")
def report(medium, omega):
    return linearization_residual(default_f_set(12), medium, omega, P_SWEEP, resolve=True)


def _rand_bf(seed, n=N):
    return BoundaryField(np.random.default_rng(seed).normal(size=(6, n + 1, n + 1)), -0.5)


def test_zero_medium_W():
    q = solve_qf(_rand_bf(0), 4.0)
    assert solve_W(q, MediumSpec.constant(0.0), 4.0).l2_norm() == 0.0


def test_constant_medium_single_mode():
    c, P = 0.7, 5.0
    q = SpectralField.mode(N, (1, 2, 0), 0.3)
    W = solve_W(q, MediumSpec.constant(c), P)
    assert W.coeffs[1, 2, 0] == pytest.approx(c * 0.3 / (5 + P * P), rel=1e-14)
    assert np.count_nonzero(W.coeffs) == 1


def test_W_duality(medium):
    P = 4.0
    for seed in range(3):
        f, g = _rand_bf(seed), _rand_bf(seed + 7)
        qf, qg = solve_qf(f, P), solve_qf(g, P)
        lhs = boundary_pairing(trace(solve_W(qf, medium, P)), g)
        rhs = np.sum(medium.apply(qf).coeffs * qg.coeffs)
        assert lhs == pytest.approx(rhs, rel=1e-7)


def test_second_born_term_by_composition(medium, omega):
    P = 4.0
    f = _rand_bf(1)
    K = born_terms(f, medium, omega, P, 2)
    M = medium.multiplication_matrix(N)
    D = 1.0 / (wavenumbers_squared(N).reshape(-1) + P * P)
    q = solve_qf(f, P).flat
    direct = omega**4 * (D * (M @ (D * (M @ q))))
    assert np.allclose(K[1].flat, direct, rtol=1e-12, atol=1e-16)


@pytest.mark.parametrize("P", [4.0, 8.0])
def test_born_tail_geometric_and_telescoping(medium, omega, P):
    rep = born_tail(BoundaryField.face_mode(N, 0, (1, 0)), medium, omega, P)
    assert np.all(rep.volume_ratios() <= rep.ratio * 1.1)
    assert rep.tail_gap <= 1e-7


def test_born_partial_sums_monotone(medium, omega):
    P = 4.0
    f = BoundaryField.face_mode(N, 2, (1, 1))
    target = (solve_ug(f, medium, omega, P) - solve_qf(f, P)).flat
    partial = np.zeros_like(target)
    errs = []
    for t in born_terms(f, medium, omega, P, 6):
        partial = partial + t.flat
        errs.append(np.linalg.norm(target - partial))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_born_ratio_precondition(medium):
    with pytest.raises(ValueError, match="ratio"):
        born_tail(BoundaryField.face_mode(N, 0, (1, 0)), medium, 5.0, 1.0)


def test_zero_medium_residual_exact(omega):
    rep = linearization_residual(default_f_set(6), MediumSpec.constant(0.0), omega, P_SWEEP)
    assert all(r["residual_norm"] == 0.0 and r["lead_norm"] == 0.0 for r in rep.rows)


def test_resolved_truncation():
    assert resolved_truncation(12, 4.0) == 12
    assert resolved_truncation(12, 32.0) == 96


def test_residual_slope(report):
    for fid in report.f_ids:
        assert report.slope(fid) <= -3.0


def test_lead_term_measured_slope(report):
    # smooth data: q^f lives in a 1/P boundary layer, so the lead decays about as P^-3
    for fid in report.f_ids:
        assert -3.3 <= report.slope(fid, "lead_norm") <= -2.7


@pytest.mark.xfail(strict=True, reason="operator-norm band is not sharp for smooth data; measured slope is about -3")
def test_lead_term_slope_in_norm_band(report):
    for fid in report.f_ids:
        assert -2.6 <= report.slope(fid, "lead_norm") <= -1.6


def test_lead_pairing_matches_duality(medium, omega):
    # omega^2 <gamma W, g> equals the first-order change of the effective pairing
    P, eps = 6.0, 1e-6
    f, g = BoundaryField.face_mode(N, 0, (1, 0)), BoundaryField.face_mode(N, 3, (0, 1))
    W = solve_W(solve_qf(f, P), medium, P)
    lead = omega**2 * pairing(W, g)
    w_small = np.sqrt(eps) * omega
    change = (pairing(solve_ug(f, medium, w_small, P), g) - pairing(solve_qf(f, P), g)) / eps
    assert change == pytest.approx(lead, rel=1e-4)


@given(st.floats(1.0, 40.0))
def test_newtonian_norm_exact(P):
    assert newtonian_norm(make_gp(4, P)) == pytest.approx(1 / P**2, rel=1e-14)
