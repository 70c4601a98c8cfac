import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from droplet_inverse.kernels import (
    MediumSpec,
    apply_newtonian,
    demo_medium,
    free_space,
    gp_point,
    helmholtz_matrix,
    helmholtz_remainder,
    kernel_matrix,
    kernel_point_eval,
    make_gp,
    make_helmholtz,
    make_phi,
    newtonian_norm,
    phi_point,
    series_point_eval,
    singular_split,
)
from droplet_inverse.spectral import SpectralField, cosine_1d, evaluate, project, wavenumbers_squared

X = np.array([[1.8, 2.1, 3.0], [2.0, 4.0, 2.5], [3.9, 3.3, 2.2]])
Y = np.array([[3.5, 2.6, 2.2], [2.2, 3.9, 2.7], [2.4, 2.4, 4.4]])


def test_gp_constant_mode():
    P = 4.0
    out = apply_newtonian(make_gp(6, P), SpectralField.mode(6, (0, 0, 0)))
    expected = np.zeros((7, 7, 7))
    expected[0, 0, 0] = 1 / P**2
    assert np.allclose(out.coeffs, expected, atol=1e-16)


@pytest.mark.parametrize("P", [1.0, 4.0, 16.0])
def test_gp_norm_bound(P):
    assert newtonian_norm(make_gp(8, P)) <= 1 / P**2 * (1 + 1e-14)


def test_phi_mode_weight():
    out = apply_newtonian(make_phi(5), SpectralField.mode(5, (1, 2, 0)))
    assert out.coeffs[1, 2, 0] == pytest.approx(1 / 5)
    assert np.count_nonzero(out.coeffs) == 1
    assert apply_newtonian(make_phi(5), SpectralField.mode(5, (0, 0, 0))).l2_norm() == 0.0


def test_gp_point_matches_mollified_source_solve():
    # independent oracle: Gaussian source of width 0.1 solved in 48^3 modes
    P, eps, N = 1.0, 0.1, 48
    y = np.array([2.6, 3.0, 3.3])
    x = np.array([[3.7, 3.4, 2.6]])
    src = project(
        lambda a, b, c: np.exp(-((a - y[0]) ** 2 + (b - y[1]) ** 2 + (c - y[2]) ** 2) / (2 * eps**2))
        / (2 * math.pi * eps**2) ** 1.5,
        N,
    )
    u = evaluate(apply_newtonian(make_gp(N, P), src), x)[0]
    assert u == pytest.approx(gp_point(x, y[None], P)[0], rel=0.02)


def test_phi_point_matches_long_series():
    ref = series_point_eval(make_phi(40), X, Y)
    assert np.allclose(phi_point(X, Y), ref, rtol=5e-3)


@pytest.mark.parametrize("kind", ["phi", "gp", "helmholtz"])
def test_kernel_symmetry(kind):
    if kind == "phi":
        k = make_phi(8)
    elif kind == "gp":
        k = make_gp(8, 3.0)
    else:
        k = make_helmholtz(8, 1.1, demo_medium())
    assert np.allclose(kernel_point_eval(k, X, Y), kernel_point_eval(k, Y, X), rtol=1e-12, atol=0)
    M = kernel_matrix(k, np.vstack([X, Y]))
    assert np.abs(M - M.T).max() < 1e-12 * np.abs(M).max()


def test_helmholtz_constant_medium_closed_form():
    N, omega, c = 8, 1.3, 0.7
    k = make_helmholtz(N, omega, MediumSpec.constant(c))
    k2 = wavenumbers_squared(N).reshape(-1)
    diag = 1.0 / (k2 - omega**2 * c)
    rem = diag - np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)

    def vals(p):
        c1, c2, c3 = (cosine_1d(N, p[:, i]) for i in range(3))
        return np.einsum("pi,pj,pk->pijk", c1, c2, c3).reshape(p.shape[0], -1)

    ref = np.einsum("pi,i,pi->p", vals(X), rem, vals(Y))
    assert np.allclose(helmholtz_remainder(k, X, Y), ref, rtol=1e-8, atol=1e-12)
    assert np.allclose(np.diag(k.inverse), diag, rtol=1e-8)


def test_free_part_doubles_when_distance_halves():
    k = make_helmholtz(8, 1.1, demo_medium())
    # dyadic coordinates keep x + d/2^j exact
    x = np.array([3.0, 3.125, 3.25])
    d = np.array([0.25, -0.125, 0.5])
    prev = None
    for j in range(6):
        free, _ = singular_split(k, x, x + d / 2**j)
        if prev is not None:
            assert free[0] == 2 * prev
        prev = free[0]


@pytest.mark.parametrize("kind", ["phi", "gp", "helmholtz"])
def test_remainder_bounded_towards_diagonal(kind):
    k = {"phi": make_phi(8), "gp": make_gp(8, 2.0), "helmholtz": make_helmholtz(8, 1.1, demo_medium())}[kind]
    x = np.array([3.0, 2.9, 3.3])
    d = np.array([0.6, 0.4, -0.3])
    rem = np.array([singular_split(k, x, x + d * t)[1][0] for t in np.geomspace(1, 1e-4, 12)])
    assert np.abs(rem).max() <= 10 * abs(rem[0])


def test_free_space_scaling_under_droplet_map():
    rng = np.random.default_rng(0)
    z = np.array([3.0, 3.0, 3.0])
    u, v = rng.normal(size=(5, 3)) * 0.5, rng.normal(size=(5, 3)) * 0.5
    for a in (0.1, 0.01):
        assert np.allclose(free_space(z + a * u, z + a * v), free_space(u, v) / a, rtol=1e-13)


def test_helmholtz_kernel_inverts_operator(medium):
    N, omega = 8, 1.1
    k = make_helmholtz(N, omega, medium)
    f = SpectralField(np.random.default_rng(2).normal(size=(N + 1,) * 3))
    u = apply_newtonian(k, f)
    # Galerkin form of (Laplace + omega^2 n^2) u
    Lu = -(wavenumbers_squared(N) * u.coeffs) + omega**2 * medium.apply(u).coeffs
    assert np.linalg.norm(Lu + f.coeffs) <= 1e-8 * f.l2_norm()


def test_helmholtz_rejects_eigenvalue():
    N = 4
    # omega^2 * 1 = |k|^2 = 1 is a Neumann eigenvalue of the constant medium
    with pytest.raises(np.linalg.LinAlgError):
        make_helmholtz(N, 1.0, MediumSpec.constant(1.0))


def test_helmholtz_cache_roundtrip(tmp_path, medium):
    k1 = make_helmholtz(5, 0.77, medium, cache_dir=tmp_path)
    files = list(tmp_path.glob("helmholtz_*.npz"))
    assert len(files) == 1
    from droplet_inverse import kernels

    kernels._HELMHOLTZ_CACHE.clear()
    k2 = make_helmholtz(5, 0.77, medium, cache_dir=tmp_path)
    assert np.array_equal(k1.inverse, k2.inverse)


def test_multiplication_matrix_matches_quadrature(medium):
    N = 4
    M = medium.multiplication_matrix(N)
    f = SpectralField(np.random.default_rng(3).normal(size=(N + 1,) * 3))
    ref = project(lambda a, b, c: medium.evaluate_grid(a[:, 0, 0], b[0, :, 0], c[0, 0, :]) * f.evaluate_grid(a[:, 0, 0], b[0, :, 0], c[0, 0, :]), N, order=30)
    assert np.allclose(M @ f.flat, ref.flat, atol=1e-10)
    assert np.allclose(medium.apply(f).flat, ref.flat, atol=1e-10)


def test_medium_validation():
    bad = MediumSpec(offset=0.1, coeffs=np.full((2, 2, 2), 0.5))
    with pytest.raises(ValueError, match="lower bound"):
        bad.validate()
    assert MediumSpec.constant(0.0).is_zero
    d = demo_medium()
    assert MediumSpec.from_dict(d.to_dict()).digest() == d.digest()


@given(arrays(float, (5, 5, 5), elements=st.floats(-5, 5)))
def test_phi_is_positive_semidefinite(c):
    f = SpectralField(c)
    Nf = apply_newtonian(make_phi(4), f)
    assert np.sum(f.coeffs * Nf.coeffs) >= -1e-12


@given(arrays(float, (5, 5, 5), elements=st.floats(-5, 5)), st.floats(0.5, 40.0))
def test_gp_contraction(c, P):
    f = SpectralField(c)
    assert apply_newtonian(make_gp(4, P), f).l2_norm() <= f.l2_norm() / P**2 * (1 + 1e-12) + 1e-300
