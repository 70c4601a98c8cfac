"""Newtonian spectrum of the ball, resonance tuning and the scattering coefficient.

The droplet-local operator is ``f -> int_B f(y) / (4 pi |x - y|) dy`` on a
ball of radius ``R``.  It commutes with rotations, so it splits by
spherical-harmonic degree ``l``.  For ``f = g(r) Y_lm`` it acts on the radial
profile through the kernel ``r_<^l / r_>^(l+1) / (2l + 1)`` with measure
``s^2 ds``.  Each block is discretised with the even-polynomial Galerkin
basis ``b_j(r) = (r/R)^l P_j(2 (r/R)^2 - 1)``; all matrix entries are
polynomial integrals, so nested Gauss-Legendre quadrature is exact.

For ``l = 0`` the eigenfunctions are ``sin(k r)/r`` with ``cos(k R) = 0`` and
eigenvalue ``1/k^2``; this closed form is :func:`radial_eigenvalue_exact`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import eval_legendre, sph_harm_y

DEFAULT_MAX_DEGREE = 4
DEFAULT_RADIAL = 6


def radial_eigenvalue_exact(n: int, radius: float = 1.0) -> float:
    """``n``-th (1-based) radial eigenvalue: ``(R / k)^2`` with ``k = (n - 1/2) pi``."""
    k = (n - 0.5) * math.pi
    return (radius / k) ** 2


def radial_overlap_exact(n: int, radius: float = 1.0) -> float:
    """``<1, e_n>`` for the normalised ``n``-th radial eigenfunction (positive sign)."""
    k = (n - 0.5) * math.pi
    # e = A sin(k r / R) / r, A^2 = 1 / (2 pi R); int_B e = 4 pi A R^2 sin(k) / k^2
    A = 1.0 / math.sqrt(2.0 * math.pi * radius)
    return abs(4.0 * math.pi * A * radius**2 * math.sin(k) / k**2)


def _basis(l: int, J: int, r: np.ndarray, radius: float) -> np.ndarray:
    """``[q, j] = (r/R)^l P_j(2 (r/R)^2 - 1)``."""
    t = r / radius
    return np.stack([t**l * eval_legendre(j, 2.0 * t * t - 1.0) for j in range(J)], axis=1)


def degree_block(l: int, J: int, radius: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Galerkin stiffness ``K`` and Gram ``G`` of the degree-``l`` radial block."""
    order = l + 2 * J + 4
    t, w = np.polynomial.legendre.leggauss(order)
    r = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * w
    B = _basis(l, J, r, radius)
    gram = (B * (wr * r * r)[:, None]).T @ B
    # inner[q, j] = int_0^{r_q} s^(l+2) b_j(s) ds
    s = 0.5 * r[:, None] * (t[None, :] + 1.0)
    ws = 0.5 * r[:, None] * w[None, :]
    Bs = _basis(l, J, s.ravel(), radius).reshape(order, order, J)
    inner = np.einsum("qp,qpj->qj", ws * s ** (l + 2), Bs)
    outer = B * (wr * r * r * r ** (-(l + 1)))[:, None]
    X = outer.T @ inner / (2 * l + 1)
    return X + X.T, gram


@dataclass(frozen=True)
class NewtonianSpectrum:
    """Eigenpairs of the ball Newtonian operator, one entry per ``(l, n)`` block pair.

    Attributes
    ----------
    radius : float
        Ball radius the spectrum was computed on.
    eigenvalues : ndarray
        Descending eigenvalues ``lambda_n``.
    degrees : ndarray of int
        Spherical-harmonic degree ``l`` of each entry (multiplicity ``2l+1``).
    radial_coeffs : ndarray, shape (n_modes, n_radial)
        Coefficients of the normalised radial profile in the Galerkin basis.
    overlaps : ndarray
        ``<1, e_n>_{L^2(B)}`` (zero for ``l >= 1``), radial sign fixed positive.
    residuals : ndarray
        Relative generalised-eigenproblem residuals.
    """

    radius: float
    eigenvalues: np.ndarray
    degrees: np.ndarray
    radial_coeffs: np.ndarray
    overlaps: np.ndarray
    residuals: np.ndarray
    n_radial: int = DEFAULT_RADIAL
    max_degree: int = DEFAULT_MAX_DEGREE

    @property
    def radial_indices(self) -> np.ndarray:
        return np.flatnonzero(self.degrees == 0)

    def radial_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.radial_indices]

    def radial_overlaps(self) -> np.ndarray:
        return self.overlaps[self.radial_indices]

    def radial_profile(self, index: int, r: np.ndarray) -> np.ndarray:
        l = int(self.degrees[index])
        return _basis(l, self.n_radial, np.asarray(r, float), self.radius) @ self.radial_coeffs[index]

    def nonradial_overlaps_quadrature(self, order: int = 24) -> np.ndarray:
        """``max_m |int_B e_{n,l,m}|`` per non-radial entry, by full 3D quadrature."""
        t, w = np.polynomial.legendre.leggauss(order)
        r = 0.5 * self.radius * (t + 1.0)
        wr = 0.5 * self.radius * w * r * r
        ct, wt = np.polynomial.legendre.leggauss(order)
        theta = np.arccos(ct)
        nphi = 2 * order
        phi = 2.0 * math.pi * np.arange(nphi) / nphi
        wphi = np.full(nphi, 2.0 * math.pi / nphi)
        out = []
        for idx in np.flatnonzero(self.degrees > 0):
            l = int(self.degrees[idx])
            prof = self.radial_profile(idx, r) @ wr
            worst = 0.0
            for m in range(-l, l + 1):
                Y = real_spherical_harmonic(l, m, theta[:, None], phi[None, :])
                ang = np.einsum("a,b,ab->", wt, wphi, Y)
                worst = max(worst, abs(prof * ang))
            out.append(worst)
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "eigenvalues": self.eigenvalues.tolist(),
            "degrees": self.degrees.tolist(),
            "overlaps": self.overlaps.tolist(),
            "residuals": self.residuals.tolist(),
        }


def real_spherical_harmonic(l: int, m: int, theta, phi) -> np.ndarray:
    """Orthonormal real spherical harmonic (polar angle ``theta``, azimuth ``phi``)."""
    Y = sph_harm_y(l, abs(m), theta, phi)
    if m > 0:
        return math.sqrt(2.0) * (-1) ** m * Y.real
    if m < 0:
        return math.sqrt(2.0) * (-1) ** m * Y.imag
    return Y.real


def solve_ball_spectrum(
    n_radial: int = DEFAULT_RADIAL,
    max_degree: int = DEFAULT_MAX_DEGREE,
    radius: float = 1.0,
    residual_tol: float = 1e-8,
) -> NewtonianSpectrum:
    """Galerkin eigenpairs of the ball Newtonian operator, blockwise in degree."""
    if n_radial < 2:
        raise ValueError("need at least 2 radial basis functions")
    lams, degs, coefs, ovl, res = [], [], [], [], []
    for l in range(max_degree + 1):
        K, G = degree_block(l, n_radial, radius)
        vals, vecs = eigh(K, G)
        for i in range(n_radial):
            v = vecs[:, i]
            r = np.linalg.norm(K @ v - vals[i] * (G @ v)) / max(np.linalg.norm(K @ v), 1e-300)
            if l == 0:
                # int_B e = sqrt(4 pi) int_0^R g(r) r^2 dr
                mass = math.sqrt(4.0 * math.pi) * (G[0] @ v)
                if mass < 0:
                    v = -v
                    mass = -mass
            else:
                mass = 0.0
            lams.append(vals[i])
            degs.append(l)
            coefs.append(v)
            ovl.append(mass)
            res.append(r)
    lams = np.array(lams)
    if np.any(lams <= 0):
        raise np.linalg.LinAlgError("non-positive Newtonian eigenvalue: refine the radial basis")
    res = np.array(res)
    order = np.argsort(-lams, kind="stable")
    top = order[: max(1, len(order) // 2)]
    if np.any(res[top] > residual_tol):
        raise np.linalg.LinAlgError(f"eigensolve residual {res[top].max():.3g} above {residual_tol}")
    return NewtonianSpectrum(
        radius=radius,
        eigenvalues=lams[order],
        degrees=np.array(degs)[order],
        radial_coeffs=np.array(coefs)[order],
        overlaps=np.array(ovl)[order],
        residuals=res[order],
        n_radial=n_radial,
        max_degree=max_degree,
    )


# ---------------------------------------------------------------------------
# Resonance and scattering coefficient
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceParams:
    """Droplet material constants tuned near the ``n0`` resonance.

    Attributes
    ----------
    n0 : int
        0-based index into the radial modes of the spectrum.
    c_n0 : float
        Negative detuning constant.
    k0, rho1 : float
        Droplet bulk-modulus scale and density; ``k1 = k0 a^2``.
    a, h : float
        Radius scale and dilution exponent.
    """

    n0: int
    c_n0: float
    k0: float
    rho1: float
    a: float
    h: float
    lambda_B: float
    overlap: float
    n2_sup: float = 1.0
    separation: float = field(default=math.inf)

    @property
    def k1(self) -> float:
        return self.k0 * self.a**2

    @property
    def omega0_sq(self) -> float:
        return self.k0 / (self.rho1 * self.lambda_B)

    @property
    def omega_sq(self) -> float:
        return (self.k0 - self.c_n0 * self.a**self.h) / (self.rho1 * self.lambda_B)

    @property
    def omega(self) -> float:
        return math.sqrt(self.omega_sq)

    @property
    def P_sq(self) -> float:
        return -self.k0 * self.overlap**2 / (self.lambda_B * self.c_n0)

    @property
    def P(self) -> float:
        return math.sqrt(self.P_sq)

    @property
    def coupling(self) -> float:
        """``omega^2 rho1 / k1``, the droplet-interior coupling constant."""
        return self.omega_sq * self.rho1 / self.k1

    def dispersion_residual(self) -> float:
        lam = self.a**2 * self.lambda_B
        return self.k1 - self.omega_sq * self.rho1 * lam - self.c_n0 * self.a ** (2.0 + self.h)

    def to_dict(self) -> dict:
        return {
            "n0": self.n0,
            "c_n0": self.c_n0,
            "k0": self.k0,
            "rho1": self.rho1,
            "a": self.a,
            "h": self.h,
            "lambda_B": self.lambda_B,
            "overlap": self.overlap,
            "omega0_sq": self.omega0_sq,
            "omega_sq": self.omega_sq,
            "P_sq": self.P_sq,
            "separation": self.separation,
        }


def admissible_c_window(spectrum: NewtonianSpectrum, n0: int, rho1: float = 1.0, n2_sup: float = 1.0) -> tuple[float, float]:
    """Open interval for ``c_n0``: keeps ``P^2 > omega0^2 sup n^2``."""
    ov = spectrum.radial_overlaps()[n0]
    return -rho1 * ov**2 / n2_sup, 0.0


def make_resonance(
    spectrum: NewtonianSpectrum,
    n0: int = 0,
    c_n0: float = -1.0,
    k0: float = 1.0,
    rho1: float = 1.0,
    a: float = 0.05,
    h: float = 0.5,
    n2_sup: float = 1.0,
    min_separation: float = 1e-2,
) -> ResonanceParams:
    """Resonance parameters with the frequency placed by the dispersion identity."""
    if not c_n0 < 0.0:
        raise ValueError(f"detuning c_n0 must be negative (got {c_n0}); the effective P^2 needs c_n0 < 0")
    if not a > 0.0 or not (0.0 <= h < 1.0):
        raise ValueError("need a > 0 and 0 <= h < 1")
    if k0 <= 0 or rho1 <= 0:
        raise ValueError("k0 and rho1 must be positive")
    radial = spectrum.radial_indices
    if not 0 <= n0 < len(radial):
        raise IndexError(f"radial mode {n0} not in the computed spectrum")
    lo, _ = admissible_c_window(spectrum, n0, rho1, n2_sup)
    if not c_n0 > lo:
        raise ValueError(f"c_n0 = {c_n0} below the admissible window ({lo:.4g}, 0): P^2 would not exceed omega0^2 sup n^2")
    lam = float(spectrum.eigenvalues[radial[n0]])
    params = ResonanceParams(
        n0=n0, c_n0=c_n0, k0=k0, rho1=rho1, a=a, h=h, lambda_B=lam,
        overlap=float(spectrum.overlaps[radial[n0]]), n2_sup=n2_sup,
    )
    # |k1 - omega^2 rho1 lambda_n| / a^2 for n != n0 (all degrees)
    others = np.delete(spectrum.eigenvalues, radial[n0])
    sep = float(np.min(np.abs(k0 - params.omega_sq * rho1 * others))) if others.size else math.inf
    if sep < min_separation:
        raise ValueError(f"another Newtonian mode is resonant: separation {sep:.3g} < {min_separation}")
    return ResonanceParams(**{**params.__dict__, "separation": sep})


@dataclass(frozen=True)
class AlphaResult:
    """Scattering coefficient and its split into leading term and tail."""

    alpha: float
    dominant: float
    resonant_term: float
    tail: float
    terms: np.ndarray


def scattering_alpha(params: ResonanceParams, spectrum: NewtonianSpectrum, n_terms: int | None = None) -> AlphaResult:
    """Spectral sum ``sum_n <1, e_n>^2 omega^2 rho1 / (k1 - omega^2 rho1 lambda_n)`` on ``a B``.

    ``dominant`` is the leading-order value ``-P^2 a^(1-h)``; ``tail = alpha - dominant``.
    ``resonant_term`` is the exact ``n0`` summand.
    """
    radial = spectrum.radial_indices
    if n_terms is None:
        n_terms = len(radial)
    if n_terms > len(radial):
        raise ValueError(f"n_terms = {n_terms} exceeds the {len(radial)} computed radial modes")
    a = params.a
    lam = a**2 * spectrum.eigenvalues[radial[:n_terms]]
    ov2 = a**3 * spectrum.overlaps[radial[:n_terms]] ** 2
    w2r = params.omega_sq * params.rho1
    denom = params.k1 - w2r * lam
    if np.any(np.abs(denom) < 1e-14 * params.k1):
        raise ZeroDivisionError("resonance separation violated")
    terms = ov2 * w2r / denom
    alpha = float(terms.sum())
    dominant = -params.P_sq * a ** (1.0 - params.h)
    return AlphaResult(alpha=alpha, dominant=dominant, resonant_term=float(terms[params.n0]), tail=alpha - dominant, terms=terms)


def alpha_bar(params: ResonanceParams, spectrum: NewtonianSpectrum) -> float:
    """Rescaled coefficient ``alpha / a^(1-h)`` used by the point-interaction system."""
    return scattering_alpha(params, spectrum).alpha / params.a ** (1.0 - params.h)


# ---------------------------------------------------------------------------
# Ball-adapted Galerkin basis (used by the droplet-resolved forward oracle)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallBasis:
    """Polynomial-times-harmonic basis ``b_i(rho) Y_lm`` and a product quadrature on the unit ball.

    Attributes
    ----------
    nodes, weights : quadrature on the unit ball (weights include ``r^2``)
    values : ndarray, shape (n_nodes, n_basis)
        Basis values at the nodes.
    gram, newtonian : ndarray, shape (n_basis, n_basis)
        Exact Gram matrix and exact free-space Newtonian matrix on the unit ball.
    moments : ndarray
        ``int_B chi`` of every basis function.
    """

    max_degree: int
    n_radial: int
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    gram: np.ndarray
    newtonian: np.ndarray
    moments: np.ndarray
    radial_order: int = 6
    angular_order: int = 5

    def refined(self) -> "BallBasis":
        return ball_basis(self.max_degree, self.n_radial + 1, self.radial_order + 2, self.angular_order + 1)

    @property
    def size(self) -> int:
        return self.values.shape[1]


def ball_basis(max_degree: int = 2, n_radial: int = 4, radial_order: int = 6, angular_order: int = 5) -> BallBasis:
    """Assemble the unit-ball basis; radial blocks use the exact degree blocks."""
    t, w = np.polynomial.legendre.leggauss(radial_order)
    r = 0.5 * (t + 1.0)
    wr = 0.5 * w * r * r
    ct, wt = np.polynomial.legendre.leggauss(angular_order)
    nphi = 2 * angular_order
    phi = 2.0 * math.pi * (np.arange(nphi) + 0.5) / nphi
    R, CT, PH = np.meshgrid(r, ct, phi, indexing="ij")
    W = (wr[:, None, None] * wt[None, :, None] * np.full(nphi, 2.0 * math.pi / nphi)[None, None, :]).ravel()
    theta = np.arccos(CT.ravel())
    st = np.sin(theta)
    nodes = np.stack([R.ravel() * st * np.cos(PH.ravel()), R.ravel() * st * np.sin(PH.ravel()), R.ravel() * CT.ravel()], axis=1)
    cols, grams, newts, moms = [], [], [], []
    for l in range(max_degree + 1):
        K, G = degree_block(l, n_radial, 1.0)
        radial = _basis(l, n_radial, R.ravel(), 1.0)
        for m in range(-l, l + 1):
            Y = real_spherical_harmonic(l, m, theta, PH.ravel())
            cols.append(radial * Y[:, None])
            grams.append(G)
            newts.append(K)
            if l == 0:
                moms.append(math.sqrt(4.0 * math.pi) * G[0])
            else:
                moms.append(np.zeros(n_radial))
    from scipy.linalg import block_diag

    return BallBasis(
        max_degree=max_degree,
        n_radial=n_radial,
        nodes=nodes,
        weights=W,
        values=np.concatenate(cols, axis=1),
        gram=block_diag(*grams),
        newtonian=block_diag(*newts),
        moments=np.concatenate(moms),
        radial_order=radial_order,
        angular_order=angular_order,
    )
