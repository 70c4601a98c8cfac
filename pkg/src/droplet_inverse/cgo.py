"""Complex geometrical optics (CGO) solutions and Fourier reconstruction of ``n^2``.

For a target frequency ``l`` we set ``eta = -l`` and pick a complex null vector
``xi`` (``xi.xi = 0``, ``xi.eta = 0``).  The pair::

    q^f = exp(i xi.x) (exp(i eta.x) + r1),    q^g = exp(-i xi.x) (1 + r2)

solves ``(Laplace - P^2) q = 0`` when the remainders satisfy

    (Laplace + 2i xi.grad - P^2) r1 = (|eta|^2 + P^2) exp(i eta.x),
    (-Laplace + 2i xi.grad + P^2) r2 = -P^2 .

Both are solved by Fourier division on the period cell ``[0, 2pi]^3`` over a
half-integer shifted lattice, which keeps the symbol away from zero by a
multiple of ``|xi|`` and yields the small remainder.  The right-hand sides are
multiplied by a smooth cutoff equal to one on ``Omega``, so the periodic
solution restricted to ``Omega`` solves the equation there.

Since ``q^f q^g = (exp(i eta.x) + r1)(1 + r2)``, the large exponentials cancel
in every quantity we need and nothing overflows even for ``|xi| ~ 1e6``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .geometry import OMEGA_HI, OMEGA_LO, OMEGA_VOLUME
from .kernels import MediumSpec
from .spectral import SHIFT_CANDIDATES, FACE_AXES, TorusField, cosine_norms, gauss_legendre, torus_wavevectors

log = logging.getLogger(__name__)

INVARIANT_TOL = 1e-12
RESIDUAL_TOL = 1e-5
SYMBOL_FLOOR = 1e-3
K_MAX = 96
CUTOFF_EDGE = math.pi / 4
CUTOFF_WIDTH = math.pi / 24
CUTOFF_GRID = 1024


class CGOError(RuntimeError):
    """Raised when a CGO remainder cannot be built at the requested accuracy."""


# ---------------------------------------------------------------------------
# Null vectors
# ---------------------------------------------------------------------------


def _xi_formula(ell: np.ndarray) -> np.ndarray:
    """Unscaled vector with ``l2^2 + l3^2 > 0``; third component has the ``+|l| l2`` sign."""
    l1, l2, l3 = ell
    n = math.sqrt(float(ell @ ell))
    return np.array(
        [
            -1j * (l2 * l2 + l3 * l3),
            -n * l3 + 1j * l1 * l2,
            n * l2 + 1j * l1 * l3,
        ]
    )


def check_null_vector(xi: np.ndarray, ell: np.ndarray, expected_norm: float | None = None, tol: float = INVARIANT_TOL) -> None:
    """Raise if ``xi.xi``, ``xi.l`` or ``|xi|`` miss their targets (relative to ``|xi|^2``, ``|xi||l|``)."""
    xi = np.asarray(xi, complex)
    ell = np.asarray(ell, float)
    nx = float(np.linalg.norm(xi))
    if abs(xi @ xi) > tol * nx * nx:
        raise AssertionError(f"xi.xi = {xi @ xi:.3g} is not zero")
    nl = float(np.linalg.norm(ell))
    if nl > 0 and abs(xi @ ell) > tol * nx * nl:
        raise AssertionError(f"xi.l = {xi @ ell:.3g} is not zero")
    if expected_norm is not None and abs(nx - expected_norm) > tol * expected_norm:
        raise AssertionError(f"|xi| = {nx:.16g}, expected {expected_norm:.16g}")


def make_xi(ell, P: float, varsigma: float) -> np.ndarray:
    """Complex null vector orthogonal to ``l`` with ``|xi| = P^(2+s) |l|^(3+s)``.

    When ``l2 = l3 = 0`` the coordinates are cycled so the formula applies;
    ``l = 0`` gets the fixed vector ``P^(2+s)/sqrt(2) (-i, -1, 0)``.
    """
    ell = np.asarray(ell, dtype=float).reshape(3)
    if not P > 0 or not varsigma > 0:
        raise ValueError("P and varsigma must be positive")
    scale = P ** (2.0 + varsigma)
    if not np.any(ell):
        xi = scale / math.sqrt(2.0) * np.array([-1j, -1.0, 0.0])
        check_null_vector(xi, ell, scale)
        return xi
    perm = np.arange(3)
    if ell[1] == 0 and ell[2] == 0:
        perm = np.array([1, 2, 0])  # l = (a, 0, 0) -> (0, 0, a)
    lp = ell[perm]
    s23 = math.sqrt(lp[1] ** 2 + lp[2] ** 2)
    nl = math.sqrt(float(ell @ ell))
    pref = scale * nl ** (2.0 + varsigma) / (math.sqrt(2.0) * s23)
    xi = np.empty(3, complex)
    xi[perm] = pref * _xi_formula(lp)
    check_null_vector(xi, ell, scale * nl ** (3.0 + varsigma))
    return xi


def printed_xi(ell, P: float, varsigma: float) -> np.ndarray:
    """The formula with the opposite third-component sign (``-|l| l2``), for comparison."""
    ell = np.asarray(ell, dtype=float).reshape(3)
    l1, l2, l3 = ell
    n = math.sqrt(float(ell @ ell))
    s23 = math.sqrt(l2 * l2 + l3 * l3)
    pref = P ** (2.0 + varsigma) * n ** (2.0 + varsigma) / (math.sqrt(2.0) * s23)
    return pref * np.array([-1j * (l2 * l2 + l3 * l3), -n * l3 + 1j * l1 * l2, -n * l2 + 1j * l1 * l3])


# ---------------------------------------------------------------------------
# Cutoff and periodic right-hand sides
# ---------------------------------------------------------------------------


def cutoff_1d(x: np.ndarray) -> np.ndarray:
    """Smooth periodic window on ``[0, 2pi]``: one on ``Omega`` and zero at the cell edges (to 1e-16)."""
    x = np.asarray(x, float)
    a, b = CUTOFF_EDGE, 2.0 * math.pi - CUTOFF_EDGE
    return 0.5 * (erf((x - a) / CUTOFF_WIDTH) - erf((x - b) / CUTOFF_WIDTH))


def windowed_exponential_1d(freq: float, shift: float, K: int) -> np.ndarray:
    """``(2pi)^(-1/2) int_0^{2pi} w(x) exp(i (freq - k - shift) x) dx`` for ``k = -K..K``."""
    n = CUTOFF_GRID
    while n < 4 * K + 64:
        n *= 2
    x = 2.0 * math.pi * np.arange(n) / n
    g = cutoff_1d(x) * np.exp(1j * (freq - shift) * x)
    F = np.fft.fft(g) * (2.0 * math.pi / n)
    k = np.arange(-K, K + 1)
    return F[k % n] / math.sqrt(2.0 * math.pi)


def windowed_exponential(freq: np.ndarray, shift: np.ndarray, K: int) -> np.ndarray:
    """Torus coefficients of ``w(x) exp(i freq.x)`` (separable)."""
    b = [windowed_exponential_1d(float(freq[i]), float(shift[i]), K) for i in range(3)]
    return np.einsum("i,j,k->ijk", b[0], b[1], b[2])


def medium_exponential_coeffs(medium: MediumSpec) -> np.ndarray:
    """``a_m`` with ``n^2(x) = sum_m a_m exp(i m.x)``, ``|m|_inf <= band`` (cube of side ``2B+1``)."""
    B = medium.band
    c = cosine_norms(B)
    T = np.zeros((B + 1, 2 * B + 1), complex)
    for k in range(B + 1):
        if k == 0:
            T[0, B] = c[0]
        else:
            T[k, B + k] += 0.5 * c[k] * np.exp(-1j * k * OMEGA_LO)
            T[k, B - k] += 0.5 * c[k] * np.exp(1j * k * OMEGA_LO)
    a = np.einsum("ia,jb,kc,ijk->abc", T, T, T, medium.coeffs)
    a[B, B, B] += medium.offset
    return a


def box_integral_1d(d: np.ndarray) -> np.ndarray:
    """``int_{pi/2}^{3pi/2} exp(i d x) dx``."""
    d = np.asarray(d, float)
    out = np.full(d.shape, math.pi, dtype=complex)
    nz = d != 0
    out[nz] = (np.exp(1j * d[nz] * OMEGA_HI) - np.exp(1j * d[nz] * OMEGA_LO)) / (1j * d[nz])
    return out


def box_fourier_coefficient(medium: MediumSpec, ell) -> complex:
    """``(2pi)^-3 int_Omega n^2 exp(-i l.x) dx`` in closed form."""
    ell = np.asarray(ell, float)
    a = medium_exponential_coeffs(medium)
    B = medium.band
    m = np.arange(-B, B + 1, dtype=float)
    I = [box_integral_1d(m - ell[i]) for i in range(3)]
    return complex(np.einsum("a,b,c,abc->", I[0], I[1], I[2], a)) / (2.0 * math.pi) ** 3


def _convolve_medium(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Coefficients of ``n^2 f`` truncated to the lattice of ``f``."""
    B = (a.shape[0] - 1) // 2
    n = c.shape[0]
    pad = np.zeros((n + 2 * B,) * 3, complex)
    pad[B : B + n, B : B + n, B : B + n] = c
    out = np.zeros_like(c)
    for m in np.argwhere(a != 0):
        d = m - B
        out += a[tuple(m)] * pad[B - d[0] : B - d[0] + n, B - d[1] : B - d[1] + n, B - d[2] : B - d[2] + n]
    return out


# ---------------------------------------------------------------------------
# Remainders
# ---------------------------------------------------------------------------


def symbol_r1(K: int, shift: np.ndarray, xi: np.ndarray, P: float) -> np.ndarray:
    """Symbol of ``Laplace + 2i xi.grad - P^2``: ``-|v|^2 - 2 xi.v - P^2``."""
    v1, v2, v3 = torus_wavevectors(K, shift)
    return -(v1 * v1 + v2 * v2 + v3 * v3) - 2.0 * (xi[0] * v1 + xi[1] * v2 + xi[2] * v3) - P * P


def symbol_r2(K: int, shift: np.ndarray, xi: np.ndarray, P: float) -> np.ndarray:
    """Symbol of ``-Laplace + 2i xi.grad + P^2``: ``|v|^2 - 2 xi.v + P^2``."""
    v1, v2, v3 = torus_wavevectors(K, shift)
    return (v1 * v1 + v2 * v2 + v3 * v3) - 2.0 * (xi[0] * v1 + xi[1] * v2 + xi[2] * v3) + P * P


def select_shift(symbol_fn, K: int, xi: np.ndarray, P: float) -> tuple[np.ndarray, float]:
    """Nonzero shift maximising the minimum symbol modulus over the truncated lattice.

    The score ``min |symbol| / |xi|`` is compared at two significant digits;
    near-ties are broken towards more shifted axes, which keeps the choice
    independent of ``P`` and ``K``.
    """
    nxi = float(np.linalg.norm(xi))
    scored = []
    for s in SHIFT_CANDIDATES:
        m = float(np.abs(symbol_fn(K, s, xi, P)).min())
        score = float(f"{m / nxi:.2g}") if nxi > 0 else m
        scored.append((score, int(np.count_nonzero(s)), -len(scored), m, s))
    best = max(scored, key=lambda t: t[:3])
    return best[4], best[3]


@dataclass(frozen=True)
class Remainder:
    """Torus solution of a remainder equation plus its a-posteriori diagnostics."""

    field: TorusField
    residual: float
    l2_norm: float
    min_symbol: float
    K: int


def omega_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    return gauss_legendre(n)


def _quadrature_order(K: int) -> int:
    # fields carry frequencies up to K on an interval of length pi
    return int(min(max(K, 24), 64))


def _collocation_points() -> np.ndarray:
    return np.linspace(OMEGA_LO, OMEGA_HI, 7)


def _l2_on_omega(field: TorusField, n: int) -> float:
    x, w = omega_nodes(n)
    v = field.evaluate_grid(x, x, x)
    W = np.einsum("a,b,c->abc", w, w, w)
    return float(math.sqrt(np.sum(W * np.abs(v) ** 2)))


def _residual(field: TorusField, symbol: np.ndarray, rhs_fn) -> float:
    x = _collocation_points()
    applied = field.apply_symbol(symbol).evaluate_grid(x, x, x)
    rhs = rhs_fn(x[:, None, None], x[None, :, None], x[None, None, :])
    rhs = np.broadcast_to(rhs, applied.shape)
    return float(np.abs(applied - rhs).max() / max(np.abs(rhs).max(), 1e-300))


def _initial_K(ell: np.ndarray, P: float) -> int:
    return int(4 * max(np.abs(ell).max(initial=0.0), P, 1.0))


def _solve_remainder(
    xi, P, symbol_fn, rhs_coeffs_fn, rhs_fn, K0, shift, tol, symbol_floor, K_max
) -> Remainder:
    xi = np.asarray(xi, complex)
    nxi = float(np.linalg.norm(xi))
    K = int(K0)
    while True:
        if shift is None:
            s, smin = select_shift(symbol_fn, K, xi, P)
        else:
            s = np.asarray(shift, float)
            smin = float(np.abs(symbol_fn(K, s, xi, P)).min())
        if smin < symbol_floor * nxi:
            raise CGOError(f"no admissible shift at K={K}: min |symbol| {smin:.3g} < {symbol_floor:g} |xi|")
        sym = symbol_fn(K, s, xi, P)
        fld = TorusField(rhs_coeffs_fn(K, s) / sym, s)
        res = _residual(fld, sym, rhs_fn)
        if res <= tol or K >= K_max:
            break
        K = min(K + int(K0), K_max)
    if res > tol:
        raise CGOError(f"remainder residual {res:.3g} above {tol:g} at K={K}")
    return Remainder(field=fld, residual=res, l2_norm=_l2_on_omega(fld, _quadrature_order(K)), min_symbol=smin, K=K)


def solve_r1(
    ell,
    xi: np.ndarray,
    P: float,
    K: int | None = None,
    shift: np.ndarray | None = None,
    tol: float = RESIDUAL_TOL,
    symbol_floor: float = SYMBOL_FLOOR,
    K_max: int = K_MAX,
) -> Remainder:
    """Remainder ``r1`` for ``eta = -l``, refined until the residual on ``Omega`` is below ``tol``."""
    eta = -np.asarray(ell, float).reshape(3)
    amp = float(eta @ eta) + P * P

    def coeffs(Kc, s):
        return amp * windowed_exponential(eta, s, Kc)

    def rhs(x1, x2, x3):
        return amp * np.exp(1j * (eta[0] * x1 + eta[1] * x2 + eta[2] * x3))

    return _solve_remainder(xi, P, symbol_r1, coeffs, rhs, K or _initial_K(eta, P), shift, tol, symbol_floor, K_max)


def solve_r2(
    xi: np.ndarray,
    P: float,
    K: int | None = None,
    shift: np.ndarray | None = None,
    tol: float = RESIDUAL_TOL,
    symbol_floor: float = SYMBOL_FLOOR,
    K_max: int = K_MAX,
) -> Remainder:
    """Remainder ``r2`` (constant right-hand side ``-P^2``)."""

    def coeffs(Kc, s):
        return -P * P * windowed_exponential(np.zeros(3), s, Kc)

    def rhs(x1, x2, x3):
        return np.full(np.broadcast_shapes(x1.shape, x2.shape, x3.shape), -P * P, dtype=complex)

    return _solve_remainder(xi, P, symbol_r2, coeffs, rhs, K or _initial_K(np.zeros(3), P), shift, tol, symbol_floor, K_max)


@dataclass(frozen=True)
class CGOTriple:
    """Null vector and both remainders for one target frequency ``l``."""

    ell: tuple[int, int, int]
    varsigma: float
    P: float
    xi: np.ndarray
    r1: Remainder
    r2: Remainder

    @property
    def eta(self) -> np.ndarray:
        return -np.asarray(self.ell, float)

    @property
    def xi_norm(self) -> float:
        return float(np.linalg.norm(self.xi))

    def r1_bound_ratio(self) -> float:
        """``|r1| |xi| / ((|eta|^2 + P^2) |Omega|^(1/2))``."""
        eta = self.eta
        return self.r1.l2_norm * self.xi_norm / ((float(eta @ eta) + self.P**2) * math.sqrt(OMEGA_VOLUME))

    def r2_bound_ratio(self) -> float:
        """``|r2| |xi| / (P^2 |Omega|^(1/2))``."""
        return self.r2.l2_norm * self.xi_norm / (self.P**2 * math.sqrt(OMEGA_VOLUME))

    def error_scale(self) -> float:
        """``(|eta|^2 + P^2) / |xi|``."""
        eta = self.eta
        return (float(eta @ eta) + self.P**2) / self.xi_norm

    def product(self, points: np.ndarray) -> np.ndarray:
        """``(exp(i eta.x) + r1)(1 + r2)`` at points, i.e. ``q^f q^g``."""
        p = np.atleast_2d(points)
        e = np.exp(1j * p @ self.eta)
        return (e + self.r1.field.evaluate(p)) * (1.0 + self.r2.field.evaluate(p))

    def q_f(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.exp(1j * p @ self.xi) * (np.exp(1j * p @ self.eta) + self.r1.field.evaluate(p))

    def q_g(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.exp(-1j * p @ self.xi) * (1.0 + self.r2.field.evaluate(p))


def build_cgo(ell, P: float, varsigma: float, K: int | None = None, xi: np.ndarray | None = None, **kw) -> CGOTriple:
    ell_t = tuple(int(v) for v in np.asarray(ell).reshape(3))
    if xi is None:
        xi = make_xi(ell_t, P, varsigma)
    r1 = solve_r1(ell_t, xi, P, K=K, **kw)
    r2 = solve_r2(xi, P, K=K, **kw)
    return CGOTriple(ell=ell_t, varsigma=float(varsigma), P=float(P), xi=np.asarray(xi, complex), r1=r1, r2=r2)


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------


def oracle_integral(triple: CGOTriple, medium: MediumSpec, order: int | None = None) -> complex:
    """``int_Omega n^2 q^f q^g dx`` by tensor Gauss quadrature."""
    n = order or _quadrature_order(max(triple.r1.K, triple.r2.K))
    x, w = omega_nodes(n)
    eta = triple.eta
    e = np.einsum("a,b,c->abc", *(np.exp(1j * eta[i] * x) for i in range(3)))
    r1 = triple.r1.field.evaluate_grid(x, x, x)
    r2 = triple.r2.field.evaluate_grid(x, x, x)
    n2 = medium.evaluate_grid(x, x, x)
    W = np.einsum("a,b,c->abc", w, w, w)
    return complex(np.sum(W * n2 * (e + r1) * (1.0 + r2)))


def _face_values(coeffs: np.ndarray, shift: np.ndarray, axis: int, x0: float, t: np.ndarray, normal_derivative: bool = False):
    """Values (or ``d/dx_axis``) of a torus field on the plane ``x_axis = x0`` over a tensor grid ``t x t``."""
    K = (coeffs.shape[0] - 1) // 2
    k = np.arange(-K, K + 1, dtype=float)
    v = [k + shift[i] for i in range(3)]
    e0 = np.exp(1j * v[axis] * x0)
    if normal_derivative:
        e0 = e0 * (1j * v[axis])
    c2 = np.tensordot(e0, coeffs, axes=(0, axis))
    a1, a2 = FACE_AXES[axis]
    E1 = np.exp(1j * np.multiply.outer(t, v[a1]))
    E2 = np.exp(1j * np.multiply.outer(t, v[a2]))
    return (2.0 * math.pi) ** -1.5 * (E1 @ c2 @ E2.T)


def particular_w(triple: CGOTriple, medium: MediumSpec) -> TorusField:
    """``V`` with ``W_p = exp(i xi.x) V`` solving ``(Laplace - P^2) W_p = -n^2 q^f`` on ``Omega``."""
    r1 = triple.r1.field
    K, s = r1.K, r1.shift
    F = windowed_exponential(triple.eta, s, K) + r1.coeffs
    rhs = -_convolve_medium(medium_exponential_coeffs(medium), F)
    return TorusField(rhs / symbol_r1(K, s, triple.xi, triple.P), s)


def measurement_integral(triple: CGOTriple, medium: MediumSpec, order: int | None = None) -> complex:
    """``<W^{q^f}, d_nu q^g>_{dOmega}`` from the Cauchy data of the particular solution.

    With ``W = W_p + H``, ``H`` being ``(Laplace - P^2)``-harmonic with Neumann data
    ``-d_nu W_p``, Green's identity gives ``<H, d_nu q^g> = -<d_nu W_p, q^g>``.
    The pairing is therefore ``int_{dOmega} W_p d_nu q^g - d_nu W_p q^g``, whose
    integrand ``V d_nu r2 - d_nu V (1 + r2) - 2i xi_nu V (1 + r2)`` is free of
    exponential factors.
    """
    V = particular_w(triple, medium)
    if triple.r1.field.K != V.K:
        raise ValueError("inconsistent lattices")
    r2 = triple.r2.field
    n = order or _quadrature_order(max(V.K, r2.K))
    t, w = omega_nodes(n)
    W2 = np.outer(w, w)
    total = 0.0 + 0.0j
    for axis in range(3):
        for side, x0 in ((0, OMEGA_LO), (1, OMEGA_HI)):
            sign = 1.0 if side else -1.0
            Vv = _face_values(V.coeffs, V.shift, axis, x0, t)
            dV = sign * _face_values(V.coeffs, V.shift, axis, x0, t, True)
            R = _face_values(r2.coeffs, r2.shift, axis, x0, t)
            dR = sign * _face_values(r2.coeffs, r2.shift, axis, x0, t, True)
            xi_n = sign * triple.xi[axis]
            integrand = Vv * dR - dV * (1.0 + R) - 2j * xi_n * Vv * (1.0 + R)
            total += np.sum(W2 * integrand)
    return complex(total)


def fourier_coefficient(
    ell, medium: MediumSpec, P: float, varsigma: float, mode: str = "oracle", K: int | None = None, triple: CGOTriple | None = None
) -> complex:
    """Approximation of ``(2pi)^-3 int_Omega n^2 exp(-i l.x) dx`` from one CGO pair."""
    if mode not in ("oracle", "measurement"):
        raise ValueError(f"unknown mode {mode!r}")
    if medium.is_zero:
        return 0.0j
    triple = triple or build_cgo(ell, P, varsigma, K=K)
    val = oracle_integral(triple, medium) if mode == "oracle" else measurement_integral(triple, medium)
    return val / (2.0 * math.pi) ** 3


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def frequency_set(L: int) -> list[tuple[int, int, int]]:
    r = range(-L, L + 1)
    return [(a, b, c) for a in r for b in r for c in r]


def synthesize(coeffs: dict, x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
    """``sum_l F(l) exp(i l.x)`` on a tensor grid."""
    L = max(max(abs(v) for v in ell) for ell in coeffs)
    C = np.zeros((2 * L + 1,) * 3, complex)
    for ell, v in coeffs.items():
        C[ell[0] + L, ell[1] + L, ell[2] + L] = v
    k = np.arange(-L, L + 1, dtype=float)
    E = [np.exp(1j * np.multiply.outer(np.asarray(x, float), k)) for x in (x1, x2, x3)]
    out = np.tensordot(E[0], C, axes=(1, 0))
    out = np.tensordot(out, E[1], axes=(1, 1))
    return np.tensordot(out, E[2], axes=(1, 1))


@dataclass
class ReconstructionResult:
    """Coefficient table, errors against the truth and the exact truncated synthesis.

    Attributes
    ----------
    coefficients, ideal : dict
        ``F(l)`` from the CGO pairs and in closed form.
    error_truth : float
        ``|n2_rec - n^2|_{L^2(Omega)} / |n^2|``; limited by the series truncation.
    error_ideal : float
        ``|n2_rec - n2_ideal| / |n^2|`` with ``n2_ideal`` the exact truncated series.
    truncation_floor : float
        ``|n2_ideal - n^2| / |n^2|``.
    """

    L: int
    P: float
    varsigma: float
    mode: str
    coefficients: dict = field(default_factory=dict)
    ideal: dict = field(default_factory=dict)
    per_ell: list = field(default_factory=list)
    error_truth: float = math.nan
    error_ideal: float = math.nan
    truncation_floor: float = math.nan

    def conjugate_symmetry_gap(self) -> float:
        scale = max(abs(v) for v in self.coefficients.values())
        gap = 0.0
        for ell, v in self.coefficients.items():
            m = tuple(-x for x in ell)
            gap = max(gap, abs(self.coefficients[m] - np.conj(v)))
        return gap / scale

    def grid(self, medium: MediumSpec, n: int = 9) -> dict:
        """Reconstruction and ground truth on a uniform grid inside ``Omega``."""
        x = np.linspace(OMEGA_LO, OMEGA_HI, n)
        return {
            "x": x,
            "reconstruction": synthesize(self.coefficients, x, x, x).real,
            "ideal": synthesize(self.ideal, x, x, x).real,
            "truth": medium.evaluate_grid(x, x, x),
        }

    def bound_ratios(self) -> tuple[np.ndarray, np.ndarray]:
        r1 = np.array([row["r1_ratio"] for row in self.per_ell])
        r2 = np.array([row["r2_ratio"] for row in self.per_ell])
        return r1, r2


def _coefficient_row(ell, medium, P, varsigma, mode, K):
    triple = build_cgo(ell, P, varsigma, K=K)
    F = fourier_coefficient(ell, medium, P, varsigma, mode=mode, triple=triple)
    ideal = box_fourier_coefficient(medium, ell)
    return {
        "ell": tuple(ell),
        "value": F,
        "ideal": ideal,
        "error": abs(F - ideal),
        "error_scale": triple.error_scale() / (2.0 * math.pi) ** 3,
        "xi_norm": triple.xi_norm,
        "r1_ratio": triple.r1_bound_ratio(),
        "r2_ratio": triple.r2_bound_ratio(),
        "r1_residual": triple.r1.residual,
        "r2_residual": triple.r2.residual,
        "K": max(triple.r1.K, triple.r2.K),
    }


def reconstruct(
    L: int,
    P: float,
    varsigma: float,
    medium: MediumSpec,
    mode: str = "oracle",
    threads: int = 1,
    K: int | None = None,
    quad_order: int = 24,
) -> ReconstructionResult:
    """Coefficients for ``|l|_inf <= L`` and the synthesised ``n^2`` with its L2 errors."""
    if L < 1:
        raise ValueError("L must be at least 1")
    ells = frequency_set(L)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: _coefficient_row(e, medium, P, varsigma, mode, K), ells))
    else:
        rows = [_coefficient_row(e, medium, P, varsigma, mode, K) for e in ells]
    res = ReconstructionResult(L=L, P=float(P), varsigma=float(varsigma), mode=mode)
    for row in rows:
        res.coefficients[row["ell"]] = row["value"]
        res.ideal[row["ell"]] = row["ideal"]
    res.per_ell = rows
    x, w = omega_nodes(quad_order)
    W = np.einsum("a,b,c->abc", w, w, w)
    rec = synthesize(res.coefficients, x, x, x)
    ideal = synthesize(res.ideal, x, x, x)
    truth = medium.evaluate_grid(x, x, x)

    def nrm(v):
        return float(math.sqrt(np.sum(W * np.abs(v) ** 2)))

    scale = nrm(truth)
    res.error_truth = nrm(rec - truth) / scale
    res.error_ideal = nrm(rec - ideal) / scale
    res.truncation_floor = nrm(ideal - truth) / scale
    log.info("reconstruct L=%d P=%g s=%g: error vs ideal %.3g", L, P, varsigma, res.error_ideal)
    return res
