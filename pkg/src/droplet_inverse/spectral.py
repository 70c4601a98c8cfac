"""Spectral bases on the cube and on the periodic cell.

Interior fields live in the orthonormal Neumann cosine basis of
``Omega = [pi/2, 3pi/2]^3``::

    psi_k(x) = prod_i c_{k_i} cos(k_i (x_i - pi/2)),   k in {0..N}^3,
    c_0 = 1/sqrt(pi),  c_k = sqrt(2/pi) for k >= 1,

so ``-Laplace psi_k = |k|^2 psi_k`` with zero normal derivative.  The
restriction of a cosine series to a face is again a (2D) cosine series, which
makes the trace exact.  Boundary fields are stored per face with discrete
``H^s`` weights ``(1 + |kappa|^2)^(s/2)``.

Faces are ordered ``(axis 0, low), (axis 0, high), (axis 1, low), ...`` and the
two tangential coordinates of a face are the remaining axes in increasing
order.

Torus fields are expansions over ``(2 pi)^(-3/2) exp(i (k + s) . x)`` on the
period cell ``[0, 2pi]^3`` with ``k`` in ``{-K..K}^3`` and a shift
``s in {0, 1/2}^3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import OMEGA_HI, OMEGA_LO

FACE_AXES = ((1, 2), (0, 2), (0, 1))
N_FACES = 6


def face_index(axis: int, side: int) -> int:
    return 2 * axis + side


def cosine_norms(N: int) -> np.ndarray:
    c = np.full(N + 1, math.sqrt(2.0 / math.pi))
    c[0] = 1.0 / math.sqrt(math.pi)
    return c


def cosine_1d(N: int, x: np.ndarray) -> np.ndarray:
    """Matrix ``[p, k] = c_k cos(k (x_p - pi/2))``."""
    u = np.asarray(x, dtype=float) - OMEGA_LO
    k = np.arange(N + 1)
    return np.cos(np.multiply.outer(u, k)) * cosine_norms(N)


def cosine_1d_derivative(N: int, x: np.ndarray) -> np.ndarray:
    u = np.asarray(x, dtype=float) - OMEGA_LO
    k = np.arange(N + 1)
    return -np.sin(np.multiply.outer(u, k)) * (cosine_norms(N) * k)


def face_values_1d(N: int) -> np.ndarray:
    """Values of the 1D modes at the two ends, shape (2, N+1)."""
    c = cosine_norms(N)
    return np.stack([c, c * (-1.0) ** np.arange(N + 1)])


@lru_cache(maxsize=16)
def wavenumbers_squared(N: int) -> np.ndarray:
    k = np.arange(N + 1)
    return (k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2).astype(float)


@lru_cache(maxsize=16)
def face_wavenumbers_squared(N: int) -> np.ndarray:
    k = np.arange(N + 1)
    return (k[:, None] ** 2 + k[None, :] ** 2).astype(float)


def gauss_legendre(n: int, lo: float = OMEGA_LO, hi: float = OMEGA_HI) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


@dataclass(frozen=True)
class SpectralField:
    """Coefficients over the orthonormal cosine modes of ``Omega``.

    Attributes
    ----------
    coeffs : ndarray, shape (N+1, N+1, N+1)
        Real or complex mode coefficients.
    """

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise ValueError(f"expected a cubic coefficient array, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def zeros(cls, N: int, dtype=float) -> "SpectralField":
        return cls(np.zeros((N + 1,) * 3, dtype=dtype))

    @classmethod
    def mode(cls, N: int, k: tuple[int, int, int], value: complex = 1.0) -> "SpectralField":
        c = np.zeros((N + 1,) * 3, dtype=np.result_type(value, float))
        c[k] = value
        return cls(c)

    @classmethod
    def from_flat(cls, flat: np.ndarray, N: int) -> "SpectralField":
        return cls(np.asarray(flat).reshape((N + 1,) * 3))

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def grad_energy(self) -> float:
        return float(np.sum(wavenumbers_squared(self.N) * np.abs(self.coeffs) ** 2))

    def h1_norm(self) -> float:
        return math.sqrt(self.l2_norm() ** 2 + self.grad_energy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs - other.coeffs)

    def scale(self, s: complex) -> "SpectralField":
        return SpectralField(self.coeffs * s)

    def resized(self, N: int) -> "SpectralField":
        """Zero-pad or truncate to truncation order ``N``."""
        out = np.zeros((N + 1,) * 3, dtype=self.coeffs.dtype)
        m = min(N, self.N) + 1
        out[:m, :m, :m] = self.coeffs[:m, :m, :m]
        return SpectralField(out)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return evaluate(self, points)

    def evaluate_grid(self, x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
        N = self.N
        out = np.einsum("ai,ijk->ajk", cosine_1d(N, x1), self.coeffs)
        out = np.einsum("bj,ajk->abk", cosine_1d(N, x2), out)
        return np.einsum("ck,abk->abc", cosine_1d(N, x3), out)


def evaluate(field: SpectralField, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Pointwise synthesis of a truncated cosine series at points of ``Omega``."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    if np.any(p < OMEGA_LO - tol) or np.any(p > OMEGA_HI + tol):
        raise ValueError("evaluation point outside Omega")
    N = field.N
    out = np.empty(p.shape[0], dtype=np.result_type(field.coeffs, float))
    chunk = 4096
    for s in range(0, p.shape[0], chunk):
        q = p[s : s + chunk]
        c1, c2, c3 = (cosine_1d(N, q[:, i]) for i in range(3))
        t = np.einsum("pi,ijk->pjk", c1, field.coeffs)
        t = np.einsum("pj,pjk->pk", c2, t)
        out[s : s + chunk] = np.einsum("pk,pk->p", c3, t)
    return out


def project(func, N: int, order: int | None = None) -> SpectralField:
    """Cosine coefficients of ``func(x1, x2, x3)`` (broadcast grid) by Gauss quadrature."""
    order = order or (2 * N + 10)
    x, w = gauss_legendre(order)
    vals = func(x[:, None, None], x[None, :, None], x[None, None, :])
    vals = np.broadcast_to(vals, (order,) * 3)
    B = cosine_1d(N, x) * w[:, None]
    c = np.einsum("ai,abc->ibc", B, vals)
    c = np.einsum("bj,ibc->ijc", B, c)
    c = np.einsum("ck,ijc->ijk", B, c)
    return SpectralField(c)


@dataclass(frozen=True)
class BoundaryField:
    """Per-face 2D cosine coefficients on the six faces of ``Omega``.

    Attributes
    ----------
    coeffs : ndarray, shape (6, N+1, N+1)
    sobolev : float
        Sobolev exponent attached to the field (-1/2, 0 or 1/2).
    """

    coeffs: np.ndarray
    sobolev: float = 0.0

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs)
        if c.ndim != 3 or c.shape[0] != N_FACES or c.shape[1] != c.shape[2]:
            raise ValueError(f"expected shape (6, N+1, N+1), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def zeros(cls, N: int, sobolev: float = 0.0, dtype=float) -> "BoundaryField":
        return cls(np.zeros((N_FACES, N + 1, N + 1), dtype=dtype), sobolev)

    @classmethod
    def constant(cls, N: int, value: float = 1.0, sobolev: float = 0.0) -> "BoundaryField":
        c = np.zeros((N_FACES, N + 1, N + 1))
        c[:, 0, 0] = value * math.pi  # (1/sqrt(pi))^2 normalisation of the face constant
        return cls(c, sobolev)

    @classmethod
    def face_mode(cls, N: int, face: int, kappa: tuple[int, int], value: float = 1.0, sobolev: float = -0.5):
        c = np.zeros((N_FACES, N + 1, N + 1))
        c[face, kappa[0], kappa[1]] = value
        return cls(c, sobolev)

    def with_sobolev(self, s: float) -> "BoundaryField":
        return BoundaryField(self.coeffs, s)

    def resized(self, N: int) -> "BoundaryField":
        out = np.zeros((N_FACES, N + 1, N + 1), dtype=self.coeffs.dtype)
        m = min(N, self.N) + 1
        out[:, :m, :m] = self.coeffs[:, :m, :m]
        return BoundaryField(out, self.sobolev)

    def __add__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.coeffs + other.coeffs, self.sobolev)

    def __sub__(self, other: "BoundaryField") -> "BoundaryField":
        return BoundaryField(self.coeffs - other.coeffs, self.sobolev)

    def scale(self, s: complex) -> "BoundaryField":
        return BoundaryField(self.coeffs * s, self.sobolev)

    def norm(self, s: float | None = None) -> float:
        return sobolev_norm(self, self.sobolev if s is None else s)

    def evaluate_face(self, face: int, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        """Values on a face at tangential coordinates (broadcast arrays)."""
        t1 = np.asarray(t1, float)
        t2 = np.asarray(t2, float)
        b1 = cosine_1d(self.N, t1.ravel())
        b2 = cosine_1d(self.N, t2.ravel())
        vals = np.einsum("pi,ij,pj->p", b1, self.coeffs[face], b2)
        return vals.reshape(t1.shape)


def sobolev_weights(N: int, s: float) -> np.ndarray:
    return (1.0 + face_wavenumbers_squared(N)) ** (0.5 * s)


def sobolev_norm(field: BoundaryField, s: float) -> float:
    w = sobolev_weights(field.N, s)
    return float(np.sqrt(np.sum((w[None] * np.abs(field.coeffs)) ** 2)))


def trace(field: SpectralField) -> BoundaryField:
    """Restriction of a cosine series to the six faces (exact)."""
    N = field.N
    if N < 1:
        raise ValueError("trace needs N >= 1")
    ends = face_values_1d(N)
    c = field.coeffs
    out = np.empty((N_FACES, N + 1, N + 1), dtype=np.result_type(c, float))
    for side in range(2):
        e = ends[side]
        out[face_index(0, side)] = np.einsum("i,ijk->jk", e, c)
        out[face_index(1, side)] = np.einsum("j,ijk->ik", e, c)
        out[face_index(2, side)] = np.einsum("k,ijk->ij", e, c)
    return BoundaryField(out, 0.5)


def trace_adjoint(bf: BoundaryField) -> SpectralField:
    """Load vector ``<g, psi_k>_{dOmega}`` of boundary data ``g``."""
    N = bf.N
    ends = face_values_1d(N)
    g = bf.coeffs
    out = np.zeros((N + 1,) * 3, dtype=np.result_type(g, float))
    for side in range(2):
        e = ends[side]
        out += np.einsum("i,jk->ijk", e, g[face_index(0, side)])
        out += np.einsum("j,ik->ijk", e, g[face_index(1, side)])
        out += np.einsum("k,ij->ijk", e, g[face_index(2, side)])
    return SpectralField(out)


def boundary_pairing(u: BoundaryField, g: BoundaryField) -> complex:
    """``int_{dOmega} u g dsigma`` (bilinear, no conjugation)."""
    if u.coeffs.shape != g.coeffs.shape:
        raise ValueError(f"mismatched boundary truncations {u.coeffs.shape} vs {g.coeffs.shape}")
    val = np.sum(u.coeffs * g.coeffs)
    return complex(val) if np.iscomplexobj(val) else float(val)


def project_boundary(func, N: int, order: int | None = None) -> BoundaryField:
    """Face-mode coefficients of ``func(face, t1, t2)`` by Gauss quadrature."""
    order = order or (2 * N + 10)
    t, w = gauss_legendre(order)
    B = cosine_1d(N, t) * w[:, None]
    out = np.zeros((N_FACES, N + 1, N + 1), dtype=complex)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    for f in range(N_FACES):
        vals = np.asarray(func(f, T1, T2))
        out[f] = B.T @ vals @ B
    if np.all(out.imag == 0.0):
        out = out.real
    return BoundaryField(out, -0.5)


def face_points(face: int, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """3D coordinates of face points with tangential coordinates ``t1, t2``."""
    axis, side = divmod(face, 2)
    a1, a2 = FACE_AXES[axis]
    t1 = np.asarray(t1, float)
    pts = np.empty(t1.shape + (3,))
    pts[..., axis] = OMEGA_HI if side else OMEGA_LO
    pts[..., a1] = t1
    pts[..., a2] = t2
    return pts


def outward_normal(face: int) -> np.ndarray:
    axis, side = divmod(face, 2)
    n = np.zeros(3)
    n[axis] = 1.0 if side else -1.0
    return n


# ---------------------------------------------------------------------------
# Torus (periodic-cell) fields
# ---------------------------------------------------------------------------

SHIFT_CANDIDATES = tuple(
    np.array(s, dtype=float) * 0.5 for s in np.ndindex(2, 2, 2) if any(s)
)


@dataclass(frozen=True)
class TorusField:
    """Coefficients over ``(2pi)^(-3/2) exp(i (k+s).x)``, ``k in {-K..K}^3``."""

    coeffs: np.ndarray
    shift: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] % 2 == 0 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise ValueError("torus coefficients must be a cube of odd side")
        s = np.asarray(self.shift, dtype=float).reshape(3)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "shift", s)

    @property
    def K(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def wavevectors_1d(self) -> list[np.ndarray]:
        k = np.arange(-self.K, self.K + 1, dtype=float)
        return [k + self.shift[i] for i in range(3)]

    def l2_norm_torus(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def evaluate_grid(self, x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
        k1, k2, k3 = self.wavevectors_1d()
        norm = (2.0 * math.pi) ** -1.5
        E1 = np.exp(1j * np.multiply.outer(np.asarray(x1, float), k1))
        E2 = np.exp(1j * np.multiply.outer(np.asarray(x2, float), k2))
        E3 = np.exp(1j * np.multiply.outer(np.asarray(x3, float), k3))
        out = np.tensordot(E1, self.coeffs, axes=(1, 0))
        out = np.tensordot(out, E2, axes=(1, 1))
        out = np.tensordot(out, E3, axes=(1, 1))
        return norm * out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, float))
        k1, k2, k3 = self.wavevectors_1d()
        norm = (2.0 * math.pi) ** -1.5
        out = np.empty(p.shape[0], dtype=complex)
        for s in range(0, p.shape[0], 2048):
            q = p[s : s + 2048]
            t = np.einsum("pi,ijk->pjk", np.exp(1j * np.multiply.outer(q[:, 0], k1)), self.coeffs)
            t = np.einsum("pj,pjk->pk", np.exp(1j * np.multiply.outer(q[:, 1], k2)), t)
            out[s : s + 2048] = norm * np.einsum("pk,pk->p", np.exp(1j * np.multiply.outer(q[:, 2], k3)), t)
        return out

    def gradient_grid(self, x1, x2, x3) -> np.ndarray:
        """Gradient on a tensor grid, shape (3, n1, n2, n3)."""
        k1, k2, k3 = self.wavevectors_1d()
        out = []
        for axis, kv in enumerate((k1, k2, k3)):
            shape = [1, 1, 1]
            shape[axis] = -1
            out.append(TorusField(self.coeffs * (1j * kv.reshape(shape)), self.shift).evaluate_grid(x1, x2, x3))
        return np.stack(out)

    def apply_symbol(self, symbol: np.ndarray) -> "TorusField":
        return TorusField(self.coeffs * symbol, self.shift)


def torus_wavevectors(K: int, shift: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = np.arange(-K, K + 1, dtype=float)
    s = np.asarray(shift, float)
    return (
        (k + s[0])[:, None, None],
        (k + s[1])[None, :, None],
        (k + s[2])[None, None, :],
    )
