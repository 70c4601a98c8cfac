"""Neumann Green's kernels of the cube and their volume (Newtonian) operators.

Three kernels are provided, all with zero normal derivative on the boundary:

``phi``
    Laplace kernel with the mean removed: ``Laplace phi = -delta + 1/|Omega|``.
    Diagonal in the cosine basis with weight ``1/|k|^2`` and mode 0 dropped.
``gp``
    Modified Helmholtz kernel ``(Laplace - P^2) G_p = -delta``, weight
    ``1/(|k|^2 + P^2)``.
``helmholtz``
    ``(Laplace + omega^2 n^2) G = -delta``.  Assembled by dense Galerkin,
    ``A = diag(|k|^2) - omega^2 <n^2 psi_k, psi_k'>``, and inverted once.

Point values.  A truncated cosine expansion converges slowly near ``x = y``.
For ``phi`` we use the Ewald form of the method of images: the Neumann
function of the cube is a sum of eight reflected copies of the ``2pi``
periodic Laplace kernel, whose Ewald split gives a short real-space sum plus
a Gaussian-damped cosine series.  The Helmholtz kernel is ``G = phi + R`` with
the smoother remainder ``R`` summed in modes (``A^{-1} - diag(1/|k|^2)``).
``G_p`` is evaluated by the image sum of ``exp(-P r)/(4 pi r)``.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.special import erf, erfc
from scipy.sparse.linalg import LinearOperator, eigsh

from .geometry import OMEGA_HI, OMEGA_LO, OMEGA_VOLUME
from .spectral import (
    SpectralField,
    cosine_1d,
    cosine_norms,
    gauss_legendre,
    sobolev_weights,
    trace,
    trace_adjoint,
    BoundaryField,
    wavenumbers_squared,
)

log = logging.getLogger(__name__)

EWALD_BETA = 1.0
EWALD_MODES = 13
CONDITION_LIMIT = 1e12
_SIGMAS = np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)], dtype=float)


# ---------------------------------------------------------------------------
# Medium
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def triple_cosine(N: int, B: int) -> np.ndarray:
    """``T[a, b, m] = int_0^pi phi_a phi_b phi_m`` for the 1D orthonormal cosines."""
    a = np.arange(N + 1)[:, None, None]
    b = np.arange(N + 1)[None, :, None]
    m = np.arange(B + 1)[None, None, :]
    count = (
        (a + b + m == 0).astype(float)
        + (a + b - m == 0)
        + (a - b + m == 0)
        + (a - b - m == 0)
    )
    cN = cosine_norms(N)
    cB = cosine_norms(B)
    return 0.25 * math.pi * count * cN[:, None, None] * cN[None, :, None] * cB[None, None, :]


@dataclass(frozen=True)
class MediumSpec:
    """Band-limited refraction coefficient ``n^2 = offset + sum_k c_k psi_k``.

    Attributes
    ----------
    offset : float
        Constant background value.
    coeffs : ndarray, shape (B+1, B+1, B+1)
        Cosine coefficients of the variable part (orthonormal modes).
    min_bound : float
        Required positive lower bound, checked on a dense grid.
    """

    offset: float
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros((1, 1, 1)))
    min_bound: float = 1e-3

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise ValueError("medium coefficients must be a cubic array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, value: float) -> "MediumSpec":
        return cls(offset=float(value), min_bound=min(1e-3, abs(value)) if value > 0 else 0.0)

    @property
    def band(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def is_zero(self) -> bool:
        return self.offset == 0.0 and not np.any(self.coeffs)

    def as_field(self, N: int) -> SpectralField:
        """Full cosine expansion of ``n^2`` (offset lives on mode 0)."""
        f = np.zeros((max(N, self.band) + 1,) * 3)
        B = self.band
        f[: B + 1, : B + 1, : B + 1] = self.coeffs
        f[0, 0, 0] += self.offset * OMEGA_VOLUME**0.5
        return SpectralField(f).resized(N)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        B = self.band
        c1, c2, c3 = (cosine_1d(B, p[:, i]) for i in range(3))
        return self.offset + np.einsum("pi,pj,pk,ijk->p", c1, c2, c3, self.coeffs)

    def evaluate_grid(self, x1, x2, x3) -> np.ndarray:
        return self.offset + SpectralField(self.coeffs).evaluate_grid(x1, x2, x3)

    def bounds(self, resolution: int = 33) -> tuple[float, float]:
        x = np.linspace(OMEGA_LO, OMEGA_HI, resolution)
        v = self.evaluate_grid(x, x, x)
        return float(v.min()), float(v.max())

    @property
    def sup_norm(self) -> float:
        lo, hi = self.bounds()
        return max(abs(lo), abs(hi))

    def validate(self) -> None:
        if self.is_zero:
            return
        lo, _ = self.bounds()
        if lo < self.min_bound:
            raise ValueError(f"n^2 drops to {lo:.4g}, below the required lower bound {self.min_bound:.4g}")

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.float64(self.offset).tobytes())
        h.update(np.ascontiguousarray(self.coeffs).tobytes())
        return h.hexdigest()[:16]

    def multiplication_matrix(self, N: int) -> np.ndarray:
        """Dense ``<n^2 psi_k, psi_k'>`` over the flattened ``(N+1)^3`` modes (exact)."""
        return _multiplication_matrix(N, self.offset, self.coeffs.tobytes(), self.band)

    def apply(self, field: SpectralField) -> SpectralField:
        """Galerkin product ``<n^2 w, psi_k>`` without forming the dense matrix."""
        N = field.N
        c = field.coeffs
        out = self.offset * c
        if np.any(self.coeffs):
            ops = _sparse_triple(N, self.band)
            for m in np.argwhere(self.coeffs != 0.0):
                t = _apply_axis(ops[m[0]], c, 0)
                t = _apply_axis(ops[m[1]], t, 1)
                t = _apply_axis(ops[m[2]], t, 2)
                out = out + self.coeffs[tuple(m)] * t
        return SpectralField(out)

    def to_dict(self) -> dict:
        nz = np.argwhere(self.coeffs != 0.0)
        return {
            "offset": self.offset,
            "band": self.band,
            "modes": [[int(i), int(j), int(k), float(self.coeffs[i, j, k])] for i, j, k in nz],
            "min_bound": self.min_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MediumSpec":
        B = int(d.get("band", 0))
        c = np.zeros((B + 1,) * 3)
        for i, j, k, v in d.get("modes", []):
            c[int(i), int(j), int(k)] = float(v)
        return cls(offset=float(d["offset"]), coeffs=c, min_bound=float(d.get("min_bound", 1e-3)))


@lru_cache(maxsize=8)
def _multiplication_matrix(N: int, offset: float, coeff_bytes: bytes, B: int) -> np.ndarray:
    coeffs = np.frombuffer(coeff_bytes, dtype=float).reshape((B + 1,) * 3)
    n = (N + 1) ** 3
    M = np.zeros((N + 1,) * 6)
    if np.any(coeffs):
        T = triple_cosine(N, B)
        X = np.einsum("kro,mno->mnkr", T, coeffs)
        Y = np.einsum("jqn,mnkr->mjqkr", T, X)
        Z = np.einsum("ipm,mjqkr->ipjqkr", T, Y)
        M = Z.transpose(0, 2, 4, 1, 3, 5).copy()
    M = M.reshape(n, n)
    M[np.diag_indices(n)] += offset
    M.setflags(write=False)
    return M


@lru_cache(maxsize=16)
def _sparse_triple(N: int, B: int) -> tuple:
    from scipy.sparse import csr_matrix

    T = triple_cosine(N, B)
    return tuple(csr_matrix(T[:, :, m]) for m in range(B + 1))


def _apply_axis(op, c: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(c, axis, 0)
    shape = moved.shape
    out = op @ moved.reshape(shape[0], -1)
    return np.moveaxis(out.reshape(shape), 0, axis)


def demo_medium(contrast: float = 0.5, offset: float = 1.0) -> MediumSpec:
    """Smooth band-limited test medium (cosine modes <= 2) with given contrast."""
    c = np.zeros((3, 3, 3))
    c[1, 0, 0] = 0.6
    c[0, 2, 1] = -0.5
    c[1, 1, 2] = 0.4
    c[2, 0, 1] = 0.3
    x = np.linspace(OMEGA_LO, OMEGA_HI, 41)
    v = SpectralField(c).evaluate_grid(x, x, x)
    c *= contrast / np.abs(v).max()
    return MediumSpec(offset=offset, coeffs=c, min_bound=0.1 * offset)


# ---------------------------------------------------------------------------
# Kernel handles and Newtonian operators
# ---------------------------------------------------------------------------

KernelKind = Literal["phi", "gp", "helmholtz"]


@dataclass(frozen=True)
class KernelHandle:
    """Assembled kernel in mode space.

    Attributes
    ----------
    kind : {"phi", "gp", "helmholtz"}
    N : int
        Cosine truncation per dimension.
    weights : ndarray or None
        Diagonal mode weights (``phi`` and ``gp``).
    inverse : ndarray or None
        Dense inverse Galerkin matrix (``helmholtz``).
    """

    kind: str
    N: int
    P: float | None = None
    omega: float | None = None
    medium: MediumSpec | None = None
    weights: np.ndarray | None = None
    inverse: np.ndarray | None = None
    condition: float = 1.0

    @property
    def diag_cutoff(self) -> float:
        return 2.0 * math.pi / self.N

    def mode_matrix(self) -> np.ndarray:
        if self.inverse is not None:
            return self.inverse
        return np.diag(self.weights.reshape(-1))


def make_phi(N: int) -> KernelHandle:
    k2 = wavenumbers_squared(N)
    w = np.zeros_like(k2)
    w[k2 > 0] = 1.0 / k2[k2 > 0]
    return KernelHandle(kind="phi", N=N, weights=w)


def make_gp(N: int, P: float) -> KernelHandle:
    if not P > 0:
        raise ValueError(f"P must be positive, got {P}")
    return KernelHandle(kind="gp", N=N, P=float(P), weights=1.0 / (wavenumbers_squared(N) + P * P))


def helmholtz_matrix(N: int, omega: float, medium: MediumSpec) -> np.ndarray:
    A = -(omega**2) * medium.multiplication_matrix(N)
    A[np.diag_indices_from(A)] += wavenumbers_squared(N).reshape(-1)
    return A


_HELMHOLTZ_CACHE: dict[tuple, KernelHandle] = {}


def make_helmholtz(N: int, omega: float, medium: MediumSpec, cache_dir=None) -> KernelHandle:
    """Assemble and invert the Neumann Helmholtz Galerkin matrix (cached)."""
    key = (N, float(omega), medium.digest())
    if key in _HELMHOLTZ_CACHE:
        return _HELMHOLTZ_CACHE[key]
    inv = cond = None
    path = None
    if cache_dir is not None:
        from pathlib import Path

        path = Path(cache_dir) / f"helmholtz_N{N}_w{omega:.12g}_{medium.digest()}.npz"
        if path.exists():
            data = np.load(path)
            inv, cond = data["inverse"], float(data["condition"])
    if inv is None:
        A = helmholtz_matrix(N, omega, medium)
        lam, V = np.linalg.eigh(A)
        amin = np.abs(lam).min()
        cond = float(np.abs(lam).max() / amin) if amin > 0 else math.inf
        if cond > CONDITION_LIMIT:
            raise np.linalg.LinAlgError(
                f"omega^2 = {omega**2:.6g} sits on a Neumann eigenvalue (condition {cond:.3g})"
            )
        inv = (V / lam) @ V.T
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savez(path, inverse=inv, condition=cond)
    inv.setflags(write=False)
    handle = KernelHandle(kind="helmholtz", N=N, omega=float(omega), medium=medium, inverse=inv, condition=cond)
    if len(_HELMHOLTZ_CACHE) > 6:
        _HELMHOLTZ_CACHE.pop(next(iter(_HELMHOLTZ_CACHE)))
    _HELMHOLTZ_CACHE[key] = handle
    return handle


def apply_newtonian(kernel: KernelHandle, f: SpectralField) -> SpectralField:
    """``int_Omega K(x, y) f(y) dy`` in mode space."""
    fN = f.resized(kernel.N)
    if kernel.weights is not None:
        return SpectralField(kernel.weights * fN.coeffs)
    out = kernel.inverse @ fN.flat
    return SpectralField.from_flat(out, kernel.N)


def newtonian_norm(kernel: KernelHandle) -> float:
    """``L^2 -> L^2`` operator norm of the Newtonian operator."""
    if kernel.weights is not None:
        return float(np.abs(kernel.weights).max())
    return float(np.linalg.norm(kernel.inverse, 2))


def trace_newtonian_norm(P: float, N: int, s: float = 0.5, tol: float = 1e-8) -> float:
    """Largest singular value of ``f -> gamma N^p f`` from ``L^2`` to discrete ``H^s``."""
    w = 1.0 / (wavenumbers_squared(N) + P * P)
    w2 = sobolev_weights(N, s) ** 2
    shape = (N + 1,) * 3

    def matvec(v):
        c = SpectralField(w * v.reshape(shape))
        t = trace(c)
        t = BoundaryField(t.coeffs * w2[None], 0.5)
        return (w * trace_adjoint(t).coeffs).reshape(-1)

    n = (N + 1) ** 3
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = np.ones(n)
    val = eigsh(op, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)
    return float(math.sqrt(val[0]))


# ---------------------------------------------------------------------------
# Point evaluation
# ---------------------------------------------------------------------------


def _pairs(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    x, y = np.broadcast_arrays(x, y)
    return x, y


def _image_offsets(nmax: int) -> np.ndarray:
    r = np.arange(-nmax, nmax + 1)
    return 2.0 * math.pi * np.array(np.meshgrid(r, r, r, indexing="ij")).reshape(3, -1).T


_OFFSETS_1 = _image_offsets(1)


def _image_table() -> tuple[np.ndarray, np.ndarray, int]:
    """Reflections and shifts whose images can come within ``2 pi`` of ``Omega``.

    Along an axis with ``sigma = -1`` the difference ``u + u'`` lies in
    ``[0, 2 pi]``, so a ``+2 pi`` shift puts the image at least ``2 pi``
    away, where ``erfc(beta r)`` is below double precision.
    """
    sig = np.repeat(_SIGMAS, _OFFSETS_1.shape[0], axis=0)
    off = np.tile(_OFFSETS_1, (_SIGMAS.shape[0], 1))
    keep = ~np.any((sig < 0) & (off > 0), axis=1)
    direct = int(np.flatnonzero(np.all(sig > 0, axis=1) & np.all(off == 0, axis=1))[0])
    direct = int(np.count_nonzero(keep[:direct]))
    return sig[keep], off[keep], direct


_IMG_SIGMA, _IMG_SHIFT, _IMG_DIRECT = _image_table()


def _reflected_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``u - sigma u' + 2 pi n`` over the retained images: (npairs, nimages, 3)."""
    u = x - OMEGA_LO
    v = y - OMEGA_LO
    return u[:, None, :] - _IMG_SIGMA[None] * v[:, None, :] + _IMG_SHIFT[None]


def _ewald_series(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    K = EWALD_MODES
    w = _ewald_weights().reshape((K + 1,) * 3)
    c = [cosine_1d(K, x[:, i]) * cosine_1d(K, y[:, i]) for i in range(3)]
    return np.einsum("pi,pj,pk,ijk->p", c[0], c[1], c[2], w, optimize=True)


def _ewald_real(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Real-space image sum with the direct term replaced by its smooth part."""
    beta = EWALD_BETA
    out = np.empty(x.shape[0])
    for s in range(0, x.shape[0], 2048):
        d = _reflected_differences(x[s : s + 2048], y[s : s + 2048])
        r = np.linalg.norm(d, axis=2)
        direct = r[:, _IMG_DIRECT].copy()
        r[:, _IMG_DIRECT] = np.inf
        real = np.sum(erfc(beta * r) / (4.0 * math.pi * r), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            near = np.where(
                direct > 1e-8, -erf(beta * direct) / (4.0 * math.pi * direct), -beta / (2.0 * math.pi**1.5)
            )
        out[s : s + 2048] = real + near
    return out


def _ewald_weights() -> np.ndarray:
    k2 = wavenumbers_squared(EWALD_MODES)
    w = np.zeros_like(k2)
    nz = k2 > 0
    w[nz] = np.exp(-k2[nz] / (4.0 * EWALD_BETA**2)) / k2[nz]
    return w.reshape(-1)


def phi_regular(x, y) -> np.ndarray:
    """``phi(x, y) - 1/(4 pi |x - y|)`` (finite at ``x = y`` for interior points)."""
    x, y = _pairs(x, y)
    const = -1.0 / (4.0 * EWALD_BETA**2 * math.pi**3)
    return _ewald_real(x, y) + _ewald_series(x, y) + const


def phi_regular_matrix(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``phi(X_i, Y_j) - 1/(4 pi |X_i - Y_j|)`` for all pairs."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    XX = np.repeat(X, Y.shape[0], axis=0)
    YY = np.tile(Y, (X.shape[0], 1))
    real = _ewald_real(XX, YY).reshape(X.shape[0], Y.shape[0])
    VX = _mode_values(EWALD_MODES, X)
    VY = _mode_values(EWALD_MODES, Y)
    series = (VX * _ewald_weights()) @ VY.T
    return real + series - 1.0 / (4.0 * EWALD_BETA**2 * math.pi**3)


def phi_point(x, y) -> np.ndarray:
    """Mean-free Neumann Laplace kernel of the cube at point pairs (Ewald images)."""
    x, y = _pairs(x, y)
    r = np.linalg.norm(x - y, axis=1)
    if np.any(r == 0.0):
        raise ValueError("kernel evaluation at coincident points")
    return 1.0 / (4.0 * math.pi * r) + phi_regular(x, y)


def gp_point(x, y, P: float) -> np.ndarray:
    """Neumann kernel of ``Laplace - P^2`` by the image sum of ``exp(-P r)/(4 pi r)``."""
    x, y = _pairs(x, y)
    nmax = 1 if P >= 4.0 else int(math.ceil(40.0 / (2.0 * math.pi * P)))
    offs = _image_offsets(nmax)
    out = np.empty(x.shape[0])
    u, v = x - OMEGA_LO, y - OMEGA_LO
    for s in range(0, x.shape[0], 1024):
        d = u[s : s + 1024, None, :] - _SIGMAS[None] * v[s : s + 1024, None, :]
        d = (d[:, :, None, :] + offs[None, None]).reshape(d.shape[0], -1, 3)
        r = np.linalg.norm(d, axis=2)
        if np.any(r == 0.0):
            raise ValueError("kernel evaluation at coincident points")
        out[s : s + 1024] = np.sum(np.exp(-P * r) / (4.0 * math.pi * r), axis=1)
    return out


def _mode_values(N: int, pts: np.ndarray) -> np.ndarray:
    c1, c2, c3 = (cosine_1d(N, pts[:, i]) for i in range(3))
    return np.einsum("pi,pj,pk->pijk", c1, c2, c3).reshape(pts.shape[0], -1)


def remainder_matrix(kernel: KernelHandle) -> np.ndarray:
    """Mode matrix of ``R = G - phi`` for a Helmholtz kernel."""
    if kernel.kind != "helmholtz":
        raise ValueError("remainder is defined for Helmholtz kernels")
    R = np.array(kernel.inverse, copy=True)
    w = make_phi(kernel.N).weights.reshape(-1)
    R[np.diag_indices_from(R)] -= w
    return R


_REMAINDER_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _cached_remainder(kernel: KernelHandle) -> np.ndarray:
    key = id(kernel.inverse)
    hit = _REMAINDER_CACHE.get(key)
    if hit is not None and hit[0] is kernel.inverse:
        return hit[1]
    R = remainder_matrix(kernel)
    if len(_REMAINDER_CACHE) > 4:
        _REMAINDER_CACHE.pop(next(iter(_REMAINDER_CACHE)))
    _REMAINDER_CACHE[key] = (kernel.inverse, R)
    return R


def helmholtz_remainder(kernel: KernelHandle, x, y) -> np.ndarray:
    """Mode-series value of ``R(x, y) = G(x, y) - phi(x, y)``."""
    x, y = _pairs(x, y)
    R = _cached_remainder(kernel)
    Vx = _mode_values(kernel.N, x)
    Vy = _mode_values(kernel.N, y)
    return np.einsum("pi,ij,pj->p", Vx, R, Vy)


def helmholtz_remainder_matrix(kernel: KernelHandle, X, Y) -> np.ndarray:
    """``R(X_i, Y_j)`` for all pairs."""
    R = _cached_remainder(kernel)
    return _mode_values(kernel.N, np.atleast_2d(X)) @ R @ _mode_values(kernel.N, np.atleast_2d(Y)).T


def series_point_eval(kernel: KernelHandle, x, y) -> np.ndarray:
    """Raw truncated bilinear mode expansion ``sum psi_k(x) K_kk' psi_k'(y)``."""
    x, y = _pairs(x, y)
    Vx = _mode_values(kernel.N, x)
    Vy = _mode_values(kernel.N, y)
    if kernel.weights is not None:
        return np.einsum("pi,i,pi->p", Vx, kernel.weights.reshape(-1), Vy)
    return np.einsum("pi,ij,pj->p", Vx, kernel.inverse, Vy)


def kernel_point_eval(kernel: KernelHandle, x, y) -> np.ndarray:
    """Kernel value at point pairs ``x != y`` in ``Omega``."""
    x, y = _pairs(x, y)
    if np.any(np.linalg.norm(x - y, axis=1) == 0.0):
        raise ValueError("kernel evaluation at coincident points")
    if kernel.kind == "phi":
        return phi_point(x, y)
    if kernel.kind == "gp":
        return gp_point(x, y, kernel.P)
    return phi_point(x, y) + helmholtz_remainder(kernel, x, y)


def singular_split(kernel: KernelHandle, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(1/(4 pi |x-y|), K(x, y) - 1/(4 pi |x-y|))``."""
    x, y = _pairs(x, y)
    r = np.linalg.norm(x - y, axis=1)
    if np.any(r == 0.0):
        raise ValueError("kernel evaluation at coincident points")
    free = 1.0 / (4.0 * math.pi * r)
    if kernel.kind == "gp":
        return free, gp_point(x, y, kernel.P) - free
    rem = phi_regular(x, y)
    if kernel.kind == "helmholtz":
        rem = rem + helmholtz_remainder(kernel, x, y)
    return free, rem


def kernel_matrix(kernel: KernelHandle, X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    """Dense ``K(X_i, Y_j)``.  With ``Y`` omitted, ``K(X_i, X_j)`` with a zero diagonal."""
    X = np.atleast_2d(X)
    same = Y is None
    Y = X if same else np.atleast_2d(Y)
    r = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    if same:
        r[np.diag_indices(X.shape[0])] = np.inf
    if np.any(r == 0.0):
        raise ValueError("kernel evaluation at coincident points")
    if kernel.kind == "gp":
        i, j = np.nonzero(np.isfinite(r))
        out = np.zeros_like(r)
        out[i, j] = gp_point(X[i], Y[j], kernel.P)
        return out
    out = 1.0 / (4.0 * math.pi * r) + phi_regular_matrix(X, Y)
    if kernel.kind == "helmholtz":
        out = out + helmholtz_remainder_matrix(kernel, X, Y)
    if same:
        out[np.diag_indices(X.shape[0])] = 0.0
    return out


def free_space(x, y) -> np.ndarray:
    x, y = _pairs(x, y)
    return 1.0 / (4.0 * math.pi * np.linalg.norm(x - y, axis=1))


def inner_product_quadrature(f: SpectralField, g: SpectralField) -> float:
    """``<f, N^phi f>``-type bilinear forms reduce to coefficient sums; helper for tests."""
    return float(np.sum(f.coeffs * g.coeffs))
