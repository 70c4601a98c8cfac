"""Forward solvers and Neumann-to-Dirichlet pairings.

All volume problems are Galerkin solves in the cosine basis with the
boundary load ``<g, psi_k>_{dOmega}``:

* ``p^f``: ``(Laplace + omega^2 n^2) p = 0``, background medium.
* ``q^f``: ``(Laplace - P^2) q = 0``.
* ``u^f``: ``(Laplace + omega^2 n^2 - P^2) u = 0``, the effective medium.
* ``v^g``: the droplet-resolved field, from the volume integral equation
  ``v - kappa int_D G(., y) v(y) dy = p^g`` on the droplets with
  ``kappa = omega^2 rho1 / k1`` (see :func:`solve_vg_fine`).

Pairings are ``<Lambda f, g> = int_{dOmega} w^f g``; in mode space this is the
dot product of the solution with the load of ``g``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .droplets import BallBasis, ResonanceParams, ball_basis
from .geometry import DropletCluster
from .kernels import (
    KernelHandle,
    MediumSpec,
    helmholtz_remainder_matrix,
    make_helmholtz,
    phi_regular_matrix,
)
from .spectral import BoundaryField, SpectralField, evaluate, trace_adjoint, wavenumbers_squared

log = logging.getLogger(__name__)

DENSE_LIMIT = 16


def _load(f: BoundaryField) -> np.ndarray:
    return trace_adjoint(f).flat


def solve_pf(f: BoundaryField, medium: MediumSpec, omega: float, kernel: KernelHandle | None = None) -> SpectralField:
    """Background field with Neumann data ``f``.

    At ``omega = 0`` the Laplace-Neumann problem needs ``int f = 0`` and the
    zero-mean solution is returned.
    """
    N = f.N
    load = _load(f)
    if omega == 0.0 or medium.is_zero:
        if abs(load[0]) > 1e-10 * max(np.abs(load).max(), 1.0):
            raise ValueError("Laplace-Neumann data must have zero mean")
        k2 = wavenumbers_squared(N).reshape(-1)
        out = np.zeros_like(load)
        out[1:] = load[1:] / k2[1:]
        return SpectralField.from_flat(out, N)
    kernel = kernel or make_helmholtz(N, omega, medium)
    if kernel.N != N:
        raise ValueError("kernel and boundary data truncations differ")
    return SpectralField.from_flat(kernel.inverse @ load, N)


def solve_qf(f: BoundaryField, P: float) -> SpectralField:
    """Solution of ``(Laplace - P^2) q = 0`` with Neumann data ``f``."""
    if not P > 0:
        raise ValueError("P must be positive")
    N = f.N
    return SpectralField.from_flat(_load(f) / (wavenumbers_squared(N).reshape(-1) + P * P), N)


def effective_matrix(N: int, medium: MediumSpec, omega: float, P: float) -> np.ndarray:
    A = -(omega**2) * medium.multiplication_matrix(N)
    A[np.diag_indices_from(A)] += wavenumbers_squared(N).reshape(-1) + P * P
    return A


def solve_ug(g: BoundaryField, medium: MediumSpec, omega: float, P: float) -> SpectralField:
    """Effective-medium field: ``u - omega^2 N^p(n^2 u) = q`` solved in mode space."""
    if not P > 0:
        raise ValueError("P must be positive")
    ratio = omega**2 * medium.sup_norm / P**2
    if not ratio < 1.0:
        raise ValueError(f"smallness omega^2 |n^2| / P^2 = {ratio:.3g} must be below 1")
    N = g.N
    if N <= DENSE_LIMIT:
        return SpectralField.from_flat(np.linalg.solve(effective_matrix(N, medium, omega, P), _load(g)), N)
    return _solve_effective_cg(_load(g), N, medium, omega, P)


def _solve_effective_cg(load: np.ndarray, N: int, medium: MediumSpec, omega: float, P: float, rtol: float = 1e-13):
    """Matrix-free CG for the SPD effective operator (used above the dense limit)."""
    from scipy.sparse.linalg import LinearOperator, cg

    diag = wavenumbers_squared(N).reshape(-1) + P * P
    shape = (N + 1,) * 3

    def matvec(x):
        return diag * x - omega**2 * medium.apply(SpectralField(x.reshape(shape))).flat

    n = diag.size
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    pre = LinearOperator((n, n), matvec=lambda x: x / (diag - omega**2 * medium.offset), dtype=float)
    x, info = cg(op, load, rtol=rtol, atol=0.0, M=pre, maxiter=500)
    if info != 0:
        raise RuntimeError(f"CG did not converge (info={info})")
    return SpectralField.from_flat(x, N)


def pairing(w_f: SpectralField, g: BoundaryField) -> float:
    """``int_{dOmega} w g`` from the interior field ``w`` and boundary data ``g``."""
    return float(w_f.flat @ _load(g.resized(w_f.N)))


def inner(u: SpectralField, v: SpectralField) -> float:
    return float(np.sum(u.coeffs * v.coeffs))


# ---------------------------------------------------------------------------
# Droplet-resolved oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DropletField:
    """Galerkin solution on the droplets.

    Attributes
    ----------
    coeffs : ndarray, shape (M, n_basis)
        Ball-basis coefficients per droplet.
    moments : ndarray, shape (M,)
        ``int_{D_j} v``.
    l2_norm : float
        ``|v|_{L^2(D)}``.
    resolution_gap : float
        Relative change of the moments between two resolution levels.
    """

    cluster: DropletCluster
    basis: BallBasis
    coeffs: np.ndarray
    moments: np.ndarray
    l2_norm: float
    resolution_gap: float = 0.0

    def pair_with(self, field: SpectralField) -> float:
        """``int_D v w`` for a smooth interior field ``w``."""
        vals = evaluate(field, _nodes(self.cluster, self.basis)).reshape(self.cluster.M, -1)
        a3 = self.cluster.a**3
        proj = np.einsum("mq,q,qb->mb", vals, self.basis.weights * a3, self.basis.values)
        return float(np.sum(proj * self.coeffs))


def _nodes(cluster: DropletCluster, basis: BallBasis) -> np.ndarray:
    return (cluster.centers[:, None, :] + cluster.a * basis.nodes[None]).reshape(-1, 3)


def droplet_system(cluster: DropletCluster, kernel: KernelHandle, basis: BallBasis) -> tuple[np.ndarray, np.ndarray]:
    """Gram and kernel Galerkin matrices over all droplets.

    The free-space self-interaction is the exact ball Newtonian matrix scaled
    by ``a^5``; everything else (the regular part of ``phi``, the Helmholtz
    remainder, and the full kernel between different droplets) is smooth on
    the droplets and integrated with the ball product rule.
    """
    M, nb, a = cluster.M, basis.size, cluster.a
    X = _nodes(cluster, basis)
    Q = basis.nodes.shape[0]
    H = phi_regular_matrix(X, X)
    if kernel.kind == "helmholtz":
        H = H + helmholtz_remainder_matrix(kernel, X, X)
    elif kernel.kind != "phi":
        raise ValueError("droplet oracle needs a phi or helmholtz kernel")
    r = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    owner = np.repeat(np.arange(M), Q)
    cross = owner[:, None] != owner[None, :]
    H[cross] += 1.0 / (4.0 * math.pi * r[cross])
    WB = basis.values * (basis.weights * a**3)[:, None]
    Gmat = np.zeros((M * nb, M * nb))
    for i in range(M):
        for j in range(M):
            Gmat[i * nb : (i + 1) * nb, j * nb : (j + 1) * nb] = WB.T @ H[i * Q : (i + 1) * Q, j * Q : (j + 1) * Q] @ WB
        Gmat[i * nb : (i + 1) * nb, i * nb : (i + 1) * nb] += a**5 * basis.newtonian
    Gmat = 0.5 * (Gmat + Gmat.T)
    gram = np.kron(np.eye(M), a**3 * basis.gram)
    return gram, Gmat


def _solve_droplets(
    source: SpectralField, cluster: DropletCluster, kernel: KernelHandle, coupling: float, basis: BallBasis
) -> DropletField:
    M, nb, a = cluster.M, basis.size, cluster.a
    gram, Gmat = droplet_system(cluster, kernel, basis)
    X = _nodes(cluster, basis)
    S = evaluate(source, X).reshape(M, -1)
    rhs = np.einsum("mq,q,qb->mb", S, basis.weights * a**3, basis.values).reshape(-1)
    c = np.linalg.solve(gram - coupling * Gmat, rhs).reshape(M, nb)
    moments = a**3 * (c @ basis.moments)
    l2 = float(math.sqrt(max(c.reshape(-1) @ gram @ c.reshape(-1), 0.0)))
    return DropletField(cluster=cluster, basis=basis, coeffs=c, moments=moments, l2_norm=l2)


def solve_vg_fine(
    source: SpectralField,
    cluster: DropletCluster,
    kernel: KernelHandle,
    coupling: float,
    basis: BallBasis | None = None,
    check_resolution: bool = True,
    resolution_tol: float = 0.1,
    max_droplets: int = 8,
) -> DropletField:
    """Droplet-resolved solution of ``v - coupling int_D G v = source`` on ``D``.

    ``source`` is the background field ``p^g``; ``coupling`` is
    ``omega^2 rho1 / k1``.  A second solve at a finer ball resolution checks
    the moments; a relative change above ``resolution_tol`` is an error.
    """
    if cluster.M > max_droplets:
        raise ValueError(f"droplet-resolved oracle limited to {max_droplets} droplets (got {cluster.M})")
    if cluster.M == 0:
        return DropletField(cluster, basis or ball_basis(), np.zeros((0, 0)), np.zeros(0), 0.0)
    basis = basis or ball_basis()
    out = _solve_droplets(source, cluster, kernel, coupling, basis)
    if check_resolution:
        ref = _solve_droplets(source, cluster, kernel, coupling, basis.refined())
        gap = float(np.abs(ref.moments - out.moments).max() / max(np.abs(ref.moments).max(), 1e-300))
        if gap > resolution_tol:
            raise RuntimeError(f"droplet resolution too coarse: moments change by {gap:.1%} under refinement")
        out = DropletField(out.cluster, out.basis, out.coeffs, out.moments, out.l2_norm, gap)
    return out


def foldy_lax_moments(Y: np.ndarray, params: ResonanceParams, alpha: float) -> np.ndarray:
    """Droplet moments ``int_{D_m} v = alpha k1 / (omega^2 rho1) Y_m``."""
    return alpha * params.k1 / (params.omega_sq * params.rho1) * np.asarray(Y)


# ---------------------------------------------------------------------------
# Pairing report
# ---------------------------------------------------------------------------


def test_sources(N: int, count: int = 6) -> list[tuple[BoundaryField, BoundaryField]]:
    """Fixed family of ``(f, g)`` pairs: single low face modes with zero mean."""
    pairs = []
    for j in range(count):
        f = BoundaryField.face_mode(N, j % 6, (1, 0))
        g = BoundaryField.face_mode(N, (j + 1) % 6, (0, 1)) + BoundaryField.face_mode(N, (j + 3) % 6, (1, 1), 0.5)
        pairs.append((f, g))
    return pairs


@dataclass
class NtDPairingReport:
    """Per-pair NtD pairings, their differences and the two sides of the ``J`` identity."""

    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def max_identity_gap(self) -> float:
        if not self.rows:
            return 0.0
        return float(max(r.get("identity_gap", 0.0) for r in self.rows))


def pairing_report(
    pairs: list[tuple[BoundaryField, BoundaryField]],
    medium: MediumSpec,
    cluster: DropletCluster,
    params: ResonanceParams | None,
    P: float,
    alpha: float = 0.0,
    method: str = "foldy_lax",
    kernel: KernelHandle | None = None,
    Y_solver=None,
) -> NtDPairingReport:
    """``Lambda_0``, ``Lambda_P``, ``Lambda_D`` and ``J = Lambda_D - Lambda_P`` for each pair.

    ``method`` selects how ``Lambda_D`` is obtained: ``"fine"`` (droplet-resolved
    oracle, small ``M``) or ``"foldy_lax"`` (moments ``alpha Y_j`` injected into
    ``sum_j p^f(z_j) int_{D_j} v``).  With no droplets ``Lambda_D = Lambda_0``.
    ``J_surrogate`` is always the point-moment estimator.
    """
    from .foldy_lax import assemble, solve

    report = NtDPairingReport()
    if not pairs:
        return report
    N = pairs[0][0].N
    omega = params.omega if params is not None else 0.0
    if kernel is None and omega != 0.0:
        kernel = make_helmholtz(N, omega, medium)
    for pid, (f, g) in enumerate(pairs):
        pf = solve_pf(f, medium, omega, kernel)
        pg = solve_pf(g, medium, omega, kernel)
        uf = solve_ug(f, medium, omega, P)
        ug = solve_ug(g, medium, omega, P)
        lam0 = pairing(pf, g)
        lamP = pairing(uf, g)
        row = dict(pair_id=pid, M=cluster.M, a=cluster.a, h=cluster.h, P=P, lambda0=lam0, lambdaP=lamP)
        effective = P * P * inner(ug, pf)
        if cluster.M == 0 or params is None:
            row.update(lambdaD=lam0, J=lam0 - lamP, J_surrogate=lam0 - lamP, identity_gap=0.0)
            report.add(**row)
            continue
        # point-moment estimator from the algebraic system
        abar = alpha / cluster.a ** (1.0 - cluster.h)
        sol = solve(assemble(cluster, kernel, abar, pg))
        moment_term = alpha * float(evaluate(pf, cluster.centers) @ sol.Y)
        J_surrogate = moment_term + effective
        if method == "fine":
            vf = solve_vg_fine(pf, cluster, kernel, params.coupling)
            vg = solve_vg_fine(pg, cluster, kernel, params.coupling)
            droplet_f = params.coupling * vf.pair_with(pg)
            droplet_g = params.coupling * vg.pair_with(pf)
            lamD = lam0 + droplet_f
            J = lamD - lamP
            rhs = droplet_g + effective
            gap = abs(J - rhs) / max(abs(J), abs(rhs), 1e-300)
            row.update(lambdaD=lamD, J=J, J_rhs=rhs, J_surrogate=J_surrogate, identity_gap=gap)
        elif method == "foldy_lax":
            lamD = lam0 + moment_term
            row.update(lambdaD=lamD, J=lamD - lamP, J_surrogate=J_surrogate, identity_gap=0.0)
        else:
            raise ValueError(f"unknown Lambda_D method {method!r}")
        report.add(**row)
    return report


def proxy_operator_norm(diff_matrix: np.ndarray) -> float:
    """Largest singular value of a pairing matrix in the weighted face bases."""
    return float(np.linalg.norm(diff_matrix, 2))
