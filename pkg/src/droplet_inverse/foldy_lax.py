"""Point-interaction (Foldy-Lax) system, its continuum limit and invertibility checks.

The algebraic system couples one moment per droplet::

    Y_m - sum_{j != m} abar a^(1-h) G(z_m, z_j) Y_j = S(z_m),

where ``abar = alpha / a^(1-h)``.  Its continuum counterpart is the
Lippmann-Schwinger equation ``Y - abar N^G Y = S`` on the whole domain.  Since
``a^(1-h)`` is the cell volume, the algebraic system is a Riemann sum of the
continuum equation and the two solutions approach each other as ``a -> 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DropletCluster
from .kernels import KernelHandle, MediumSpec, kernel_matrix, make_phi
from .spectral import SpectralField, evaluate

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FoldyLaxSystem:
    """Assembled interaction matrix and right-hand side.

    Attributes
    ----------
    matrix : ndarray, shape (M, M)
        Unit diagonal, off-diagonal ``-abar a^(1-h) G(z_m, z_j)``.
    rhs : ndarray, shape (M,)
        Samples ``S(z_m)``.
    """

    cluster: DropletCluster
    alpha_bar: float
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def M(self) -> int:
        return self.cluster.M

    @property
    def weight(self) -> float:
        """Per-droplet coupling ``abar a^(1-h)`` (equals ``alpha``)."""
        return self.alpha_bar * self.cluster.a ** (1.0 - self.cluster.h)


@dataclass(frozen=True)
class FoldyLaxSolution:
    Y: np.ndarray
    residual: float
    condition: float
    stability_ratio: float


def assemble(
    cluster: DropletCluster, kernel: KernelHandle, alpha_bar: float, S: SpectralField | np.ndarray
) -> FoldyLaxSystem:
    """Fill the interaction matrix from point values of ``G`` at the droplet centres.

    ``S`` is either a field sampled at the centres or the samples themselves.
    """
    Z = cluster.centers
    if cluster.M > 1 and cluster.min_separation() == 0.0:
        raise ValueError("kernel evaluation at coincident centres")
    if cluster.M > 1 and cluster.min_separation() < kernel.diag_cutoff:
        log.warning("droplet spacing %.3g below the kernel diagonal cutoff %.3g", cluster.min_separation(), kernel.diag_cutoff)
    weight = alpha_bar * cluster.a ** (1.0 - cluster.h)
    A = np.eye(cluster.M)
    if cluster.M > 1:
        A = A - weight * kernel_matrix(kernel, Z)
    rhs = np.asarray(evaluate(S, Z) if isinstance(S, SpectralField) else S, dtype=float).reshape(-1)
    if rhs.shape[0] != cluster.M:
        raise ValueError("right-hand side size does not match the droplet count")
    return FoldyLaxSystem(cluster=cluster, alpha_bar=float(alpha_bar), matrix=A, rhs=rhs)


def solve(system: FoldyLaxSystem, condition_limit: float = CONDITION_LIMIT) -> FoldyLaxSolution:
    """Dense direct solve with condition estimate and stability ratio ``|Y| / |S|``."""
    A = system.matrix
    cond = float(np.linalg.cond(A)) if system.M > 1 else 1.0
    if not cond < condition_limit:
        raise np.linalg.LinAlgError(f"Foldy-Lax matrix ill-conditioned (condition {cond:.3g})")
    Y = np.linalg.solve(A, system.rhs)
    res = float(np.linalg.norm(A @ Y - system.rhs) / max(np.linalg.norm(system.rhs), 1e-300))
    ratio = float(np.linalg.norm(Y) / max(np.linalg.norm(system.rhs), 1e-300))
    return FoldyLaxSolution(Y=Y, residual=res, condition=cond, stability_ratio=ratio)


@dataclass(frozen=True)
class ContinuumSolution:
    Y: SpectralField
    condition: float
    h1_ratio: float


def continuous_lse(kernel: KernelHandle, alpha_bar: float, S: SpectralField) -> ContinuumSolution:
    """Mode-space solve of ``(I - abar N^G) Y = S``."""
    N = kernel.N
    s = S.resized(N).flat
    n = s.size
    if alpha_bar == 0.0:
        return ContinuumSolution(Y=S.resized(N), condition=1.0, h1_ratio=1.0)
    op = np.eye(n) - alpha_bar * kernel.mode_matrix()
    cond = float(np.linalg.cond(op))
    if not cond < CONDITION_LIMIT:
        raise np.linalg.LinAlgError(f"(I - abar N) near-singular (condition {cond:.3g})")
    Y = SpectralField.from_flat(np.linalg.solve(op, s), N)
    return ContinuumSolution(Y=Y, condition=cond, h1_ratio=Y.h1_norm() / max(S.h1_norm(), 1e-300))


def lse_collocation_residual(
    kernel: KernelHandle, alpha_bar: float, Y: SpectralField, S: SpectralField, points: np.ndarray
) -> float:
    """Relative pointwise residual of ``Y - abar N^G Y - S`` at collocation points."""
    NY = SpectralField.from_flat(kernel.mode_matrix() @ Y.resized(kernel.N).flat, kernel.N)
    r = evaluate(Y, points) - alpha_bar * evaluate(NY, points) - evaluate(S, points)
    return float(np.abs(r).max() / max(np.abs(evaluate(S, points)).max(), 1e-300))


@dataclass
class DeviationReport:
    """Per-``a`` maximum deviation between droplet moments and the continuum field."""

    rows: list[dict] = field(default_factory=list)

    def add(self, a: float, h: float, M: int, max_dev: float, **extra) -> None:
        self.rows.append({"a": a, "h": h, "M": M, "max_dev": max_dev, **extra})

    @property
    def a_values(self) -> np.ndarray:
        return np.array([r["a"] for r in self.rows])

    @property
    def deviations(self) -> np.ndarray:
        return np.array([r["max_dev"] for r in self.rows])

    def slope(self) -> float:
        if len(self.rows) < 2:
            return math.nan
        return fit_slope(self.a_values, self.deviations)

    def strictly_decreasing(self) -> bool:
        order = np.argsort(-self.a_values)
        d = self.deviations[order]
        return bool(np.all(np.diff(d) < 0))

    def theory_slope(self) -> float:
        h = self.rows[0]["h"] if self.rows else 0.0
        return (1.0 - h) / 9.0


def discrete_vs_continuum(solution: FoldyLaxSolution, system: FoldyLaxSystem, Y_field: SpectralField) -> float:
    """``max_m |Y_m - Y(z_m)|``."""
    if system.M == 0:
        return 0.0
    cont = evaluate(Y_field, system.cluster.centers)
    return float(np.abs(solution.Y - cont).max())


def fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, float)
    y = np.abs(np.asarray(y, float))
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class CoercivityReport:
    min_eigenvalue: float
    P_sq: float
    omega_sq: float
    bound_ratios: np.ndarray


def coercivity_form(N: int, medium: MediumSpec, omega: float, P: float) -> np.ndarray:
    """Symmetric matrix of ``<m u, u> + <m N^phi(m u), u>`` with ``m = P^2 - omega^2 n^2``."""
    Malpha = P * P * np.eye((N + 1) ** 3) - omega**2 * medium.multiplication_matrix(N)
    D = make_phi(N).weights.reshape(-1)
    form = Malpha + (Malpha * D[None, :]) @ Malpha
    return 0.5 * (form + form.T)


def coercivity_check(
    N: int, medium: MediumSpec, omega: float, P: float, test_data: list[SpectralField] | None = None
) -> CoercivityReport:
    """Positivity of the symmetrised form and the ``|u| P^2 / |g|`` bound for ``u + N^phi(m u) = g``.

    The bound is checked on mean-free data: the mean mode is not damped by
    ``N^phi`` so it carries no ``1/P^2`` gain.
    """
    if not P * P > omega**2 * medium.sup_norm:
        raise ValueError(f"positivity precondition violated: P^2 = {P*P:.4g} <= omega^2 sup n^2 = {omega**2 * medium.sup_norm:.4g}")
    form = coercivity_form(N, medium, omega, P)
    lam_min = float(np.linalg.eigvalsh(form)[0])
    if test_data is None:
        test_data = default_mean_free_data(N)
    Malpha = P * P * np.eye((N + 1) ** 3) - omega**2 * medium.multiplication_matrix(N)
    D = make_phi(N).weights.reshape(-1)
    op = np.eye(Malpha.shape[0]) + D[:, None] * Malpha
    ratios = []
    for g in test_data:
        u = np.linalg.solve(op, g.resized(N).flat)
        ratios.append(np.linalg.norm(u) * P * P / np.linalg.norm(g.flat))
    return CoercivityReport(min_eigenvalue=lam_min, P_sq=P * P, omega_sq=omega**2, bound_ratios=np.array(ratios))


def default_mean_free_data(N: int) -> list[SpectralField]:
    out = []
    for k in ((1, 0, 0), (0, 1, 1), (1, 1, 1)):
        out.append(SpectralField.mode(N, k))
    mixed = np.zeros((N + 1,) * 3)
    mixed[1, 0, 0], mixed[0, 1, 0], mixed[1, 1, 0] = 1.0, -0.5, 0.25
    out.append(SpectralField(mixed))
    return out
