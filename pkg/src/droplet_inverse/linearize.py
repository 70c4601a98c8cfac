"""Born series of the effective-medium problem and its linearisation.

With ``D_p = (|k|^2 + P^2)^{-1}`` (the ``N^p`` symbol) and ``M`` the
multiplication-by-``n^2`` matrix, the effective field expands as::

    u^f = q^f + sum_{j >= 1} omega^{2j} (D_p M)^j q^f .

The first term is ``omega^2 W`` with ``W = D_p M q^f``, the solution of
``(Laplace - P^2) W = -n^2 q^f`` with zero Neumann data.  The linearisation
residual is the boundary trace of what is left after removing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .foldy_lax import fit_slope
from .forward import solve_qf, solve_ug
from .kernels import MediumSpec
from .spectral import BoundaryField, SpectralField, trace, wavenumbers_squared


def _np_symbol(N: int, P: float) -> np.ndarray:
    return 1.0 / (wavenumbers_squared(N).reshape(-1) + P * P)


def apply_potential(field: SpectralField, medium: MediumSpec, P: float) -> SpectralField:
    """``N^p(n^2 w)`` in mode space."""
    N = field.N
    v = medium.apply(field).flat
    return SpectralField.from_flat(_np_symbol(N, P) * v, N)


def solve_W(qf: SpectralField, medium: MediumSpec, P: float) -> SpectralField:
    """``W`` with ``(Laplace - P^2) W = -n^2 q^f`` and zero Neumann trace."""
    if not P > 0:
        raise ValueError("P must be positive")
    return apply_potential(qf, medium, P)


def h_half_norm(bf: BoundaryField) -> float:
    return bf.norm(0.5)


@dataclass
class BornSeriesReport:
    """Per-order trace norms of the Born terms and the geometric-ratio bound.

    Attributes
    ----------
    trace_norms : list of float
        ``|gamma K_j|_{H^{1/2}}`` for ``j = 1..J_max``.
    volume_norms : list of float
        ``|K_j|_{L^2(Omega)}``.
    ratio : float
        ``omega^2 sup|n^2| / P^2``, the contraction factor of ``omega^2 N^p(n^2 .)``.
    """

    P: float
    omega: float
    ratio: float
    trace_norms: list[float] = field(default_factory=list)
    volume_norms: list[float] = field(default_factory=list)
    tail_gap: float = math.nan

    def volume_ratios(self) -> np.ndarray:
        v = np.asarray(self.volume_norms)
        return v[1:] / v[:-1]

    def trace_ratios(self) -> np.ndarray:
        v = np.asarray(self.trace_norms)
        return v[1:] / v[:-1]


def born_terms(f: BoundaryField, medium: MediumSpec, omega: float, P: float, J_max: int) -> list[SpectralField]:
    """``K_j = omega^{2j} (N^p n^2)^j q^f`` for ``j = 1..J_max``."""
    term = solve_qf(f, P)
    out = []
    for _ in range(J_max):
        term = apply_potential(term, medium, P).scale(omega**2)
        out.append(term)
    return out


def born_tail(
    f: BoundaryField, medium: MediumSpec, omega: float, P: float, J_max: int = 6, slack: float = 0.1
) -> BornSeriesReport:
    """Iterate the Born series, check geometric decay and the telescoping identity."""
    ratio = omega**2 * medium.sup_norm / P**2
    if not ratio < 1.0:
        raise ValueError(f"Born series ratio {ratio:.3g} must be below 1")
    terms = born_terms(f, medium, omega, P, J_max)
    rep = BornSeriesReport(P=P, omega=omega, ratio=ratio)
    for t in terms:
        rep.volume_norms.append(t.l2_norm())
        rep.trace_norms.append(h_half_norm(trace(t)))
    vr = rep.volume_ratios()
    if np.any(vr > ratio * (1.0 + slack)):
        raise AssertionError(f"Born terms decay slower than the geometric bound: {vr.max():.3g} > {ratio:.3g}")
    # telescoping: sum of all orders >= 2 equals u - q - K_1
    n_extra = int(math.ceil(math.log(1e-14) / math.log(max(ratio, 1e-3))))
    extra = born_terms(f, medium, omega, P, max(J_max, n_extra))
    tail = sum((t.flat for t in extra[1:]), np.zeros_like(extra[0].flat))
    u = solve_ug(f, medium, omega, P)
    q = solve_qf(f, P)
    direct = u.flat - q.flat - extra[0].flat
    rep.tail_gap = float(np.linalg.norm(tail - direct) / max(np.linalg.norm(direct), 1e-300))
    return rep


@dataclass
class LinearizationReport:
    """Per-``(f, P)`` norms of the lead term and the linearisation residual."""

    rows: list[dict] = field(default_factory=list)

    def series(self, f_id: int, name: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["f_id"] == f_id]
        return np.array([r["P"] for r in rows]), np.array([r[name] for r in rows])

    def slope(self, f_id: int, name: str = "residual_norm") -> float:
        P, v = self.series(f_id, name)
        return fit_slope(P, v)

    @property
    def f_ids(self) -> list[int]:
        return sorted({r["f_id"] for r in self.rows})


def resolved_truncation(N: int, P: float, per_unit: float = 3.0) -> int:
    """Truncation that resolves the ``1/P`` boundary layer: ``max(N, per_unit * P)``."""
    return max(N, int(math.ceil(per_unit * P)))


def linearization_residual(
    f_set: list[BoundaryField], medium: MediumSpec, omega: float, P_sweep: list[float], resolve: bool = False
) -> LinearizationReport:
    """``|gamma(u^f - q^f - omega^2 W)|_{H^{1/2}}`` and ``|omega^2 gamma W|_{H^{1/2}}`` per ``P``.

    With ``resolve`` each ``P`` uses the truncation of :func:`resolved_truncation`;
    otherwise the data truncation is kept for every ``P``.
    """
    rep = LinearizationReport()
    for fid, f0 in enumerate(f_set):
        for P in P_sweep:
            f = f0.resized(resolved_truncation(f0.N, P)) if resolve else f0
            q = solve_qf(f, P)
            W = solve_W(q, medium, P)
            lead = trace(W.scale(omega**2))
            if medium.is_zero or omega == 0.0:
                res_field = SpectralField.zeros(f.N)
            else:
                u = solve_ug(f, medium, omega, P)
                res_field = u - q - W.scale(omega**2)
            res = trace(res_field)
            rep.rows.append(
                {
                    "P": float(P),
                    "f_id": fid,
                    "lead_norm": h_half_norm(lead),
                    "residual_norm": h_half_norm(res),
                    "lead_l2": lead.norm(0.0),
                    "residual_l2": res.norm(0.0),
                    "N": f.N,
                }
            )
    return rep


def default_f_set(N: int) -> list[BoundaryField]:
    """Three band-limited Neumann data used by the linearisation experiment."""
    f1 = BoundaryField.face_mode(N, 0, (1, 0))
    f2 = BoundaryField.face_mode(N, 3, (0, 2)) + BoundaryField.face_mode(N, 4, (1, 1), 0.5)
    f3 = BoundaryField.constant(N, 1.0 / math.pi, -0.5) + BoundaryField.face_mode(N, 5, (2, 1), -0.3)
    return [f1, f2, f3]
