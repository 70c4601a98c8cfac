"""The five desk-scale experiments, each returning plain rows and a summary."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cgo import reconstruct
from .config import ExperimentConfig
from .droplets import NewtonianSpectrum, alpha_bar, make_resonance, scattering_alpha, solve_ball_spectrum
from .foldy_lax import assemble, continuous_lse, discrete_vs_continuum, fit_slope, solve
from .forward import pairing, pairing_report, solve_pf, solve_ug, test_sources
from .geometry import build_lattice, custom_cluster
from .kernels import make_gp, make_helmholtz, newtonian_norm, trace_newtonian_norm
from .linearize import default_f_set, linearization_residual
from .spectral import SpectralField, trace_adjoint

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Long-format rows per output table, a JSON-able summary and per-step residuals."""

    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    extra_json: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Caching
# ---------------------------------------------------------------------------

_SPECTRUM_FIELDS = ("eigenvalues", "degrees", "radial_coeffs", "overlaps", "residuals")


def cached_spectrum(cache_dir: Path | None, n_radial: int = 6, max_degree: int = 4) -> NewtonianSpectrum:
    if cache_dir is None:
        return solve_ball_spectrum(n_radial=n_radial, max_degree=max_degree)
    key = hashlib.sha256(f"ball-{n_radial}-{max_degree}".encode()).hexdigest()[:16]
    path = Path(cache_dir) / f"spectrum-{key}.npz"
    if path.exists():
        with np.load(path, allow_pickle=False) as d:
            return NewtonianSpectrum(
                radius=1.0, n_radial=n_radial, max_degree=max_degree, **{k: d[k] for k in _SPECTRUM_FIELDS}
            )
    spec = solve_ball_spectrum(n_radial=n_radial, max_degree=max_degree)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{k: getattr(spec, k) for k in _SPECTRUM_FIELDS})
    return spec


def _resonance(cfg: ExperimentConfig, spectrum: NewtonianSpectrum, a: float, medium):
    return make_resonance(
        spectrum, n0=cfg.n0, c_n0=cfg.c_n0, k0=cfg.k0, rho1=cfg.rho1, a=a, h=cfg.h, n2_sup=medium.sup_norm
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_spectra(cfg: ExperimentConfig, cache_dir: Path | None = None, threads: int = 1) -> ExperimentResult:
    spec = cached_spectrum(cache_dir)
    medium = cfg.medium.build()
    res = ExperimentResult()
    rows = []
    for i, (lam, l, ov, r) in enumerate(zip(spec.eigenvalues, spec.degrees, spec.overlaps, spec.residuals)):
        rows += [
            {"index": i, "quantity": "eigenvalue", "value": float(lam)},
            {"index": i, "quantity": "degree", "value": int(l)},
            {"index": i, "quantity": "overlap", "value": float(ov)},
            {"index": i, "quantity": "residual", "value": float(r)},
        ]
    res.tables["spectrum"] = ("index", rows)
    params = [_resonance(cfg, spec, a, medium) for a in cfg.a_list]
    prow = []
    for p in params:
        al = scattering_alpha(p, spec)
        for k, v in {**p.to_dict(), "alpha": al.alpha, "alpha_dominant": al.dominant, "alpha_bar": al.alpha / p.a ** (1 - p.h)}.items():
            prow.append({"a": p.a, "quantity": k, "value": float(v)})
    res.tables["resonance"] = ("a", prow)
    res.summary = {
        "radial_eigenvalues": spec.radial_eigenvalues().tolist(),
        "radial_overlaps": spec.radial_overlaps().tolist(),
        "max_residual": float(np.max(spec.residuals)),
    }
    res.steps.append({"step": "ball_spectrum", "residual": float(np.max(spec.residuals))})
    return res


def run_forward(cfg: ExperimentConfig, cache_dir: Path | None = None, threads: int = 1) -> ExperimentResult:
    """Operator-norm sweep of ``N^p`` and ``gamma N^p`` plus background NtD pairings."""
    medium = cfg.medium.build()
    res = ExperimentResult()
    rows = []
    for P in cfg.P_list:
        N = max(cfg.N, int(2 * P))
        rows.append({"P": P, "quantity": "norm_Np", "value": newtonian_norm(make_gp(cfg.N, P))})
        rows.append({"P": P, "quantity": "norm_trace_Np", "value": trace_newtonian_norm(P, N)})
    res.tables["operator_norms"] = ("P", rows)
    Ps = np.array(cfg.P_list, float)
    if len(Ps) >= 2:
        res.summary["slope_norm_Np"] = fit_slope(Ps, [r["value"] for r in rows if r["quantity"] == "norm_Np"])
        res.summary["slope_norm_trace_Np"] = fit_slope(Ps, [r["value"] for r in rows if r["quantity"] == "norm_trace_Np"])
    spec = cached_spectrum(cache_dir)
    p = _resonance(cfg, spec, cfg.a_list[0], medium)
    kernel = make_helmholtz(cfg.N, p.omega, medium, cache_dir=cache_dir)
    prow = []
    for pid, (f, g) in enumerate(test_sources(cfg.N, cfg.n_pairs)):
        lam0 = pairing(solve_pf(f, medium, p.omega, kernel), g)
        for P in cfg.P_list:
            lamP = pairing(solve_ug(f, medium, p.omega, P), g)
            prow.append({"P": P, "quantity": f"pair{pid}_lambdaP", "value": lamP})
            prow.append({"P": P, "quantity": f"pair{pid}_lambdaP_minus_lambda0", "value": lamP - lam0})
    res.tables["ntd_pairings"] = ("P", prow)
    res.steps.append({"step": "helmholtz_kernel", "condition": kernel.condition})
    return res


def run_converge(cfg: ExperimentConfig, cache_dir: Path | None = None, threads: int = 1) -> ExperimentResult:
    """``J = Lambda_D - Lambda_P`` and ``max |Y_m - Y(z_m)|`` over the ``a`` sweep.

    ``Lambda_P`` uses ``P^2 = -abar``, the coefficient the algebraic system
    converges to; at ``h > 0`` it tends to the leading-order ``P^2``.
    """
    medium = cfg.medium.build()
    spec = cached_spectrum(cache_dir)
    res = ExperimentResult()
    rows = []
    pairs = test_sources(cfg.N, cfg.n_pairs)
    for a in sorted(cfg.a_list, reverse=True):
        p = _resonance(cfg, spec, a, medium)
        abar = alpha_bar(p, spec)
        alpha = abar * a ** (1.0 - cfg.h)
        P_eff = math.sqrt(-abar)
        kernel = make_helmholtz(cfg.N, p.omega, medium, cache_dir=cache_dir)
        if cfg.droplets:
            cluster = build_lattice(None, a, cfg.h, kappa=cfg.kappa, fit=cfg.fit)
        else:
            cluster = custom_cluster(np.zeros((0, 3)), a, cfg.h, a ** ((1.0 - cfg.h) / 3.0))
        rep = pairing_report(pairs, medium, cluster, p, P_eff, alpha=alpha, method="foldy_lax", kernel=kernel)
        for r in rep.rows:
            for q in ("lambda0", "lambdaP", "lambdaD", "J"):
                rows.append({"a": a, "quantity": f"pair{r['pair_id']}_{q}", "value": float(r[q])})
            rows.append({"a": a, "quantity": f"pair{r['pair_id']}_lambdaD_minus_lambda0", "value": float(r["lambdaD"] - r["lambda0"])})
        rows.append({"a": a, "quantity": "M", "value": cluster.M})
        rows.append({"a": a, "quantity": "alpha_bar", "value": abar})
        if cluster.M > 0:
            g = pairs[0][1]
            S = SpectralField.from_flat(kernel.inverse @ trace_adjoint(g).resized(cfg.N).flat, cfg.N)
            Yc = continuous_lse(kernel, abar, S)
            system = assemble(cluster, kernel, abar, S)
            sol = solve(system)
            dev = discrete_vs_continuum(sol, system, Yc.Y)
            rows.append({"a": a, "quantity": "max_deviation", "value": dev})
            res.steps.append({"step": f"foldy_lax a={a:g}", "residual": sol.residual, "condition": sol.condition})
    res.tables["converge"] = ("a", rows)
    res.summary = _converge_summary(rows, cfg)
    return res


def _converge_summary(rows: list, cfg: ExperimentConfig) -> dict:
    a_vals = sorted({r["a"] for r in rows}, reverse=True)
    out: dict = {"a": a_vals}
    for pid in range(cfg.n_pairs):
        J = [abs(next(r["value"] for r in rows if r["a"] == a and r["quantity"] == f"pair{pid}_J")) for a in a_vals]
        out[f"pair{pid}_absJ"] = J
        out[f"pair{pid}_decreasing"] = bool(all(x > y for x, y in zip(J, J[1:])))
    dev = [r["value"] for r in rows if r["quantity"] == "max_deviation"]
    if len(dev) >= 2:
        out["max_deviation"] = dev
        out["deviation_slope"] = fit_slope(np.array(a_vals), np.array(dev))
    return out


def run_linearize(cfg: ExperimentConfig, cache_dir: Path | None = None, threads: int = 1) -> ExperimentResult:
    medium = cfg.medium.build()
    spec = cached_spectrum(cache_dir)
    p = _resonance(cfg, spec, cfg.a_list[0], medium)
    rep = linearization_residual(default_f_set(cfg.N), medium, p.omega, list(cfg.P_list), resolve=True)
    res = ExperimentResult()
    rows = []
    for r in rep.rows:
        for q in ("lead_norm", "residual_norm"):
            rows.append({"P": r["P"], "quantity": f"f{r['f_id']}_{q}", "value": r[q]})
    res.tables["linearize"] = ("P", rows)
    if len(cfg.P_list) >= 2 and not medium.is_zero:
        res.summary = {
            f"f{i}_residual_slope": rep.slope(i, "residual_norm") for i in rep.f_ids
        } | {f"f{i}_lead_slope": rep.slope(i, "lead_norm") for i in rep.f_ids}
    res.summary["omega"] = p.omega
    return res


def run_reconstruct(cfg: ExperimentConfig, cache_dir: Path | None = None, threads: int = 1) -> ExperimentResult:
    medium = cfg.medium.build()
    res = ExperimentResult()
    rows, coeffs = [], {}
    for P in cfg.P_list:
        r = reconstruct(cfg.L, P, cfg.varsigma, medium, mode=cfg.mode, threads=threads)
        rows += [
            {"P": P, "quantity": "error_ideal", "value": r.error_ideal},
            {"P": P, "quantity": "error_truth", "value": r.error_truth},
            {"P": P, "quantity": "truncation_floor", "value": r.truncation_floor},
            {"P": P, "quantity": "conjugate_symmetry_gap", "value": r.conjugate_symmetry_gap()},
            {"P": P, "quantity": "r1_bound_ratio_max", "value": float(max(x["r1_ratio"] for x in r.per_ell))},
            {"P": P, "quantity": "r2_bound_ratio_max", "value": float(max(x["r2_ratio"] for x in r.per_ell))},
        ]
        coeffs[f"P={P:g}"] = [
            {
                "ell": list(x["ell"]),
                "re": x["value"].real,
                "im": x["value"].imag,
                "ideal_re": x["ideal"].real,
                "ideal_im": x["ideal"].imag,
                "error": x["error"],
                "error_scale": x["error_scale"],
            }
            for x in r.per_ell
        ]
        res.steps.append({"step": f"reconstruct P={P:g}", "max_residual": float(max(max(x["r1_residual"], x["r2_residual"]) for x in r.per_ell))})
        grid = r.grid(medium, n=17)
        mid = grid["x"].size // 2
        slice_rows = []
        for i, x1 in enumerate(grid["x"]):
            for j, x2 in enumerate(grid["x"]):
                slice_rows.append(
                    {
                        "x1": x1,
                        "x2": x2,
                        "x3": grid["x"][mid],
                        "reconstruction": grid["reconstruction"][i, j, mid],
                        "ideal": grid["ideal"][i, j, mid],
                        "truth": grid["truth"][i, j, mid],
                    }
                )
        res.tables[f"slice_P{P:g}"] = (None, slice_rows)
    res.tables["reconstruct_errors"] = ("P", rows)
    res.extra_json["coefficients"] = coeffs
    errs = [r["value"] for r in rows if r["quantity"] == "error_ideal"]
    if len(errs) >= 2:
        res.summary["error_slope"] = fit_slope(np.array(cfg.P_list, float), np.array(errs))
    res.summary["error_ideal"] = errs
    return res


RUNNERS = {
    "spectra": run_spectra,
    "forward": run_forward,
    "converge": run_converge,
    "linearize": run_linearize,
    "reconstruct": run_reconstruct,
}
