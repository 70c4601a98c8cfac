"""Command-line entry point: ``droplet-inverse <experiment> --config cfg.yaml --out dir``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .experiments import RUNNERS, ExperimentResult

log = logging.getLogger("droplet_inverse")

OUT_ENV = "DROPLET_INVERSE_OUT"
FLOAT_FORMAT = ".12g"


def format_value(v) -> str:
    """Deterministic text for CSV cells: floats with 12 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), FLOAT_FORMAT)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return float(format(f, FLOAT_FORMAT)) if math.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path: Path, rows: list[dict], config_hash: str, columns: list[str] | None = None) -> Path:
    """RFC-4180 CSV; every row carries the config hash."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    columns = [c for c in columns if c != "config_hash"] + ["config_hash"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r.get(c, config_hash if c == "config_hash" else "")) for c in columns])
    return path


def emit_plotdata(rows: list[dict], path: Path, key: str, config_hash: str) -> Path:
    """Long-format ``(key, quantity, value)`` CSV sorted by key then quantity."""
    ordered = sorted(rows, key=lambda r: (r[key], r["quantity"]))
    return write_table(path, ordered, config_hash, [key, "quantity", "value"])


def write_result(result: ExperimentResult, cfg: ExperimentConfig, out: Path, elapsed: float) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.digest()
    files = []
    for name, (key, rows) in sorted(result.tables.items()):
        path = out / f"{cfg.experiment}_{name}.csv"
        if key is None:
            write_table(path, rows, h)
        else:
            emit_plotdata(rows, path, key, h)
        files.append(path.name)
    for name, data in sorted(result.extra_json.items()):
        path = out / f"{cfg.experiment}_{name}.json"
        write_json(path, {"config_hash": h, name: data})
        files.append(path.name)
    summary = out / f"{cfg.experiment}_summary.json"
    write_json(summary, {"config_hash": h, **result.summary})
    files.append(summary.name)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_hash": h,
        "code_version": __version__,
        "files": files,
        "steps": result.steps,
        "status": "ok",
    }
    path = out / f"{cfg.experiment}_manifest.json"
    write_json(path, manifest)
    log.info("%s finished in %.1f s, outputs in %s", cfg.experiment, elapsed, out)
    return path


def run(cfg: ExperimentConfig, out: Path, threads: int = 1, use_cache: bool = True) -> Path:
    cache_dir = out / "cache" if use_cache else None
    t0 = time.time()
    result = RUNNERS[cfg.experiment](cfg, cache_dir=cache_dir, threads=threads)
    return write_result(result, cfg, out, time.time() - t0)


# ---------------------------------------------------------------------------
# Self test
# ---------------------------------------------------------------------------


def selftest() -> int:
    """Fast invariant checks across the modules; prints one line per check."""
    from .cgo import build_cgo, make_xi
    from .droplets import make_resonance, radial_eigenvalue_exact, scattering_alpha, solve_ball_spectrum
    from .kernels import MediumSpec, make_gp, newtonian_norm
    from .linearize import default_f_set, linearization_residual

    checks = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    def null_vectors():
        worst = 0.0
        for ell in [(0, 0, 1), (1, 0, 0), (1, 1, 1), (2, -3, 1), (0, 4, -5)]:
            xi = make_xi(ell, 4.0, 1.0)
            worst = max(worst, abs(xi @ xi) / np.linalg.norm(xi) ** 2)
        return worst < 1e-12, f"max |xi.xi|/|xi|^2 = {worst:.1e}"

    def ball():
        spec = solve_ball_spectrum(n_radial=6, max_degree=1)
        err = abs(spec.radial_eigenvalues()[0] - radial_eigenvalue_exact(1))
        return err < 1e-3, f"first radial eigenvalue error {err:.1e}"

    def alpha():
        spec = solve_ball_spectrum(n_radial=6, max_degree=1)
        p = make_resonance(spec, c_n0=-0.25, a=1 / 64, h=0.5)
        r = scattering_alpha(p, spec)
        ratio = r.alpha / p.a ** (1 - p.h) / -p.P_sq
        return abs(ratio - 1) < 0.05, f"alpha / (-P^2 a^(1-h)) = {ratio:.4f}"

    def norm_np():
        v = [newtonian_norm(make_gp(8, P)) * P * P for P in (4.0, 8.0)]
        return max(abs(x - 1) for x in v) < 1e-12, f"P^2 |N^p| = {v}"

    def zero_medium():
        rep = linearization_residual(default_f_set(6), MediumSpec.constant(0.0), 1.0, [4.0])
        return rep.rows[0]["residual_norm"] == 0.0, "residual at n^2 = 0 is exactly zero"

    def cgo():
        t = build_cgo((1, 0, 0), 4.0, 1.0)
        return t.r1.residual < 1e-5 and t.r2.residual < 1e-5, f"r1/r2 residuals {t.r1.residual:.1e}/{t.r2.residual:.1e}"

    for name, fn in [
        ("null vectors", null_vectors),
        ("ball spectrum", ball),
        ("alpha asymptotics", alpha),
        ("N^p norm", norm_np),
        ("linearization at n^2 = 0", zero_medium),
        ("CGO remainders", cgo),
    ]:
        check(name, fn)
    return 0 if all(checks) else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="droplet-inverse", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RUNNERS, "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./results)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent parameter points")
        p.add_argument("--no-cache", action="store_true", help="ignore and do not write kernel/spectrum caches")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return selftest()
    try:
        if args.config is not None:
            cfg = ExperimentConfig.from_yaml(args.config)
        else:
            cfg = ExperimentConfig.from_dict({"experiment": args.command})
        if cfg.experiment != args.command:
            raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {args.command!r}")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2
    out = args.out or Path(os.environ.get(OUT_ENV, cfg.output_dir))
    try:
        manifest = run(cfg, out, threads=args.threads, use_cache=not args.no_cache)
    except Exception as exc:
        log.error("%s failed: %s", cfg.experiment, exc)
        print(f"error: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
