"""Command-line entry point: fkl <subcommand> --config <path> [--out DIR] [--threads K] [--verbose]."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import Config
from .errors import CertificateError, ConfigError, FieldFormatError, SolverError
from .grid import Field, _atomic_write_bytes, read_field, write_field
from .ground_state import GroundStateResult, certify_decay, certify_monotone_radial, residual, solve_Q
from .kirchhoff import build_U
from .linearized import (linearized_from_kirchhoff, spectrum, subspace_distance,
                         translation_mode)
from .manifest import RunManifest, content_hash, plain
from .semiclassical import (Semiclassical, SweepRow, concentration_sweep, expansion_constants,
                            fill_slopes, minimize_j, resolution_ok, sweep_point)
from .spectral import FracOperator, gns_quotient_values

log = logging.getLogger("fkl")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 1, 2, 3


# -- helpers ---------------------------------------------------------------------

def cache_dir() -> Path:
    env = os.environ.get("FKL_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "fkl"


def fmt(v) -> str:
    """Deterministic shortest round-trip text for numbers."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    _atomic_write_bytes(path, buf.getvalue().encode())


def write_xy(path: Path, xs, ys) -> None:
    lines = [f"{fmt(float(x))} {fmt(float(y))}\n" for x, y in zip(xs, ys)]
    _atomic_write_bytes(path, "".join(lines).encode())


class Outputs:
    """Tracks the files a command writes so its manifest can list them."""

    def __init__(self, root: Path):
        self.root = root
        self.files = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name


def ground_state(cfg: Config) -> GroundStateResult:
    """solve_Q with an on-disk cache keyed by the inputs' content hash."""
    base = cfg.model.base
    key = content_hash({"base": [base.s, base.p, base.dim], "grid": cfg.grid.describe(),
                        "solver": asdict(cfg.solver), "version": __version__})
    root = cache_dir() / key
    fpath, mpath = root / "Q.field", root / "Q.yaml"
    if fpath.exists() and mpath.exists():
        try:
            Q = read_field(fpath)
            meta = yaml.safe_load(mpath.read_text())
            if Q.grid == cfg.grid:
                r2, rinf = residual(base, Q)
                log.info("ground state loaded from cache %s", root)
                return GroundStateResult(
                    Q=Q, residual_l2=r2, residual_linf=rinf,
                    j_value=gns_quotient_values(FracOperator(Q.grid, base.s), Q.values, base.p),
                    decay_certificate=certify_decay(Q, base), iterations=meta["iterations"],
                    petviashvili_iterations=meta["petviashvili_iterations"],
                    newton_iterations=meta["newton_iterations"],
                    monotone=certify_monotone_radial(Q))
        except (FieldFormatError, OSError, KeyError, TypeError, yaml.YAMLError):
            log.warning("ignoring unreadable cache entry %s", root)
    res = solve_Q(base, cfg.grid, cfg.solver)
    try:
        root.mkdir(parents=True, exist_ok=True)
        write_field(res.Q, fpath)
        _atomic_write_bytes(mpath, yaml.safe_dump({
            "iterations": res.iterations,
            "petviashvili_iterations": res.petviashvili_iterations,
            "newton_iterations": res.newton_iterations}).encode())
    except OSError as exc:
        log.warning("could not write cache entry: %s", exc)
    return res


def _gs_results(res: GroundStateResult) -> dict:
    c = res.decay_certificate
    return {
        "residual_l2": res.residual_l2, "residual_linf": res.residual_linf,
        "j_value": res.j_value, "iterations": res.iterations,
        "petviashvili_iterations": res.petviashvili_iterations,
        "newton_iterations": res.newton_iterations,
        "decay_certificate": {"C1": c.C1, "C2": c.C2, "window": list(c.window),
                              "ratio_bound": c.ratio_bound, "passed": c.passed},
        "monotone_radial": res.monotone,
        "Q_max": float(np.max(res.Q.values)),
    }


def _manifest(cfg: Config, command: str, outs: Outputs, results: dict, t0: float,
              sections=("model", "grid", "solver")) -> None:
    man = RunManifest(
        command=command,
        params={k: cfg.sections[k] for k in sections if k not in ("grid", "solver")},
        grid=cfg.grid.describe(),
        solver=asdict(cfg.solver),
        results=results,
        wall_clock_seconds=time.perf_counter() - t0,
    )
    name = f"{command}.manifest.yaml"
    man.outputs = list(outs.files)
    man.write(outs.root / name)


def _profile_plots(outs: Outputs, Q: Field):
    g = Q.grid
    if g.dim == 1:
        x, q = g.axis, Q.values
    else:
        c = g.n // 2
        x, q = g.axis, Q.values[:, c]
    write_xy(outs.path("plot_Q_profile.dat"), x, q)
    mask = (x >= 1.0) & (x <= g.L / 2)
    write_xy(outs.path("plot_Q_tail.dat"), np.log(x[mask]), np.log(q[mask]))


# -- commands ----------------------------------------------------------------------

def cmd_ground_state(cfg: Config, outs: Outputs) -> int:
    t0 = time.perf_counter()
    res = ground_state(cfg)
    write_field(res.Q, outs.path("Q.field"))
    _profile_plots(outs, res.Q)
    ok = res.decay_certificate.passed and res.monotone
    _manifest(cfg, "ground-state", outs, {**_gs_results(res), "certificates_passed": ok}, t0)
    log.info("Q residual %.3e, J(Q) = %.12g", res.residual_l2, res.j_value)
    return EXIT_OK if ok else EXIT_CERT


def cmd_scale(cfg: Config, outs: Outputs) -> int:
    t0 = time.perf_counter()
    res = ground_state(cfg)
    kp = cfg.model
    sr = build_U(res.Q, kp)
    write_field(sr.U, outs.path("U.field"))
    results = {
        "E0": sr.E0, "gradQ_sq": sr.gradQ_sq,
        "closed_form_E0": (kp.a + kp.b * kp.m ** (2 / (kp.p - 1)) * sr.gradQ_sq
                           if 2 * kp.s == kp.dim else None),
        "kirchhoff_residual_l2": sr.kirchhoff_residual[0],
        "kirchhoff_residual_linf": sr.kirchhoff_residual[1],
        "uniqueness_certificate": sr.uniqueness_certificate,
        "roots_bracketed": [list(r) for r in sr.roots],
        "self_consistency": sr.self_consistency,
        "U_grid": sr.U.grid.describe(),
        "ground_state": _gs_results(res),
    }
    ok = sr.uniqueness_certificate
    b_list = cfg.sections["scale"].get("b_list")
    if b_list:
        rows = []
        for b in b_list:
            kb = type(kp)(kp.a, b, kp.m, kp.base)
            s_b = build_U(res.Q, kb)
            rows.append([b, s_b.E0, s_b.gradQ_sq, int(s_b.uniqueness_certificate),
                         s_b.kirchhoff_residual[0], s_b.self_consistency])
            ok = ok and s_b.uniqueness_certificate
        write_csv(outs.path("scale_sweep.csv"),
                  ["b", "E0", "gradQ_sq", "certificate", "kirchhoff_residual_l2",
                   "self_consistency"], rows)
        results["E0_increasing_in_b"] = bool(
            np.all(np.diff([r[1] for r in sorted(rows)]) > 0)) if len(rows) > 1 else True
    _manifest(cfg, "scale", outs, results, t0, ("model", "scale"))
    return EXIT_OK if ok else EXIT_CERT


def cmd_spectrum(cfg: Config, outs: Outputs) -> int:
    t0 = time.perf_counter()
    res = ground_state(cfg)
    kp = cfg.model
    sr = build_U(res.Q, kp)
    sp = cfg.sections["spectrum"]
    op = linearized_from_kirchhoff(sr.U, kp, sp["kind"])
    rep = spectrum(op, sp["sector"], sp["k"], sp["method"])
    order = np.argsort(np.abs(rep.eigenvalues), kind="stable")
    rows = [[int(i), rep.eigenvalues[i], abs(rep.eigenvalues[i]),
             int(abs(rep.eigenvalues[i]) < rep.kernel_tol)] for i in order]
    write_csv(outs.path("spectrum.csv"), ["index", "eigenvalue", "abs_eigenvalue", "in_kernel"], rows)
    write_xy(outs.path("plot_eigenvalues.dat"), np.arange(len(rep.eigenvalues)), rep.eigenvalues)
    if sp["dump_fields"].lower() in ("1", "yes", "true"):
        for i, f in enumerate(rep.eigenfields):
            write_field(f, outs.path(f"eigenfield_{i:02d}.field"))
    N = kp.dim
    expected = {"full": N, "even": 0, "odd": 1}[rep.sector]
    modes = [translation_mode(sr.U, kp.s, i) for i in range(N)]
    dist = subspace_distance(rep.kernel_fields(), modes) if rep.sector == "full" else None
    ok = rep.kernel_dim == expected
    results = {
        "sector": rep.sector, "kind": op.kind, "eigenvalues": rep.eigenvalues,
        "kernel_dim": rep.kernel_dim, "expected_kernel_dim": expected, "gap": rep.gap,
        "kernel_tol": rep.kernel_tol, "negative_count": rep.negative_count,
        "kernel_vs_translation_modes": dist, "c": op.c, "E0": sr.E0,
        "certificates_passed": ok,
    }
    _manifest(cfg, "spectrum", outs, results, t0, ("model", "spectrum"))
    return EXIT_OK if ok else EXIT_CERT


def _semiclassical_setup(cfg: Config) -> Semiclassical:
    V = cfg.potential()
    kp = cfg.semiclassical_model()
    res = ground_state(cfg)
    sr = build_U(res.Q, kp)
    return Semiclassical(sr.U, kp, V)


def _dx(cfg: Config, eps_values) -> float:
    sc = cfg.sections["semiclassical"]
    return sc.get("dx", min(eps_values) / 32.0)


def cmd_semiclassical(cfg: Config, outs: Outputs) -> int:
    t0 = time.perf_counter()
    scs = cfg.sections["semiclassical"]
    if "eps" not in scs:
        raise ConfigError("[semiclassical] eps is required for the semiclassical command")
    eps = scs["eps"]
    dx = _dx(cfg, [eps])
    if not resolution_ok(eps, dx):
        raise ConfigError(f"eps={eps} fails the resolution guard for dx={dx}")
    sc = _semiclassical_setup(cfg)
    mr = minimize_j(sc, eps, scs.get("delta"))
    d = mr.run.diagnostics
    write_field(mr.run.phi, outs.path("phi.field"))
    if sc.U.grid.dim == 1:
        ys = [y[0] for y, _ in mr.scan]
        write_xy(outs.path("plot_j_curve.dat"), ys, [j for _, j in mr.scan])
    else:
        # two-column slice through x0 along the first axis, full scan as CSV
        x0 = sc.V.x0
        line = [(y[0], j) for y, j in mr.scan if abs(y[1] - x0[1]) < 1e-12]
        write_xy(outs.path("plot_j_curve.dat"), [a for a, _ in line], [j for _, j in line])
        write_csv(outs.path("j_scan.csv"), ["y1", "y2", "j"], [[y[0], y[1], j] for y, j in mr.scan])
    const = expansion_constants(sc.U, sc.kp)
    N = sc.U.grid.dim
    results = {
        "eps": eps, "y_eps": list(mr.y_eps), "j_value": mr.j_value, "interior": mr.interior,
        "A": const.A, "B": const.B, "alpha": sc.alpha,
        "phi_norm_eps": d["phi_norm_eps"],
        "phi_norm_over_eps_halfN": d["phi_norm_eps"] / eps ** (N / 2),
        "residual_over_eps_halfN": d["residual_l2x"] / eps ** (N / 2),
        "projected_gradient": d["projected_gradient"],
        "contraction_iterations": d["iterations"], "multipliers": d["multipliers"],
        "evaluations": mr.evaluations,
    }
    _manifest(cfg, "semiclassical", outs, results, t0, ("model", "potential", "semiclassical"))
    return EXIT_OK if mr.interior else EXIT_CERT


SWEEP_HEADER = ["eps", "y", "phi_norm_eps", "phi_norm_over_eps_halfN", "j_value",
                "I_residual_slope", "status"]


def _sweep_csv_rows(rows):
    out = []
    for r in rows:
        y = " ".join(fmt(float(c)) for c in r.y) if r.y else ""
        if r.status != "OK":
            out.append([r.eps, y, "", "", "", "", r.status])
        else:
            out.append([r.eps, y, r.phi_norm_eps, r.phi_norm_over_eps_halfN, r.j_value,
                        r.I_residual_slope, r.status])
    return out


def cmd_sweep(cfg: Config, outs: Outputs, threads: int = 1) -> int:
    t0 = time.perf_counter()
    scs = cfg.sections["semiclassical"]
    eps_list = list(scs.get("eps_list", ()))
    if not eps_list:
        raise ConfigError("[semiclassical] eps_list is required for the sweep command")
    dx = _dx(cfg, eps_list)
    sc = _semiclassical_setup(cfg)
    rows, failed = [], []
    pool = ThreadPoolExecutor(max_workers=max(1, threads)) if threads > 1 else None
    try:
        if pool:
            futs = [pool.submit(sweep_point, sc, e, dx, scs.get("delta")) for e in eps_list]
        for i, e in enumerate(eps_list):
            try:
                rows.append(futs[i].result() if pool else sweep_point(sc, e, dx, scs.get("delta")))
            except SolverError as exc:
                log.error("sweep point eps=%g failed: %s", e, exc)
                rows.append(SweepRow(e, "FAILED"))
                failed.append((e, str(exc)))
    finally:
        if pool:
            pool.shutdown()
    fill_slopes(rows)
    skipped = [r.eps for r in rows if r.status == "SKIPPED"]
    for e in skipped:
        log.warning("eps=%g below the resolution guard (dx=%g): row SKIPPED", e, dx)
    write_csv(outs.path("sweep.csv"), SWEEP_HEADER, _sweep_csv_rows(rows))
    ok_rows = [r for r in rows if r.status == "OK"]
    write_xy(outs.path("plot_phi_ratio.dat"), [r.eps for r in ok_rows],
             [r.phi_norm_over_eps_halfN for r in ok_rows])
    N = sc.U.grid.dim
    ratios = [r.phi_norm_over_eps_halfN for r in ok_rows]
    const = expansion_constants(sc.U, sc.kp)
    results = {
        "A": const.A, "B": const.B, "alpha": sc.alpha, "dx": dx,
        "skipped": skipped, "failed": [list(f) for f in failed],
        "normalized_corrector_decreasing": bool(np.all(np.diff(ratios) < 0)) if len(ratios) > 1 else True,
        "rows": [{"eps": r.eps, "status": r.status, "y": list(r.y),
                  "interior": r.interior, "residual_over_eps_halfN": r.residual_over_eps_halfN,
                  "I_residual": r.I_residual} for r in rows],
        "dim": N,
    }
    if not results["normalized_corrector_decreasing"]:
        log.warning("normalized corrector column is not decreasing; refine the grid (larger n or L)")
    _manifest(cfg, "sweep", outs, results, t0, ("model", "potential", "semiclassical"))
    return EXIT_SOLVER if failed else EXIT_OK


COMMANDS = {
    "ground-state": cmd_ground_state,
    "scale": cmd_scale,
    "spectrum": cmd_spectrum,
    "semiclassical": cmd_semiclassical,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with config errors; 2 is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fkl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fkl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI-style run configuration")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.from_file(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out or cfg.sections["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        outs = Outputs(out)
        fn = COMMANDS[args.command]
        if args.command == "sweep":
            return fn(cfg, outs, args.threads)
        return fn(cfg, outs)
    except ConfigError as exc:
        print(f"fkl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"fkl: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CertificateError as exc:
        print(f"fkl: certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
