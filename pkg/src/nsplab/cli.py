"""Command-line entry point: steady, simulate, verify-inequalities, sweep.

Exit codes: 0 success, 2 config/parameter error, 3 certificate or verdict
failure, 4 runtime abort (vacuum / non-finite values).  All randomness flows
from the single seed recorded in the outputs; CSV values are written with
full round-trip precision so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import itertools
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import energy as energy_mod
from . import ineqlab
from .config import AppConfig, parse_config
from .errors import (NsplabError, ParameterError, SimulationAbort,
                     VacuumError)
from .evolve import SimConfig, run_simulation
from .grids import build_radial_grid
from .steady import (check_subsuper, compatibility_residual, make_profile,
                     solve_steady_monotone, steady_regularity_report,
                     subsolution_phi, supersolution_phi, write_profile)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERDICT = 3
EXIT_RUNTIME = 4

CSV_COLUMNS = ("t", "E", "D", "D_no_qtt", "mass", "E_basic",
               "identity_residual", "min_density")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _series_csv(path: Path, series: energy_mod.TimeSeries) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for s in series.samples:
        lines.append(",".join(_fmt(getattr(s, c)) for c in CSV_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _build_grid(cfg: AppConfig):
    d = cfg.domain
    return build_radial_grid(d["r_inner"], d["r_outer"], d["n_cells"],
                             d["stretch"])


def _build_steady(cfg: AppConfig, grid):
    st = cfg.steady
    gamma = cfg.fluid.gamma
    profile = make_profile(st["profile"], cfg.fluid.c_star, st["amplitude"],
                           grid, envelope_c0=st["envelope_c0"],
                           envelope_eps=st["envelope_eps"],
                           gamma=gamma if st["profile"] == "general_gamma_envelope"
                           else None)
    return profile, solve_steady_monotone(gamma, profile, grid,
                                          tol=st["tol"],
                                          max_iter=st["max_iter"])


def cmd_steady(cfg: AppConfig, outdir: Path) -> int:
    t0 = time.perf_counter()
    grid = _build_grid(cfg)
    gamma = cfg.fluid.gamma
    profile, steady = _build_steady(cfg, grid)

    sub_cert = check_subsuper(subsolution_phi(gamma, grid), "sub", gamma,
                              profile, tol=1e-8)
    if profile.kind == "general_gamma_envelope" or gamma > 2.0:
        phi_super = supersolution_phi(gamma, cfg.fluid.c_star, grid,
                                      envelope_c0=cfg.steady["envelope_c0"],
                                      envelope_eps=cfg.steady["envelope_eps"])
    else:
        phi_super = supersolution_phi(gamma, cfg.fluid.c_star, grid)
    super_cert = check_subsuper(phi_super, "super", gamma, profile, tol=1e-8)

    report = steady_regularity_report(steady, grid)
    residual_pass = steady.residual_elliptic <= 1e-6

    write_profile(steady.rho_tilde, outdir / "rho_tilde.txt")
    write_profile(steady.phi_tilde, outdir / "phi_tilde.txt")

    ok = (steady.bounds_ok and residual_pass and sub_cert.passed
          and super_cert.passed and report.stable_under_refinement
          and report.stable_under_widening)
    payload = {
        "gamma": gamma,
        "profile": profile.kind,
        "amplitude": profile.amplitude,
        "bounds_ok": steady.bounds_ok,
        "residual_elliptic": steady.residual_elliptic,
        "compatibility_residual": compatibility_residual(steady),
        "residual_pass": residual_pass,
        "iterations": [steady.iterations_super, steady.iterations_sub],
        "limit_gap": steady.limit_gap,
        "monotonicity_defect": steady.monotonicity_defect,
        "subsolution_certificate": asdict(sub_cert),
        "supersolution_certificate": asdict(super_cert),
        "regularity_norms": report.norms,
        "regularity_refined": report.refined_norms,
        "regularity_widened": report.widened_norms,
        "stable_under_refinement": report.stable_under_refinement,
        "stable_under_widening": report.stable_under_widening,
        "all_pass": ok,
        "seed": cfg.seed,
        "wall_time_s": time.perf_counter() - t0,
    }
    _write_json(outdir / "certificate.json", payload)
    return EXIT_OK if ok else EXIT_VERDICT


def _sim_config(cfg: AppConfig, grid, steady, checkpoint_dir=None) -> SimConfig:
    ev = cfg.evolve
    return SimConfig(params=cfg.fluid, grid=grid, steady=steady,
                     delta=ev["delta"], t_end=ev["t_end"], dt=ev["dt"],
                     sponge_width=ev["sponge_width"],
                     sponge_rate=ev["sponge_rate"],
                     output_stride=ev["output_stride"],
                     init_kind=ev["init_kind"], mode=ev["mode"],
                     pressure=ev["pressure"], coupling=ev["coupling"],
                     viscosity=ev["viscosity"], margin=ev["margin"],
                     vacuum_floor=ev["vacuum_floor"],
                     checkpoint_dir=checkpoint_dir,
                     digest_extra=hashlib.sha256(
                         cfg.canonical.encode()).hexdigest())


def _summarize(series: energy_mod.TimeSeries, cfg: AppConfig,
               wall: float, failure_time=None) -> dict:
    samples = series.samples
    e0 = samples[0].E if samples else 0.0
    mass0 = samples[0].mass if samples else 0.0
    drift = max(abs(s.mass - mass0) for s in samples) if samples else 0.0
    out = {
        "config_digest": series.config_digest,
        "dt": series.dt,
        "n_samples": len(samples),
        "c_visc": series.c_visc,
        "E0": e0,
        "mass_drift": drift,
        "seed": cfg.seed,
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    if failure_time is not None:
        out["failure_time"] = failure_time
        out["verdict"] = "ABORTED"
    elif series.verdict is None:
        out["verdict"] = "SKIPPED (zero initial energy)"
    else:
        v = series.verdict
        out["verdict"] = "PASS" if v.passed else "FAIL"
        out["sup_ratio_E"] = v.sup_ratio_E
        out["sup_ratio_quadratic"] = v.sup_ratio_quadratic
        out["sup_ratio_quadratic_with_qtt"] = v.sup_ratio_quadratic_with_qtt
        out["margin"] = v.margin
        out["c_fit"] = v.c_fit
        if len(samples) >= 3:
            out["lemma_remainder_kappa"] = energy_mod.lemma_remainder_constant(
                series)
    return out


def cmd_simulate(cfg: AppConfig, outdir: Path) -> int:
    t0 = time.perf_counter()
    grid = _build_grid(cfg)
    _, steady = _build_steady(cfg, grid)
    checkpoint_dir = None
    if cfg.evolve["checkpoints"]:
        checkpoint_dir = outdir / "checkpoints"
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_dir = str(checkpoint_dir)
    sim = _sim_config(cfg, grid, steady, checkpoint_dir)
    try:
        series = run_simulation(sim)
    except SimulationAbort as exc:
        wall = time.perf_counter() - t0
        if exc.series is not None:
            _series_csv(outdir / "series.csv", exc.series)
            _write_json(outdir / "summary.json",
                        _summarize(exc.series, cfg, wall,
                                   failure_time=exc.t_fail))
        return EXIT_RUNTIME
    except VacuumError:
        _write_json(outdir / "summary.json",
                    {"verdict": "ABORTED", "failure_time": 0.0,
                     "seed": cfg.seed,
                     "wall_time_s": time.perf_counter() - t0})
        return EXIT_RUNTIME
    wall = time.perf_counter() - t0
    _series_csv(outdir / "series.csv", series)
    _write_json(outdir / "summary.json", _summarize(series, cfg, wall))
    if series.verdict is not None and not series.verdict.passed:
        return EXIT_VERDICT
    return EXIT_OK


def cmd_verify_inequalities(cfg: AppConfig, outdir: Path) -> int:
    t0 = time.perf_counter()
    iq = cfg.ineqlab
    d = cfg.domain
    seed = cfg.seed
    sgrid = ineqlab.build_spherical_grid(d["r_inner"], d["r_outer"],
                                         iq["nr"], iq["ntheta"], iq["nphi"])
    rgrid = _build_grid(cfg)
    reports = {
        "div_curl": ineqlab.div_curl_report(sgrid, iq["n_fields"], seed,
                                            iq["modes"]),
        "trace_scaling": ineqlab.verify_trace_scaling(
            r_values=(d["r_inner"], 2 * d["r_inner"], 4 * d["r_inner"]),
            outer_factor=iq["trace_outer_factor"], nr=iq["nr"],
            ntheta=iq["ntheta"], nphi=iq["nphi"], seed=seed,
            modes=iq["modes"]),
        "boundary_pairing": ineqlab.boundary_pairing_report(
            sgrid, iq["n_fields"], iq["n_scalars"], seed, iq["modes"],
            allowance=iq["allowance"]),
        "sobolev_l6": ineqlab.sobolev_l6_report(sgrid, iq["n_fields"], seed,
                                                iq["modes"]),
        "lame_gradient_case": ineqlab.lame_report(
            rgrid, iq["n_lame"], seed, mu=cfg.fluid.mu,
            lambda_=cfg.fluid.lambda_),
        "poisson_regularity": ineqlab.poisson_regularity_report(
            rgrid, iq["n_fields"], seed),
    }
    ok = all(r.passed for r in reports.values())
    payload = {name: r.to_dict() for name, r in reports.items()}
    payload["seed"] = seed
    payload["grid"] = {"nr": iq["nr"], "ntheta": iq["ntheta"],
                       "nphi": iq["nphi"], "r_inner": d["r_inner"],
                       "r_outer": d["r_outer"]}
    payload["all_pass"] = ok
    payload["wall_time_s"] = time.perf_counter() - t0
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    _write_json(outdir / "inequalities.json", payload)
    return EXIT_OK if ok else EXIT_VERDICT


SWEEP_COLUMNS = ("gamma", "delta", "n_cells", "r_max", "E0", "sup_ratio_E",
                 "sup_ratio_quadratic", "c_fit", "mass_drift",
                 "steady_residual", "steady_compat_residual", "verdict_pass")


def _sweep_row(raw_text: str, base_overrides: list[str], seed: int,
               row_dir: Path, gamma, delta, n_cells, r_max):
    overrides = list(base_overrides) + [
        f"fluid.gamma={gamma}", f"evolve.delta={delta}",
        f"domain.n_cells={n_cells}", f"domain.r_outer={r_max}"]
    sub_cfg = parse_config(raw_text, overrides=overrides, seed=seed)
    row_dir.mkdir(parents=True, exist_ok=True)
    grid = _build_grid(sub_cfg)
    _, steady = _build_steady(sub_cfg, grid)
    sim = _sim_config(sub_cfg, grid, steady)
    row = {"gamma": gamma, "delta": delta, "n_cells": n_cells, "r_max": r_max,
           "steady_residual": steady.residual_elliptic,
           "steady_compat_residual": compatibility_residual(steady),
           "E0": 0.0, "sup_ratio_E": 0.0, "sup_ratio_quadratic": 0.0,
           "c_fit": 0.0, "mass_drift": 0.0, "verdict_pass": 0.0,
           "aborted": False}
    try:
        series = run_simulation(sim)
    except SimulationAbort as exc:
        if exc.series is not None:
            _series_csv(row_dir / "series.csv", exc.series)
        row["aborted"] = True
        return row
    _series_csv(row_dir / "series.csv", series)
    v = series.verdict
    row.update({
        "E0": series.samples[0].E,
        "sup_ratio_E": v.sup_ratio_E if v else 0.0,
        "sup_ratio_quadratic": v.sup_ratio_quadratic if v else 0.0,
        "c_fit": v.c_fit if v else 0.0,
        "mass_drift": max(abs(s.mass - series.samples[0].mass)
                          for s in series.samples),
        "verdict_pass": 1.0 if (v is None or v.passed) else 0.0,
    })
    return row


def cmd_sweep(cfg: AppConfig, outdir: Path, raw_text: str,
              base_overrides: list[str]) -> int:
    sw = cfg.sweep
    gammas = sw["gamma"] or [cfg.fluid.gamma]
    deltas = sw["delta"] or [cfg.evolve["delta"]]
    cells = sw["n_cells"] or [cfg.domain["n_cells"]]
    rmaxes = sw["r_max"] or [cfg.domain["r_outer"]]
    rows = list(itertools.product(gammas, deltas, cells, rmaxes))

    env_threads = os.environ.get("NSP_THREADS")
    max_workers = int(env_threads) if env_threads else min(8, os.cpu_count() or 1)
    max_workers = max(1, max_workers)

    results = [None] * len(rows)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {}
        for i, (g, dl, nc, rm) in enumerate(rows):
            row_dir = outdir / f"row_{i:03d}"
            futures[pool.submit(_sweep_row, raw_text, base_overrides,
                                cfg.seed, row_dir, g, dl, nc, rm)] = i
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()

    lines = [",".join(SWEEP_COLUMNS)]
    for row in results:
        lines.append(",".join(_fmt(row[c]) for c in SWEEP_COLUMNS))
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if any(row["aborted"] for row in results):
        return EXIT_RUNTIME
    all_pass = all(row["verdict_pass"] == 1.0 for row in results)
    return EXIT_OK if all_pass else EXIT_VERDICT


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsplab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("steady", "simulate", "verify-inequalities", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="S.K=V",
                        help="override a config value (repeatable)")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed overriding [output] seed")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, overrides=args.set, seed=args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "steady":
            return cmd_steady(cfg, outdir)
        if args.command == "simulate":
            return cmd_simulate(cfg, outdir)
        if args.command == "verify-inequalities":
            return cmd_verify_inequalities(cfg, outdir)
        return cmd_sweep(cfg, outdir, text, args.set)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationAbort, VacuumError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except NsplabError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
