"""Command-line front end: kernel inspection, sampling runs, phase scans,
spectral queries, reference-measure sampling, inequality suites, and report
rendering.

Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 flagged
inequality violation.  All numeric CSV output uses repr formatting and a
`# schema=1` header line so reruns under a fixed seed are byte-identical;
wall-clock timings live only in the JSON manifest.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from . import __version__
from .config import (chain_from_config, experiment_grids, kernel_from_config,
                     load_config, model_from_config, parse_config)
from .errors import (InequalityViolation, NumericError, PolaronError,
                     TuningError, ValidationError)
from .estimators import (batch_means, free_energy_rate, midpoint_mass,
                         occupation_fraction)
from .gaussref import BlockGaussianSpec, block_variance, build_precision, \
    sample_exact
from .inequalities import (run_all_suites, run_gci_suite,
                           run_inflation_suite, run_reweight_suite,
                           run_tail_suite)
from .kernels import (ExternalPotential, PairKernel, eval_W,
                      validate_assumptions)
from .sampler import ChainConfig, ModelSpec, mcmc_run
from .spectral import RadialGrid, ground_state, well_threshold

_SCHEMA_LINE = "# schema=1"


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_SCHEMA_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def cell_seed(master_seed, i, j, k):
    """Per-cell seed: SHA-256 of 'master:i:j:k', truncated to 63 bits."""
    digest = hashlib.sha256(f"{master_seed}:{i}:{j}:{k}".encode()).hexdigest()
    return int(digest[:16], 16) % (2 ** 63)


def _resolve_threads(args):
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("POLARON_THREADS", "")
    return max(1, int(env)) if env.isdigit() else 1


def _parse_floats(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse float list {text!r}") from exc


def _model_from_args(args) -> ModelSpec:
    blocks = {
        "d": args.d, "horizon": args.horizon, "n_steps": args.n_steps,
        "delta": args.delta, "alpha": args.alpha,
        "m_radius": "inf" if args.m_radius in (None, "inf")
        else float(args.m_radius),
        "k_radius": args.k_radius,
    }
    if args.delta > 0 or args.well_radius is not None:
        blocks["potential"] = {"family": "well",
                               "radius": args.well_radius or 1.0}
    if args.alpha > 0:
        blocks["kernel"] = {"family": args.kernel_family,
                            "width": args.kernel_width}
        blocks["grid"] = {"r_max": args.grid_r_max, "n_r": args.grid_n_r}
    cfg = parse_config({"model": blocks, "chain": {}})
    return model_from_config(cfg)


# ---------------------------------------------------------------------------
# kernel subcommand
# ---------------------------------------------------------------------------

def _build_kernel(args) -> PairKernel:
    if args.family == "gaussian-omega1":
        return PairKernel.gaussian_omega1(d=args.dimension,
                                          width=args.width,
                                          t_min=args.t_min)
    if args.family == "nelson3d":
        return PairKernel.nelson3d(gamma_width=args.width, t_min=args.t_min)
    raise ValidationError(f"unknown kernel family {args.family!r}")


def cmd_kernel_eval(args):
    kernel = _build_kernel(args)
    r_vals = _parse_floats(args.r)
    t_vals = _parse_floats(args.t)
    rows = []
    for t in t_vals:
        w = eval_W(kernel, np.asarray(r_vals), t)
        for r, v in zip(r_vals, np.atleast_1d(w)):
            rows.append((r, t, float(v)))
    if args.out:
        _write_csv(args.out, ["r", "t", "w"], rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(_SCHEMA_LINE)
        print("r,t,w")
        for row in rows:
            print(",".join(_fmt(v) for v in row))
    return 0


def cmd_kernel_validate(args):
    kernel = _build_kernel(args)
    report = validate_assumptions(kernel, xi=args.xi,
                                  envelope_radius=args.envelope_radius,
                                  envelope_time=args.envelope_time,
                                  t_max=args.t_max)
    print(f"radial monotone:      {'ok' if report.radial_monotone_ok else 'FAIL'}"
          f" (worst increase {report.radial_worst_violation:.3e})")
    print(f"quadratic envelope:   "
          f"{'ok' if report.quadratic_envelope_ok else 'FAIL'}"
          f" (xi={report.xi:g}, R={report.envelope_radius:g},"
          f" l*={report.envelope_time:g},"
          f" worst increase {report.quadratic_worst_violation:.3e})")
    print(f"long-time spill est.: {report.time_decay_estimate:.6e}")
    if not (report.radial_monotone_ok and report.quadratic_envelope_ok):
        raise NumericError("kernel assumption check failed")
    return 0


# ---------------------------------------------------------------------------
# sample subcommand
# ---------------------------------------------------------------------------

def _retained_rows(model, config, out):
    burn = config.burn_in if config.burn_in is not None \
        else config.sweeps // 5
    rows = []
    for idx in range(out.n_retained):
        sweep = burn + idx * config.thinning
        rows.append((sweep, out.ret_v[idx], out.ret_w[idx],
                     out.midpoint_in_k[idx], out.occupation[idx],
                     out.endpoint_radii[idx]))
    return rows


def cmd_sample(args):
    if args.config:
        cfg = load_config(args.config)
        model = model_from_config(cfg)
        chain = chain_from_config(cfg, seed=args.seed)
    else:
        model = _model_from_args(args)
        chain = ChainConfig(sweeps=args.sweeps, burn_in=args.burn_in,
                            thinning=args.thinning,
                            seed=args.seed if args.seed is not None else 0)
    out = mcmc_run(model, chain)
    occ = occupation_fraction(out)
    mid = midpoint_mass(out)
    header = ["sweep", "v_part", "w_part", "midpoint_in_K",
              "occupation_fraction", "endpoint_radius"]
    rows = _retained_rows(model, chain, out)
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {len(rows)} retained rows to {args.out}")
    for name, info in out.acceptance.items():
        print(f"acceptance[{name}]: {info['rate']:.4f} "
              f"({info['accepted']}/{info['attempted']})")
    print(f"occupation_fraction: {occ.value:.6f} +- {occ.std_error:.6f} "
          f"(n_eff {occ.n_effective:.0f})")
    print(f"midpoint_mass:       {mid.value:.6f} +- {mid.std_error:.6f} "
          f"(n_eff {mid.n_effective:.0f})")
    print(f"action drift:        {out.action_drift:.3e}")
    print(f"coverage misses:     {out.coverage_misses}")
    return 0


# ---------------------------------------------------------------------------
# scan subcommand
# ---------------------------------------------------------------------------

@dataclass
class ScanRow:
    i: int
    j: int
    k: int
    delta: float
    alpha: float
    horizon: float
    seed: int
    status: str
    occupation: float = float("nan")
    occupation_err: float = float("nan")
    midpoint: float = float("nan")
    midpoint_err: float = float("nan")
    free_energy: float = float("nan")
    free_energy_err: float = float("nan")
    mean_v: float = float("nan")
    mean_v_err: float = float("nan")
    acc_bridge: float = float("nan")
    acc_endpoint: float = float("nan")
    acc_reflect: float = float("nan")
    wall_time: float = 0.0
    cell_file: str = ""


@dataclass
class ScanResult:
    rows: List[ScanRow] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _run_cell(cfg, i, j, k, delta, alpha, horizon, out_dir):
    seed = cell_seed(cfg["master_seed"], i, j, k)
    row = ScanRow(i=i, j=j, k=k, delta=delta, alpha=alpha, horizon=horizon,
                  seed=seed, status="ok")
    t0 = time.perf_counter()
    try:
        model = model_from_config(cfg, delta=delta, alpha=alpha,
                                  horizon=horizon)
        chain = chain_from_config(cfg, seed=seed)
        out = mcmc_run(model, chain)
        occ = occupation_fraction(out)
        mid = midpoint_mass(out)
        mv, mv_se, _ = batch_means(out.ret_v)
        row.occupation, row.occupation_err = occ.value, occ.std_error
        row.midpoint, row.midpoint_err = mid.value, mid.std_error
        row.mean_v, row.mean_v_err = mv, mv_se
        row.acc_bridge = out.acceptance["bridge"]["rate"]
        row.acc_endpoint = out.acceptance["endpoint"]["rate"]
        row.acc_reflect = out.acceptance["reflect"]["rate"]
        cell_name = f"cell_d{i}_a{j}_T{k}.csv"
        _write_csv(Path(out_dir) / cell_name,
                   ["sweep", "v_part", "w_part", "midpoint_in_K",
                    "occupation_fraction", "endpoint_radius"],
                   _retained_rows(model, chain, out))
        row.cell_file = cell_name
    except PolaronError as exc:
        row.status = f"failed: {exc}"
    row.wall_time = time.perf_counter() - t0
    return row


def _attach_free_energy(rows, deltas, horizons):
    """Thermodynamic integration along the delta axis of the scan grid.

    Only possible when the grid starts at delta = 0; rows keep NaN otherwise.
    """
    if deltas.size < 2 or deltas[0] != 0.0:
        return
    by_cell = {(r.i, r.j, r.k): r for r in rows}
    n_alpha = 1 + max(r.j for r in rows)
    n_t = 1 + max(r.k for r in rows)
    for j in range(n_alpha):
        for k in range(n_t):
            col = [by_cell.get((i, j, k)) for i in range(deltas.size)]
            if any(r is None or r.status != "ok" for r in col):
                continue
            horizon = col[0].horizon
            means = np.array([r.mean_v for r in col])
            errs = np.array([r.mean_v_err for r in col])
            for top in range(deltas.size):
                if top == 0:
                    col[0].free_energy, col[0].free_energy_err = 0.0, 0.0
                    continue
                coef = np.zeros(top + 1)
                gaps = np.diff(deltas[: top + 1])
                coef[:-1] += 0.5 * gaps
                coef[1:] += 0.5 * gaps
                col[top].free_energy = float(
                    np.dot(coef, means[: top + 1])) / horizon
                col[top].free_energy_err = float(
                    np.sqrt(np.sum((coef * errs[: top + 1]) ** 2))) / horizon


_SCAN_HEADER = ["i", "j", "k", "delta", "alpha", "horizon", "seed", "status",
                "occupation", "occupation_err", "midpoint_mass",
                "midpoint_mass_err", "free_energy", "free_energy_err",
                "mean_v", "mean_v_err", "acc_bridge", "acc_endpoint",
                "acc_reflect"]


def run_scan(cfg, out_dir, threads=1, skip_kernel_check=False) -> ScanResult:
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    deltas, alphas, horizons = experiment_grids(cfg)
    kernel_check = "not-needed"
    if np.any(alphas > 0) and "kernel" in cfg["model"]:
        if skip_kernel_check:
            kernel_check = "skipped"
        else:
            dt = cfg["model"]["horizon"] / cfg["model"]["n_steps"]
            kernel = kernel_from_config(cfg["model"]["kernel"], dt)
            # gate on radial monotonicity; the quadratic envelope needs a
            # user-chosen xi and is a kernel-validate concern
            rep = validate_assumptions(kernel, xi=1e12, envelope_radius=2.0,
                                       envelope_time=1.0, t_max=10.0,
                                       n_t=60)
            if not rep.radial_monotone_ok:
                raise ValidationError(
                    "kernel failed the radial monotonicity check; rerun "
                    "with --skip-kernel-check to override")
            kernel_check = "passed"
    cells = [(i, j, k, float(d), float(a), float(T))
             for i, d in enumerate(deltas)
             for j, a in enumerate(alphas)
             for k, T in enumerate(horizons)]
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(
                lambda c: _run_cell(cfg, *c, out_dir=out_path), cells))
    else:
        rows = [_run_cell(cfg, *c, out_dir=out_path) for c in cells]
    rows.sort(key=lambda r: (r.i, r.j, r.k))
    _attach_free_energy(rows, deltas, horizons)

    scan_file = out_path / "scan.csv"
    _write_csv(scan_file, _SCAN_HEADER,
               [(r.i, r.j, r.k, r.delta, r.alpha, r.horizon, r.seed,
                 r.status.split(":")[0], r.occupation, r.occupation_err,
                 r.midpoint, r.midpoint_err, r.free_energy,
                 r.free_energy_err, r.mean_v, r.mean_v_err, r.acc_bridge,
                 r.acc_endpoint, r.acc_reflect) for r in rows])

    files = {"scan.csv": _sha256(scan_file)}
    for r in rows:
        if r.cell_file:
            files[r.cell_file] = _sha256(out_path / r.cell_file)
    manifest = {
        "schema": 1,
        "master_seed": cfg["master_seed"],
        "config": cfg,
        "kernel_check": kernel_check,
        "versions": {
            "polaronlab": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "cells": [{
            "indices": [r.i, r.j, r.k],
            "delta": r.delta, "alpha": r.alpha, "horizon": r.horizon,
            "seed": r.seed, "status": r.status,
            "wall_time_s": round(r.wall_time, 3),
            "file": r.cell_file,
        } for r in rows],
        "files": files,
    }
    with open(out_path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ScanResult(rows=rows, manifest=manifest)


def cmd_scan(args):
    if not args.config:
        raise ValidationError("scan requires --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["master_seed"] = int(args.seed)
    out_dir = args.out or cfg["output_dir"]
    result = run_scan(cfg, out_dir, threads=_resolve_threads(args),
                      skip_kernel_check=args.skip_kernel_check)
    n_fail = sum(1 for r in result.rows if r.status != "ok")
    print(f"scan complete: {len(result.rows)} cells, {n_fail} failed, "
          f"outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# spectral subcommand
# ---------------------------------------------------------------------------

def cmd_spectral(args):
    if args.well_threshold:
        thr = well_threshold(radius=args.well_radius or 1.0, mass=args.mass,
                             d=3)
        print(json.dumps({"well_threshold": thr}, indent=2))
        return 0
    potential = ExternalPotential.well(radius=args.well_radius or 1.0)
    grid = RadialGrid(r_max=args.r_max, n=args.nodes, d=args.d)
    res = ground_state(potential, args.delta, grid)
    payload = {
        "d": args.d, "delta": args.delta,
        "bound": bool(res.bound),
        "energy": res.energy,
        "residual": res.residual,
        "grid_r_max": res.grid.r_max, "grid_n": res.grid.n,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# gaussref subcommand
# ---------------------------------------------------------------------------

def cmd_gaussref(args):
    if args.beta_scan:
        betas = _parse_floats(args.beta_scan)
        if len(betas) < 2 or any(b <= 0 for b in betas):
            raise ValidationError("beta scan needs >= 2 positive values")
        vs = []
        for b in betas:
            spec = BlockGaussianSpec(beta=b, block_len=args.block_len,
                                     horizon=args.horizon, dt=args.dt)
            vs.append(block_variance(spec, which="middle"))
        slope = np.polyfit(np.log(betas), np.log(vs), 1)[0]
        for b, v in zip(betas, vs):
            print(f"beta={b:g}  block_variance={v!r}")
        print(f"log-log slope: {slope:.4f}")
        return 0
    spec = BlockGaussianSpec(beta=args.beta, block_len=args.block_len,
                             horizon=args.horizon, dt=args.dt)
    factor = build_precision(spec)
    paths = sample_exact(factor, d=args.d, seed=args.seed or 0,
                         n_paths=args.n_paths)
    if args.n_paths == 1:
        paths = [paths]
    v_first = block_variance(spec, which="first")
    v_mid = block_variance(spec, which="middle")
    print(f"block variance (first):  {v_first!r}")
    print(f"block variance (middle): {v_mid!r}")
    if args.out:
        rows = []
        for p_idx, path in enumerate(paths):
            for s_idx in range(path.points.shape[0]):
                coords = path.points[s_idx]
                rows.append((p_idx, s_idx, s_idx * spec.dt,
                             *[float(c) for c in coords]))
        header = ["path", "step", "t"] + [f"x_{c + 1}" for c in range(args.d)]
        _write_csv(args.out, header, rows)
        print(f"wrote {len(paths)} paths to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# inequality suites subcommand
# ---------------------------------------------------------------------------

def cmd_check_inequalities(args):
    seed = args.seed if args.seed is not None else 0
    kw = dict(seed=seed)
    if args.suite == "gci":
        reports = [run_gci_suite(args.gci_instances,
                                 n_samples=args.samples, **kw)]
    elif args.suite == "reweight":
        reports = [run_reweight_suite(args.reweight_instances,
                                      n_samples=args.samples, **kw)]
    elif args.suite == "tails":
        reports = [run_tail_suite(args.tail_instances,
                                  n_samples=max(args.samples, 100000), **kw)]
    elif args.suite == "inflation":
        reports = [run_inflation_suite(args.inflation_instances, **kw)]
    elif args.suite == "all":
        reports = run_all_suites(seed=seed,
                                 gci_instances=args.gci_instances,
                                 reweight_instances=args.reweight_instances,
                                 tail_instances=args.tail_instances,
                                 inflation_instances=args.inflation_instances,
                                 n_samples=args.samples)
    else:
        raise ValidationError(f"unknown suite {args.suite!r}")
    header = ["suite", "index", "dimension", "method", "lhs", "rhs",
              "margin", "error", "holds"]
    all_rows = []
    flagged = 0
    for rep in reports:
        for r in rep.rows:
            all_rows.append((r.suite, r.index, r.dimension, r.method,
                             r.lhs, r.rhs, r.margin, r.error, r.holds))
        flagged += rep.n_flagged
        print(f"suite {rep.name}: {len(rep.rows)} instances, "
              f"{rep.n_flagged} flagged")
    if args.out:
        out_path = Path(args.out)
        out_path.mkdir(parents=True, exist_ok=True)
        dest = out_path / "inequalities.csv"
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_SCHEMA_LINE + "\n")
            fh.write(",".join(header) + "\n")
            for row in all_rows:
                fh.write(",".join(
                    v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
        print(f"wrote {len(all_rows)} instance rows to {dest}")
    if flagged:
        raise InequalityViolation(f"{flagged} instance(s) flagged")
    return 0


# ---------------------------------------------------------------------------
# free-energy subcommand
# ---------------------------------------------------------------------------

def cmd_free_energy(args):
    if args.config:
        cfg = load_config(args.config)
        model = model_from_config(cfg)
        chain = chain_from_config(cfg, seed=args.seed)
        deltas, _, _ = experiment_grids(cfg)
    else:
        model = _model_from_args(args)
        chain = ChainConfig(sweeps=args.sweeps,
                            seed=args.seed if args.seed is not None else 0)
        deltas = np.linspace(0.0, args.delta_max, args.points)
    curve = free_energy_rate(model, deltas, chain)
    print(f"{'delta':>10} {'f':>14} {'f_err':>10} {'mean_v':>14} "
          f"{'mean_v_err':>10}")
    for i in range(curve.deltas.size):
        print(f"{curve.deltas[i]:>10.4f} {curve.values[i]:>14.6f} "
              f"{curve.errors[i]:>10.6f} {curve.integrand_means[i]:>14.4f} "
              f"{curve.integrand_errors[i]:>10.4f}")
    if np.any(curve.convexity_flags):
        print("warning: integrand decreased beyond 3 joint s.e. somewhere; "
              "chains may not be converged")
    if args.out:
        _write_csv(args.out,
                   ["delta", "f", "f_err", "mean_v", "mean_v_err"],
                   [(curve.deltas[i], curve.values[i], curve.errors[i],
                     curve.integrand_means[i], curve.integrand_errors[i])
                    for i in range(curve.deltas.size)])
        print(f"wrote curve to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# report subcommand
# ---------------------------------------------------------------------------

def _read_scan_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _SCHEMA_LINE:
        raise ValidationError(f"{path} is not a schema=1 CSV")
    header = lines[1].split(",")
    for ln in lines[2:]:
        if ln:
            rows.append(dict(zip(header, ln.split(","))))
    return rows


def cmd_report(args):
    scan_dir = Path(args.scan)
    csv_path = scan_dir / "scan.csv"
    if not csv_path.exists():
        raise ValidationError(f"no scan.csv under {scan_dir}")
    rows = _read_scan_csv(csv_path)
    cols = ["delta", "alpha", "horizon", "midpoint_mass",
            "midpoint_mass_err", "occupation", "occupation_err",
            "free_energy", "free_energy_err", "status"]
    widths = {c: max(len(c), 12) for c in cols}
    print(" ".join(c.rjust(widths[c]) for c in cols))
    for r in rows:
        out = []
        for c in cols:
            raw = r.get(c, "")
            if c == "status":
                out.append(("FAILED" if raw != "ok" else "ok")
                           .rjust(widths[c]))
                continue
            try:
                out.append(f"{float(raw):.6g}".rjust(widths[c]))
            except ValueError:
                out.append(str(raw).rjust(widths[c]))
        print(" ".join(out))
    if not rows:
        print("(no data rows)")
    if args.plots:
        _write_plots(rows, scan_dir)
    return 0


def _write_plots(rows, scan_dir):
    try:
        import matplotlib
    except ImportError:
        print("matplotlib not installed; skipping plots "
              "(pip install polaronlab[plots])")
        return
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    ok = [r for r in rows if r["status"] == "ok"]
    by_t = {}
    for r in ok:
        by_t.setdefault(r["horizon"], []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    for t_key, group in sorted(by_t.items()):
        group = sorted(group, key=lambda r: float(r["alpha"]))
        a = [float(r["alpha"]) for r in group]
        m = [float(r["midpoint_mass"]) for r in group]
        e = [float(r["midpoint_mass_err"]) for r in group]
        ax.errorbar(a, m, yerr=e, marker="o", label=f"T={t_key}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("midpoint mass")
    ax.legend()
    fig.tight_layout()
    dest = Path(scan_dir) / "midpoint_mass.svg"
    fig.savefig(dest)
    plt.close(fig)
    print(f"wrote {dest}")

    has_f = [r for r in ok if r.get("free_energy", "nan") != "nan"]
    if has_f:
        fig, ax = plt.subplots(figsize=(6, 4))
        by_a = {}
        for r in has_f:
            by_a.setdefault(r["alpha"], []).append(r)
        for a_key, group in sorted(by_a.items()):
            group = sorted(group, key=lambda r: float(r["delta"]))
            dvals = [float(r["delta"]) for r in group]
            fvals = [float(r["free_energy"]) for r in group]
            ax.plot(dvals, fvals, marker="o", label=f"alpha={a_key}")
        ax.set_xlabel("delta")
        ax.set_ylabel("free energy rate")
        ax.legend()
        fig.tight_layout()
        dest = Path(scan_dir) / "free_energy.svg"
        fig.savefig(dest)
        plt.close(fig)
        print(f"wrote {dest}")


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (or POLARON_THREADS)")
    p.add_argument("--out", help="output file or directory")


def _add_model_flags(p):
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=8.0)
    p.add_argument("--n-steps", type=int, default=256)
    p.add_argument("--well-radius", type=float, default=None)
    p.add_argument("--kernel-family", default="gaussian-omega1",
                   choices=["gaussian-omega1", "nelson3d"])
    p.add_argument("--kernel-width", type=float, default=1.0)
    p.add_argument("--grid-r-max", type=float, default=16.0)
    p.add_argument("--grid-n-r", type=int, default=600)
    p.add_argument("--m-radius", default=None,
                   help="endpoint ball radius or 'inf'")
    p.add_argument("--k-radius", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polaronlab",
        description="numerical laboratory for self-interacting Brownian "
                    "path measures")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    kern = sub.add_parser("kernel", help="pair-kernel evaluation and checks")
    ksub = kern.add_subparsers(dest="kernel_command", required=True)
    ke = ksub.add_parser("eval", help="tabulate W(r, t)")
    ke.add_argument("--family", default="gaussian-omega1",
                    choices=["gaussian-omega1", "nelson3d"])
    ke.add_argument("--width", type=float, default=1.0)
    ke.add_argument("--dimension", type=int, default=3)
    ke.add_argument("--t-min", type=float, default=0.0)
    ke.add_argument("--r", required=True, help="comma list of radii")
    ke.add_argument("--t", required=True, help="comma list of times")
    ke.add_argument("--out")
    ke.set_defaults(func=cmd_kernel_eval)
    kv = ksub.add_parser("validate", help="check kernel assumptions")
    kv.add_argument("--family", default="gaussian-omega1",
                    choices=["gaussian-omega1", "nelson3d"])
    kv.add_argument("--width", type=float, default=1.0)
    kv.add_argument("--dimension", type=int, default=3)
    kv.add_argument("--t-min", type=float, default=0.0)
    kv.add_argument("--xi", type=float, required=True)
    kv.add_argument("--envelope-radius", type=float, default=2.0)
    kv.add_argument("--envelope-time", type=float, default=1.0)
    kv.add_argument("--t-max", type=float, default=40.0)
    kv.set_defaults(func=cmd_kernel_validate)

    sa = sub.add_parser("sample", help="run one MCMC chain")
    _add_common(sa)
    _add_model_flags(sa)
    sa.add_argument("--sweeps", type=int, default=2000)
    sa.add_argument("--burn-in", type=int, default=None)
    sa.add_argument("--thinning", type=int, default=10)
    sa.set_defaults(func=cmd_sample)

    sc = sub.add_parser("scan", help="(delta, alpha, T) phase scan")
    _add_common(sc)
    sc.add_argument("--skip-kernel-check", action="store_true")
    sc.set_defaults(func=cmd_scan)

    sp = sub.add_parser("spectral", help="radial bound-state queries")
    sp.add_argument("--d", type=int, default=3, choices=[1, 3])
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--well-radius", type=float, default=None)
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--r-max", type=float, default=40.0)
    sp.add_argument("--nodes", type=int, default=2000)
    sp.add_argument("--well-threshold", action="store_true",
                    help="print the binding threshold only")
    sp.set_defaults(func=cmd_spectral)

    gr = sub.add_parser("gaussref", help="block-Gaussian reference measure")
    gr.add_argument("--beta", type=float, default=100.0)
    gr.add_argument("--block-len", type=float, default=1.0)
    gr.add_argument("--horizon", type=float, default=2.0)
    gr.add_argument("--dt", type=float, default=1.0 / 256.0)
    gr.add_argument("--d", type=int, default=1)
    gr.add_argument("--n-paths", type=int, default=1)
    gr.add_argument("--seed", type=int, default=None)
    gr.add_argument("--out")
    gr.add_argument("--beta-scan", default=None,
                    help="comma list of betas for the variance slope")
    gr.set_defaults(func=cmd_gaussref)

    ci = sub.add_parser("check-inequalities",
                        help="randomized inequality suites")
    ci.add_argument("--suite", default="all",
                    choices=["gci", "reweight", "tails", "inflation", "all"])
    ci.add_argument("--seed", type=int, default=None)
    ci.add_argument("--samples", type=int, default=100000)
    ci.add_argument("--gci-instances", type=int, default=200)
    ci.add_argument("--reweight-instances", type=int, default=50)
    ci.add_argument("--tail-instances", type=int, default=20)
    ci.add_argument("--inflation-instances", type=int, default=50)
    ci.add_argument("--out")
    ci.set_defaults(func=cmd_check_inequalities)

    fe = sub.add_parser("free-energy",
                        help="thermodynamic-integration curve")
    _add_common(fe)
    _add_model_flags(fe)
    fe.add_argument("--sweeps", type=int, default=2000)
    fe.add_argument("--delta-max", type=float, default=2.0)
    fe.add_argument("--points", type=int, default=5)
    fe.set_defaults(func=cmd_free_energy)

    rp = sub.add_parser("report", help="render a scan directory")
    rp.add_argument("--scan", required=True, help="scan output directory")
    rp.add_argument("--plots", action="store_true",
                    help="write SVG plots (needs matplotlib)")
    rp.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (TuningError, NumericError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except InequalityViolation as exc:
        print(f"inequality violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
