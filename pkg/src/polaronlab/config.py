"""JSON run-configuration loading, schema validation, and spec builders.

A run configuration has a required model block and chain block plus an
optional experiment block with scan grids.  The JSON schema shipped with
the package is the single source of truth for field names and types.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np
import jsonschema

from .errors import ValidationError
from .kernels import ExternalPotential, KernelGrid, PairKernel
from .sampler import ChainConfig, ModelSpec

_DEFAULT_GRID_R_MAX = 16.0
_DEFAULT_GRID_N_R = 600


def _schema():
    ref = resources.files("polaronlab") / "schemas" / "run_config.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def parse_config(raw: dict) -> dict:
    """Validate a configuration dict against the schema, fill defaults."""
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"configuration invalid: {exc.message}") from exc
    cfg = json.loads(json.dumps(raw))  # deep copy, JSON-clean
    cfg.setdefault("master_seed", 0)
    cfg.setdefault("output_dir", "runs")
    model = cfg["model"]
    model.setdefault("delta", 0.0)
    model.setdefault("alpha", 0.0)
    model.setdefault("m_radius", "inf")
    model.setdefault("k_radius", 1.0)
    cfg.setdefault("chain", {})
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"configuration is not valid JSON: {exc}") \
                from exc
    return parse_config(raw)


def potential_from_config(block) -> ExternalPotential:
    family = block["family"]
    if family == "well":
        return ExternalPotential.well(radius=block.get("radius", 1.0))
    if family == "table":
        if "r_nodes" not in block or "values" not in block:
            raise ValidationError("table potential needs r_nodes and values")
        return ExternalPotential.from_table(np.asarray(block["r_nodes"]),
                                            np.asarray(block["values"]))
    raise ValidationError(f"unknown potential family {family!r}")


def kernel_from_config(block, dt) -> PairKernel:
    family = block["family"]
    t_min = block.get("t_min", 1e-3 * dt)
    if family == "gaussian-omega1":
        return PairKernel.gaussian_omega1(d=3, width=block.get("width", 1.0),
                                          t_min=t_min)
    if family == "nelson3d":
        return PairKernel.nelson3d(gamma_width=block.get("width", 1.0),
                                   t_min=t_min,
                                   quad_nodes=block.get("quad_nodes", 1200))
    raise ValidationError(f"unknown kernel family {family!r}")


def model_from_config(cfg: dict, *, delta=None, alpha=None, horizon=None,
                      n_steps=None) -> ModelSpec:
    """Build a ModelSpec from a parsed config, with optional overrides.

    The kernel grid's time axis is aligned to the step grid so pair-table
    rows land exactly on the lag times.
    """
    m = cfg["model"]
    d = m["d"]
    delta = m["delta"] if delta is None else float(delta)
    alpha = m["alpha"] if alpha is None else float(alpha)
    horizon = m["horizon"] if horizon is None else float(horizon)
    n_steps = m["n_steps"] if n_steps is None else int(n_steps)
    dt = horizon / n_steps
    m_radius = np.inf if m["m_radius"] == "inf" else float(m["m_radius"])
    potential = None
    if "potential" in m:
        potential = potential_from_config(m["potential"])
    elif delta > 0:
        raise ValidationError("delta > 0 requires a potential block")
    kernel = None
    grid = None
    if alpha > 0:
        if "kernel" not in m:
            raise ValidationError("alpha > 0 requires a kernel block")
        kernel = kernel_from_config(m["kernel"], dt)
        gblock = m.get("grid", {})
        grid = KernelGrid(kernel,
                          r_max=gblock.get("r_max", _DEFAULT_GRID_R_MAX),
                          t_max=horizon,
                          n_r=gblock.get("n_r", _DEFAULT_GRID_N_R),
                          n_t=n_steps + 1)
    return ModelSpec(d=d, delta=delta, alpha=alpha, horizon=horizon,
                     n_steps=n_steps, potential=potential, kernel=kernel,
                     grid=grid, m_radius=m_radius, k_radius=m["k_radius"])


def chain_from_config(cfg: dict, *, seed=None, sweeps=None) -> ChainConfig:
    c = cfg.get("chain", {})
    w = c.get("weights", {})
    return ChainConfig(
        sweeps=c.get("sweeps", 2000) if sweeps is None else int(sweeps),
        burn_in=c.get("burn_in"),
        thinning=c.get("thinning", 10),
        moves_per_sweep=c.get("moves_per_sweep"),
        bridge_weight=w.get("bridge", 0.85),
        endpoint_weight=w.get("endpoint", 0.10),
        reflect_weight=w.get("reflect", 0.05),
        block_min=c.get("block_min", 2),
        block_max=c.get("block_max"),
        seed=cfg["master_seed"] if seed is None else int(seed),
        keep_paths=c.get("keep_paths", False),
    )


def experiment_grids(cfg: dict):
    """Scan grids (deltas, alphas, horizons) with model-block fallbacks."""
    exp = cfg.get("experiment", {})
    m = cfg["model"]
    deltas = exp.get("delta_grid", [m["delta"]])
    alphas = exp.get("alpha_grid", [m["alpha"]])
    horizons = exp.get("horizon_grid", [m["horizon"]])
    return (np.asarray(deltas, dtype=float), np.asarray(alphas, dtype=float),
            np.asarray(horizons, dtype=float))
