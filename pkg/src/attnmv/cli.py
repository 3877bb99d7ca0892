"""Batch driver: solve, cost sweeps, property checks, grid refinement.

Artifacts are CSV (gridded data, row order = lattice enumeration order)
and JSON (manifests, reports), both reproducible bit-for-bit from the
configuration and seed.  Wall-clock timings go to stderr and a plain-text
sidecar so the CSV/JSON artifacts stay deterministic.

Exit codes: 0 success, 2 configuration error, 3 scheme (step-size) error,
4 property-suite failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY, EXIT_SCHEME,
                     ConfigError, SchemeError)
from .kernel import build_stencil_batch, consistency_sweep
from .lattice import GridSpec
from .market import CONVENTIONS, RegimeModel, validate_model
from .oracle import marginal_check, simulate_chain
from .solver import (ControlGrid, SolutionFields, StencilCache,
                     _quad_coefficients, g_residuals, ratio_policy, solve,
                     spike_margins)

log = logging.getLogger("attnmv")

DEFAULT_GRID = {"h1": 0.2, "h2": 0.001, "x_min": 0.0, "x_max": 4.0}
DEFAULT_CONTROLS = {"u_max": 2.0, "du": 0.5, "n_pi": 5}
DEFAULT_ORACLE = {"n_paths": 100_000, "seed": 20240901, "sde_h2": None}
DEFAULT_EVAL = {"t": 1.0, "x": 2.0, "phi": [0.2]}


@dataclass
class RunConfig:
    """Fully resolved run configuration (defaults applied, flags merged)."""

    model: RegimeModel
    h1: float
    h2: float
    x_min: float
    x_max: float
    u_max: float
    du: float
    n_pi: int
    n_paths: int
    seed: int
    sde_h2: float | None
    eval_t: float
    eval_x: float
    eval_phi: list[float]
    # separate evaluation point for refinement ladders whose coarse rungs
    # need not contain the main evaluation point
    refine_t: float | None = None
    refine_x: float | None = None
    refine_phi: list[float] | None = None
    sweep_k: list[float] = field(default_factory=lambda: [0.1, 0.3, 0.5])
    ladder: list[tuple[float, float]] = field(
        default_factory=lambda: [(0.4, 0.004), (0.2, 0.001), (0.1, 0.00025)])
    convention: str | None = None
    slice_times: list[float] = field(default_factory=lambda: [0.0, 1.0])
    refine_tol: float = 1e-2
    output_dir: Path = Path("out")
    debug_stencils: bool = False
    policy_override: Path | None = None
    dump_terminal: bool = False

    # -- derived objects -----------------------------------------------------

    def grid_spec(self, h1: float | None = None, h2: float | None = None) -> GridSpec:
        h1 = self.h1 if h1 is None else h1
        h2 = self.h2 if h2 is None else h2
        n_steps = int(round(self.model.T / h2))
        return GridSpec(h1=h1, h2=h2, x_min=self.x_min, x_max=self.x_max,
                        n_steps=n_steps)

    def control_grid(self) -> ControlGrid:
        return ControlGrid.regular(
            d=self.model.d, u_max=self.u_max, du=self.du,
            pi_min=self.model.attention_min, pi_max=self.model.attention_max,
            n_pi=self.n_pi)

    def effective_model(self) -> RegimeModel:
        if self.convention and self.convention != self.model.objective_convention:
            from dataclasses import replace
            return replace(self.model, objective_convention=self.convention)
        return self.model

    def eval_node(self, lat, *, refine: bool = False) -> int:
        h1 = lat.spec.h1
        x = self.refine_x if refine and self.refine_x is not None else self.eval_x
        phi = self.refine_phi if refine and self.refine_phi is not None else self.eval_phi
        ix = round((x - self.x_min) / h1)
        if not math.isclose(self.x_min + ix * h1, x,
                            rel_tol=1e-9, abs_tol=1e-12) or not 0 <= ix < lat.n_x:
            raise ConfigError(f"evaluation x={x} not on the grid")
        iphi = [round(p / h1) for p in phi]
        for j, p in zip(iphi, phi):
            if not math.isclose(j * h1, p, rel_tol=1e-9, abs_tol=1e-12):
                raise ConfigError(f"evaluation phi={phi} not on the grid")
        row = lat.phi_row_of(np.asarray(iphi))
        if np.any(row < 0):
            raise ConfigError(f"evaluation phi={phi} outside the simplex grid")
        return int(lat.index_of(ix, np.asarray(iphi)))

    def eval_slice(self, spec: GridSpec, *, refine: bool = False) -> int:
        t = self.refine_t if refine and self.refine_t is not None else self.eval_t
        n = round(t / spec.h2)
        if not math.isclose(n * spec.h2, t, rel_tol=1e-9, abs_tol=1e-12) \
                or not 0 <= n <= spec.n_steps:
            raise ConfigError(f"evaluation t={t} not on the time grid")
        return int(n)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "grid": {"h1": self.h1, "h2": self.h2,
                     "x_min": self.x_min, "x_max": self.x_max,
                     "n_steps": int(round(self.model.T / self.h2))},
            "controls": {"u_max": self.u_max, "du": self.du, "n_pi": self.n_pi},
            "oracle": {"n_paths": self.n_paths, "seed": self.seed,
                       "sde_h2": self.sde_h2},
            "eval": {"t": self.eval_t, "x": self.eval_x, "phi": self.eval_phi},
            "refine_eval": {"t": self.refine_t, "x": self.refine_x,
                            "phi": self.refine_phi},
            "sweep_k": self.sweep_k,
            "ladder": [list(r) for r in self.ladder],
            "convention": self.convention,
            "slice_times": self.slice_times,
            "refine_tol": self.refine_tol,
            "output_dir": str(self.output_dir),
            "version": __version__,
        }


def load_config(path: str | Path | None, overrides: argparse.Namespace | None = None,
                ) -> RunConfig:
    """Merge file config (if any), built-in defaults and CLI flags."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        with open(p) as fh:
            raw = json.load(fh)
    if "model" not in raw:
        from .market import example_model
        model = example_model()
    else:
        model = RegimeModel.from_dict(raw["model"])
    bad = validate_model(model)
    if bad:
        raise ConfigError("invalid model: " + "; ".join(bad))

    grid = {**DEFAULT_GRID, **raw.get("grid", {})}
    controls = {**DEFAULT_CONTROLS, **raw.get("controls", {})}
    oracle = {**DEFAULT_ORACLE, **raw.get("oracle", {})}
    ev = {**DEFAULT_EVAL, **raw.get("eval", {})}
    grid.pop("n_steps", None)   # derived from T and h2

    cfg = RunConfig(
        model=model,
        h1=float(grid["h1"]), h2=float(grid["h2"]),
        x_min=float(grid["x_min"]), x_max=float(grid["x_max"]),
        u_max=float(controls["u_max"]), du=float(controls["du"]),
        n_pi=int(controls["n_pi"]),
        n_paths=int(oracle["n_paths"]), seed=int(oracle["seed"]),
        sde_h2=None if oracle.get("sde_h2") is None else float(oracle["sde_h2"]),
        eval_t=float(ev["t"]), eval_x=float(ev["x"]),
        eval_phi=[float(v) for v in ev["phi"]],
        refine_t=None, refine_x=None, refine_phi=None,
        sweep_k=[float(k) for k in raw.get("sweep_k", [0.1, 0.3, 0.5])],
        ladder=[tuple(map(float, r)) for r in
                raw.get("ladder", [[0.4, 0.004], [0.2, 0.001], [0.1, 0.00025]])],
        convention=raw.get("convention"),
        slice_times=[float(t) for t in raw.get("slice_times", [0.0, 1.0])],
        refine_tol=float(raw.get("refine_tol", 1e-2)),
        output_dir=Path(raw.get("output_dir", "out")),
    )
    rev = raw.get("refine_eval")
    if rev:
        cfg.refine_t = None if rev.get("t") is None else float(rev["t"])
        cfg.refine_x = None if rev.get("x") is None else float(rev["x"])
        cfg.refine_phi = (None if rev.get("phi") is None
                          else [float(v) for v in rev["phi"]])

    if overrides is not None:
        o = overrides
        if getattr(o, "h1", None) is not None:
            cfg.h1 = o.h1
        if getattr(o, "h2", None) is not None:
            cfg.h2 = o.h2
        if getattr(o, "seed", None) is not None:
            cfg.seed = o.seed
        if getattr(o, "paths", None) is not None:
            cfg.n_paths = o.paths
        if getattr(o, "output_dir", None) is not None:
            cfg.output_dir = Path(o.output_dir)
        if getattr(o, "convention", None) is not None:
            cfg.convention = o.convention
        if getattr(o, "sweep_k", None) is not None:
            cfg.sweep_k = [float(v) for v in o.sweep_k.split(",") if v]
        if getattr(o, "ladder", None) is not None:
            cfg.ladder = _parse_ladder(o.ladder)
        if getattr(o, "slice_times", None) is not None:
            cfg.slice_times = [float(v) for v in o.slice_times.split(",") if v]
        if getattr(o, "debug_stencils", False):
            cfg.debug_stencils = True
        if getattr(o, "policy_override", None) is not None:
            cfg.policy_override = Path(o.policy_override)
        if getattr(o, "dump_terminal", False):
            cfg.dump_terminal = True
    if cfg.convention is not None and cfg.convention not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}")
    return cfg


def _parse_ladder(text: str) -> list[tuple[float, float]]:
    rungs = []
    for part in text.split(","):
        if not part:
            continue
        try:
            a, b = part.split(":")
            rungs.append((float(a), float(b)))
        except ValueError as err:
            raise ConfigError(f"bad ladder entry {part!r}; expected h1:h2") from err
    if not rungs:
        raise ConfigError("empty refinement ladder")
    return rungs


# ---------------------------------------------------------------------------
# deterministic artifact writers


def _fmt(v) -> str:
    f = float(v)
    if math.isnan(f):
        return "nan"
    return repr(f)


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    n = len(columns[0])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


class _Timer:
    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.start = time.perf_counter()

    def finish(self, label: str) -> None:
        elapsed = time.perf_counter() - self.start
        log.info("%s finished in %.2f s", label, elapsed)
        with open(self.outdir / "timing.txt", "w") as fh:
            fh.write(f"{label} wall time: {elapsed:.3f} s\n")


def _slice_table(fields: SolutionFields, n: int):
    """Header and columns of one solution slice in lattice order."""
    lat = fields.lat
    mm = lat.m - 1
    d = fields.grid.u_levels.shape[1]
    header = ["ix"] + [f"iphi{i + 1}" for i in range(mm)] + \
             ["x"] + [f"phi{i + 1}" for i in range(mm)] + ["V", "g"] + \
             [f"u{l + 1}" for l in range(d)] + ["pi"] + \
             [f"w{l + 1}" for l in range(d)]
    cols = [lat.ix.astype(float)] + [lat.iphi[:, i].astype(float) for i in range(mm)]
    cols += [lat.x] + [lat.phi[:, i] for i in range(mm)]
    cols += [fields.V[n], fields.g[n]]
    if n < fields.spec.n_steps:
        u = fields.policy_u(n)
        pi = fields.policy_pi(n)
        w, _ = ratio_policy(fields, n)
    else:                       # policy undefined on the terminal slice
        u = np.full((lat.n_nodes, d), np.nan)
        pi = np.full(lat.n_nodes, np.nan)
        w = np.full((lat.n_nodes, d), np.nan)
    cols += [u[:, l] for l in range(d)] + [pi] + [w[:, l] for l in range(d)]
    return header, cols


def _dump_stencils(cfg: RunConfig, fields: SolutionFields, outdir: Path) -> None:
    lat = fields.lat
    u_arr, pi_arr = fields.grid.enumerate()
    batch = build_stencil_batch(cfg.effective_model(), lat, 0.0, u_arr, pi_arr)
    n_c = len(pi_arr)
    rows = n_c * lat.n_nodes
    node = np.tile(np.arange(lat.n_nodes), n_c).astype(float)
    ctrl = np.repeat(np.arange(n_c), lat.n_nodes).astype(float)
    header = ["control", "node", "pi"] + [f"p{o}" for o in range(lat.n_out)]
    cols = [ctrl, node, np.repeat(pi_arr, lat.n_nodes)]
    for o in range(lat.n_out):
        cols.append(batch.probs[:, o, :].reshape(rows))
    write_csv(outdir / "stencils_t0.csv", header, cols)


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg: RunConfig) -> int:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    timer = _Timer(outdir)
    model = cfg.effective_model()
    spec = cfg.grid_spec()
    spec.check_horizon(model.T)
    grid = cfg.control_grid()
    fields = solve(model, spec, grid, progress=True)
    lat = fields.lat
    node = cfg.eval_node(lat)

    artifacts = []
    for t in cfg.slice_times:
        n = round(t / spec.h2)
        if not math.isclose(n * spec.h2, t, rel_tol=1e-9, abs_tol=1e-12) \
                or not 0 <= n <= spec.n_steps:
            raise ConfigError(f"slice time {t} not on the time grid")
        header, cols = _slice_table(fields, int(n))
        name = f"slice_t{_fmt(t)}.csv"
        write_csv(outdir / name, header, cols)
        artifacts.append(name)
    if cfg.debug_stencils:
        _dump_stencils(cfg, fields, outdir)
        artifacts.append("stencils_t0.csv")

    n_eval = cfg.eval_slice(spec)
    manifest = {
        "config": cfg.to_dict(),
        "derived": {
            "n_nodes": lat.n_nodes,
            "n_controls": grid.n_controls,
            "cfl_max_nonstay_mass": fields.cfl_max_mass,
            "cfl_margin": 1.0 - fields.cfl_max_mass,
            "stay_mass_residual": fields.stay_residual,
            "boundary_clamped_mass_max": float(fields.clamped_mass.max()),
            "boundary_clamped_mass_mean": float(fields.clamped_mass.mean()),
            "V_eval": float(fields.V[n_eval][node]),
            "g_eval": float(fields.g[n_eval][node]),
            "V0_eval_state": float(fields.V[0][node]),
        },
        "artifacts": artifacts,
    }
    write_json(outdir / "manifest.json", manifest)
    timer.finish("solve")
    return EXIT_OK


def cmd_sweep_k(cfg: RunConfig) -> int:
    if not cfg.sweep_k:
        raise ConfigError("sweep_k list is empty")
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    timer = _Timer(outdir)
    spec = cfg.grid_spec()
    grid = cfg.control_grid()

    x_col = None
    v_cols, w_cols, pi_cols, surf_cols = [], [], [], []
    surf_coords = None
    for k in cfg.sweep_k:
        model = cfg.effective_model().with_cost(k)
        fields = solve(model, spec, grid)
        lat = fields.lat
        n_eval = cfg.eval_slice(spec)
        iphi = np.asarray([round(p / spec.h1) for p in cfg.eval_phi])
        row = int(lat.phi_row_of(iphi))
        if row < 0:
            raise ConfigError("evaluation phi outside the simplex grid")
        sel = np.arange(lat.n_x) * lat.n_phi + row     # fixed phi, all x
        if x_col is None:
            x_col = lat.x[sel]
        v_cols.append(fields.V[n_eval][sel])
        w, _ = ratio_policy(fields, n_eval)
        w_cols.append(w[sel, 0] if model.d == 1 else
                      np.linalg.norm(w[sel], axis=1))
        pi_cols.append(fields.policy_pi(n_eval)[sel])
        if surf_coords is None:
            surf_coords = (lat.x, lat.phi)
        surf_cols.append(fields.V[n_eval])

    tags = [f"k{_fmt(k)}" for k in cfg.sweep_k]
    write_csv(outdir / "fig1_value.csv", ["x"] + [f"V_{t}" for t in tags],
              [x_col] + v_cols)
    write_csv(outdir / "fig2_ratio.csv", ["x"] + [f"w_{t}" for t in tags],
              [x_col] + w_cols)
    write_csv(outdir / "fig3_attention.csv", ["x"] + [f"pi_{t}" for t in tags],
              [x_col] + pi_cols)
    mm = cfg.model.m - 1
    surf_header = ["x"] + [f"phi{i + 1}" for i in range(mm)] + \
                  [f"V_{t}" for t in tags]
    write_csv(outdir / "fig4_surface.csv", surf_header,
              [surf_coords[0]] + [surf_coords[1][:, i] for i in range(mm)]
              + surf_cols)
    manifest = {"config": cfg.to_dict(),
                "artifacts": ["fig1_value.csv", "fig2_ratio.csv",
                              "fig3_attention.csv", "fig4_surface.csv"]}
    write_json(outdir / "sweep_manifest.json", manifest)
    timer.finish("sweep-k")
    return EXIT_OK


def _load_policy_override(fields: SolutionFields, path: Path) -> None:
    with open(path) as fh:
        data = json.load(fh)
    for n, node, ctrl in data.get("overrides", []):
        fields.policy[int(n), int(node)] = int(ctrl)


def cmd_check(cfg: RunConfig) -> int:
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    timer = _Timer(outdir)
    model = cfg.effective_model()
    spec = cfg.grid_spec()
    grid = cfg.control_grid()
    u_arr, pi_arr = grid.enumerate()
    report: dict[str, dict] = {}

    def record(name, passed, **metrics):
        report[name] = {"pass": bool(passed), **metrics}
        log.info("check %-20s %s", name, "PASS" if passed else "FAIL")

    fields = solve(model, spec, grid)
    lat = fields.lat

    # one stencil batch and moment sweep per coefficient epoch
    mass_err, max_mass, all_valid = 0.0, 0.0, True
    worst_mean, worst_second = 0.0, 0.0
    for t_epoch in model.time_breaks:
        batch = build_stencil_batch(model, lat, float(t_epoch), u_arr, pi_arr,
                                    strict=True)
        mass_err = max(mass_err,
                       float(np.abs(batch.probs.sum(axis=1) - 1.0).max()))
        max_mass = max(max_mass, batch.max_mass)
        all_valid = all_valid and bool(batch.valid.all())
        cons = consistency_sweep(model, lat, float(t_epoch), u_arr, pi_arr)
        worst_mean = max(worst_mean, cons.mean_dev)
        worst_second = max(worst_second, cons.second_dev)
    record("stencil_validity", all_valid and mass_err <= 1e-10,
           mass_error=mass_err, max_nonstay_mass=max_mass)
    record("local_consistency",
           worst_mean <= 1e-12 and worst_second <= 5.0 * spec.h1 * spec.h2,
           mean_dev=worst_mean, second_dev=worst_second,
           second_dev_over_h1h2=worst_second / (spec.h1 * spec.h2))

    if cfg.policy_override is not None:
        _load_policy_override(fields, cfg.policy_override)

    term_ok = np.array_equal(fields.V[-1], lat.x) and \
        np.array_equal(fields.g[-1], lat.x)
    cache = StencilCache(model, lat, grid)
    cmat = _quad_coefficients(model, lat)
    worst_g = max(float(g_residuals(model, fields, n, cache).max())
                  for n in range(spec.n_steps))
    record("terminal_and_propagation", term_ok and worst_g <= 1e-12,
           terminal_exact=term_ok, g_residual_max=worst_g)

    worst_margin = min(
        float(spike_margins(model, fields, n, cache=cache, cmat=cmat).min())
        for n in range(spec.n_steps))
    record("spike_margins", worst_margin >= -1e-12, min_margin=worst_margin)

    start = cfg.eval_node(lat)
    terminal = outdir / "terminal_wealth.csv" if cfg.dump_terminal else None
    mc = simulate_chain(model, fields, start, cfg.n_paths, cfg.seed,
                        terminal_csv=terminal)
    g0 = float(fields.g[0][start])
    dev = abs(mc.mean_XT - g0)
    record("g_consistency_mc", dev <= 3.0 * mc.se_mean,
           g0=g0, chain_mean=mc.mean_XT, se_mean=mc.se_mean,
           boundary_hits=mc.boundary_hits)

    t_marg = min(0.5, model.T)
    rep = marginal_check(model, np.asarray(cfg.eval_phi), model.attention_max,
                         t_marg, cfg.n_paths, cfg.seed + 1, h2=spec.h2)
    record("filter_marginal", rep.ok(), t=rep.t, max_dev=rep.max_dev,
           dev_over_3se=rep.dev_over_3se)

    write_json(outdir / "check_report.json",
               {"config": cfg.to_dict(), "properties": report})
    timer.finish("check")
    failures = [k for k, v in report.items() if not v["pass"]]
    if failures:
        print("failed properties: " + ", ".join(failures), file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_refine(cfg: RunConfig) -> int:
    if not cfg.ladder:
        raise ConfigError("refinement ladder is empty")
    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    timer = _Timer(outdir)
    model = cfg.effective_model()
    grid = cfg.control_grid()

    values, diffs, bhits = [], [], []
    for h1, h2 in cfg.ladder:
        spec = cfg.grid_spec(h1=h1, h2=h2)
        spec.check_horizon(model.T)
        fields = solve(model, spec, grid)
        node = cfg.eval_node(fields.lat, refine=True)
        n_eval = cfg.eval_slice(spec, refine=True)
        values.append(float(fields.V[n_eval][node]))
        mc = simulate_chain(model, fields, node,
                            min(cfg.n_paths, 20_000), cfg.seed)
        bhits.append(mc.boundary_hits)
        diffs.append(float("nan") if len(values) < 2
                     else abs(values[-1] - values[-2]))
        log.info("rung (h1=%g, h2=%g): V=%.6g", h1, h2, values[-1])

    finite = [d for d in diffs if not math.isnan(d)]
    cauchy = bool(finite and finite[-1] < cfg.refine_tol)
    write_csv(outdir / "refine.csv",
              ["h1", "h2", "V_eval", "diff_prev", "boundary_hits"],
              [np.array([r[0] for r in cfg.ladder]),
               np.array([r[1] for r in cfg.ladder]),
               np.array(values), np.array(diffs), np.array(bhits)])
    write_json(outdir / "refine_manifest.json",
               {"config": cfg.to_dict(),
                "values": values, "diffs": diffs,
                "boundary_hits": bhits,
                "cauchy": cauchy, "tolerance": cfg.refine_tol})
    timer.finish("refine")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="attnmv",
        description="Equilibrium mean-variance investment with costly "
                    "attention under a partially observed regime chain")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in [("solve", cmd_solve), ("sweep-k", cmd_sweep_k),
                     ("check", cmd_check), ("refine", cmd_refine)]:
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--output-dir", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--h1", type=float, default=None)
        sp.add_argument("--h2", type=float, default=None)
        sp.add_argument("--paths", type=int, default=None)
        sp.add_argument("--convention", choices=list(CONVENTIONS), default=None)
        sp.add_argument("--slice-times", type=str, default=None)
        sp.add_argument("--sweep-k", type=str, default=None)
        sp.add_argument("--ladder", type=str, default=None)
        sp.add_argument("--debug-stencils", action="store_true")
        sp.add_argument("--policy-override", type=str, default=None)
        sp.add_argument("--dump-terminal", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return args.func(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemeError as err:
        print(f"scheme error: {err}", file=sys.stderr)
        return EXIT_SCHEME


if __name__ == "__main__":
    sys.exit(main())
