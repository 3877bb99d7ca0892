"""Independent Monte-Carlo verification of the lattice solution.

Two simulators cross-check the backward recursion:

* ``simulate_sde`` integrates the filtered wealth-belief dynamics by
  Euler-Maruyama under a feedback policy (wealth and belief driven by
  independent Brownian increments);
* ``simulate_chain`` walks the discrete chain with the exact transition
  stencils under the stored policy, so the sample mean of terminal wealth
  estimates the auxiliary function ``g`` at the start node.

``marginal_check`` validates the belief simulation alone against the
matrix exponential of the generator transpose: the belief mean follows
the forward equation regardless of the attention level.

Randomness contract: path ``i`` of a run with seed ``s`` draws from the
generator seeded with ``(s, i)``, so results do not depend on batching or
scheduling and identical seeds reproduce identical summaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError
from .filtering import filter_step, full_belief
from .market import FloatArray, RegimeModel
from .solver import SolutionFields, StencilCache, _select


@dataclass
class McSummary:
    """Moment estimates of terminal wealth from one simulation run."""

    n_paths: int
    mean_XT: float
    var_XT: float
    objective: float
    se_mean: float
    se_var: float
    boundary_hits: float

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "mean_XT": self.mean_XT,
            "var_XT": self.var_XT,
            "objective": self.objective,
            "se_mean": self.se_mean,
            "se_var": self.se_var,
            "boundary_hits": self.boundary_hits,
        }


def compose_objective(mean: float, var: float, gamma: float, convention: str) -> float:
    """Scalar objective from the two moments, per the chosen convention."""
    if convention == "paper-literal":
        return var - 0.5 * gamma * mean
    if convention == "mean-minus-variance":
        return mean - 0.5 * gamma * var
    raise DomainError(f"unknown objective convention {convention!r}")


def summarize(samples: FloatArray, model: RegimeModel, boundary_hits: float,
              convention: str | None = None) -> McSummary:
    """Population-moment summary of terminal wealth samples."""
    n = len(samples)
    if n < 2:
        raise DomainError("need at least 2 paths")
    mean = float(samples.mean())
    centered = samples - mean
    var = float((centered ** 2).mean())
    m4 = float((centered ** 4).mean())
    se_mean = float(np.sqrt(var / n))
    se_var = float(np.sqrt(max(m4 - var * var, 0.0) / n))
    conv = convention or model.objective_convention
    return McSummary(
        n_paths=n, mean_XT=mean, var_XT=var,
        objective=compose_objective(mean, var, model.risk_aversion, conv),
        se_mean=se_mean, se_var=se_var, boundary_hits=float(boundary_hits))


def write_terminal_csv(path, samples: FloatArray) -> None:
    """Dump per-path terminal wealth (one column) for distribution plots."""
    with open(path, "w", newline="\n") as fh:
        fh.write("x_T\n")
        for v in samples:
            fh.write(repr(float(v)) + "\n")


def _batches(n_paths: int, batch_size: int):
    start = 0
    while start < n_paths:
        yield start, min(batch_size, n_paths - start)
        start += batch_size


def _path_normals(seed: int, first: int, count: int, n_steps: int,
                  n_cols: int) -> FloatArray:
    """Gaussian increments for paths first..first+count-1, one stream each."""
    out = np.empty((count, n_steps, n_cols))
    for j in range(count):
        rng = np.random.default_rng([seed, first + j])
        out[j] = rng.standard_normal((n_steps, n_cols))
    return out


def _path_uniforms(seed: int, first: int, count: int, n_steps: int) -> FloatArray:
    out = np.empty((count, n_steps))
    for j in range(count):
        rng = np.random.default_rng([seed, first + j])
        out[j] = rng.random(n_steps)
    return out


class FeedbackPolicy:
    """Nearest-node lookup of the stored feedback law (no interpolation)."""

    def __init__(self, fields: SolutionFields):
        self.fields = fields
        self.u_all, self.pi_all = fields.grid.enumerate()

    def __call__(self, t: float, x: FloatArray, phi: FloatArray):
        f = self.fields
        n = min(int(np.floor(t / f.spec.h2 + 1e-9)), f.spec.n_steps - 1)
        nodes = f.lat.nearest_node(x, phi)
        idx = f.policy[n, nodes]
        return self.u_all[idx], self.pi_all[idx]


class ConstantPolicy:
    """Fixed control everywhere (for oracle unit tests)."""

    def __init__(self, u, pi: float):
        self.u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        self.pi = float(pi)

    def __call__(self, t, x, phi):
        n = len(np.atleast_1d(x))
        return np.tile(self.u, (n, 1)), np.full(n, self.pi)


def simulate_sde(model: RegimeModel, policy, t0: float, x0: float,
                 phi0: FloatArray, n_paths: int, seed: int, *,
                 h2: float, x_bounds: tuple[float, float],
                 convention: str | None = None, batch_size: int = 4096,
                 terminal_csv=None) -> McSummary:
    """Euler-Maruyama simulation of the filtered wealth-belief system.

    Wealth moves with the belief-averaged drift and volatility row, the
    belief with the filter step; the two noises are independent.  Paths
    that leave ``x_bounds`` are counted, never clipped.
    """
    span = model.T - t0
    n_steps = int(round(span / h2))
    if n_steps < 1 or abs(n_steps * h2 - span) > 1e-9 * max(1.0, span):
        raise DomainError(f"horizon {span} is not a multiple of the step {h2}")
    d = model.d
    sqrt_h2 = np.sqrt(h2)
    lo, hi = x_bounds
    # keep per-batch increment storage near 150 MB
    batch_size = min(batch_size,
                     max(256, int(20_000_000 // max(1, n_steps * (d + 1)))))

    terminal = np.empty(n_paths)
    escaped = 0
    for first, count in _batches(n_paths, batch_size):
        dw = _path_normals(seed, first, count, n_steps, d + 1)
        x = np.full(count, float(x0))
        phi = np.tile(np.asarray(phi0, dtype=np.float64), (count, 1))
        out = np.zeros(count, dtype=bool)
        for j in range(n_steps):
            t = t0 + j * h2
            u, pi = policy(t, x, phi)
            full = full_belief(phi, m=model.m, validate=False)
            r = model.riskfree_at(t)
            th_u = u @ model.theta_at(t).T                     # (B, m)
            per_regime = r[None, :] * x[:, None] + th_u
            bbar = (full * per_regime).sum(axis=1) \
                - model.cost_coeff * pi * pi * x
            usig = np.einsum("bl,ilj->bij", u, model.vol_at(t))
            sbar = np.einsum("bi,bij->bj", full, usig)         # (B, d)
            x = x + bbar * h2 + (sbar * dw[:, j, :d]).sum(axis=1) * sqrt_h2
            phi = filter_step(model, phi, pi, dw[:, j, d] * sqrt_h2, h2)
            out |= (x < lo) | (x > hi)
        terminal[first:first + count] = x
        escaped += int(out.sum())
    if terminal_csv is not None:
        write_terminal_csv(terminal_csv, terminal)
    return summarize(terminal, model, escaped / n_paths, convention)


def simulate_chain(model: RegimeModel, fields: SolutionFields, start_node: int,
                   n_paths: int, seed: int, *,
                   convention: str | None = None, batch_size: int = 8192,
                   terminal_csv=None) -> McSummary:
    """Simulate the approximating chain under the stored feedback policy.

    Uses the exact one-step stencils, so the expected terminal wealth
    equals ``g`` at the start node by construction.  ``boundary_hits`` is
    the fraction of paths that ever occupy a wealth-boundary node.
    """
    lat = fields.lat
    N = fields.spec.n_steps
    cache = StencilCache(model, lat, fields.grid)

    def slice_cum(n):
        probs_sel = _select(cache.batch(fields.time_of(n)).probs,
                            fields.policy[n])
        return np.cumsum(probs_sel.T, axis=1)

    # per-slice cumulative outcome distributions under the stored policy;
    # precomputed when that fits comfortably in memory
    precompute = N * lat.n_nodes * lat.n_out <= 20_000_000
    cums = np.stack([slice_cum(n) for n in range(N)]) if precompute else None

    on_x_boundary = (lat.ix == 0) | (lat.ix == lat.n_x - 1)
    batch_size = min(batch_size, max(256, int(20_000_000 // max(1, N))))
    terminal = np.empty(n_paths)
    hits = 0
    for first, count in _batches(n_paths, batch_size):
        uni = _path_uniforms(seed, first, count, N)
        nodes = np.full(count, int(start_node), dtype=np.int64)
        hit = on_x_boundary[nodes].copy()
        for n in range(N):
            cum_n = cums[n] if precompute else slice_cum(n)
            rc = cum_n[nodes]                                  # (B, n_out)
            outcome = np.minimum((rc < uni[:, n, None]).sum(axis=1),
                                 lat.n_out - 1)
            nodes = lat.neighbors[nodes, outcome]
            hit |= on_x_boundary[nodes]
        terminal[first:first + count] = lat.x[nodes]
        hits += int(hit.sum())
    if terminal_csv is not None:
        write_terminal_csv(terminal_csv, terminal)
    return summarize(terminal, model, hits / n_paths, convention)


@dataclass
class MarginalReport:
    """Belief-mean agreement with the forward-equation oracle."""

    t: float
    n_paths: int
    mean: FloatArray          # (m,) sample mean of the full belief at t
    target: FloatArray        # (m,) expm(Q^T t) applied to the start belief
    se: FloatArray            # (m,) standard errors
    max_dev: float
    dev_over_3se: float

    def ok(self) -> bool:
        return self.dev_over_3se <= 1.0


def marginal_check(model: RegimeModel, phi0: FloatArray, pi: float, t: float,
                   n_paths: int, seed: int, *, h2: float = 1e-3,
                   batch_size: int = 8192) -> MarginalReport:
    """Simulate the belief alone; compare its mean with the forward flow."""
    if not 0 < t <= model.T + 1e-12:
        raise DomainError(f"t must lie in (0, T], got {t}")
    n_steps = int(round(t / h2))
    if n_steps < 1 or abs(n_steps * h2 - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t {t} is not a multiple of the step {h2}")
    sqrt_h2 = np.sqrt(h2)
    batch_size = min(batch_size, max(256, int(20_000_000 // max(1, n_steps))))

    ssum = np.zeros(model.m)
    ssq = np.zeros(model.m)
    for first, count in _batches(n_paths, batch_size):
        dw = _path_normals(seed, first, count, n_steps, 1)[:, :, 0]
        phi = np.tile(np.asarray(phi0, dtype=np.float64), (count, 1))
        for j in range(n_steps):
            phi = filter_step(model, phi, pi, dw[:, j] * sqrt_h2, h2)
        full = full_belief(phi, m=model.m, validate=False)
        ssum += full.sum(axis=0)
        ssq += (full ** 2).sum(axis=0)
    mean = ssum / n_paths
    var = np.maximum(ssq / n_paths - mean ** 2, 0.0)
    se = np.sqrt(var / n_paths)
    target = expm(model.generator.T * t) @ full_belief(
        np.asarray(phi0, dtype=np.float64), m=model.m)
    dev = np.abs(mean - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dev == 0.0, 0.0, dev / (3.0 * se))
    return MarginalReport(t=t, n_paths=n_paths, mean=mean, target=target,
                          se=se, max_dev=float(dev.max()),
                          dev_over_3se=float(np.nanmax(ratios)))
