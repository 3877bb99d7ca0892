"""Backward induction for the coupled value / auxiliary-mean pair.

Two fields are carried per time slice: the equilibrium value ``V`` and the
auxiliary function ``g`` (the conditional expectation of terminal wealth
under the equilibrium feedback law).  Stepping from slice ``n+1`` to ``n``:

* every control's candidate value is the stencil-weighted average of
  ``V_{n+1}`` plus a correction ``-(gamma/2) h2 [sbar^2 D2_x g_{n+1}
  + pi * sum_{i,k} c_ik D2_{phi_i phi_k} g_{n+1}]`` built from the same
  central second differences the stencil uses (paired four-point formula
  for the cross terms), with ``c_ik = phi_i phi_k (zeta_i - zbar)(zeta_k -
  zbar)``;
* the minimizing control is recorded as the feedback policy (ties broken
  by smallest position, then smallest attention: the enumeration order);
* ``g`` is propagated as the plain stencil average under that control.

Terminal condition: both fields equal the node wealth.

The per-slice minimization recomputes bit-identically, so the one-step
("spike") deviation margin of a solved run is exactly zero and any
corrupted policy shows a strictly negative margin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemeError
from .filtering import full_belief
from .kernel import StencilBatch, build_stencil_batch, diffusion_bar_sq, stencil
from .lattice import GridSpec, Lattice, build_grid
from .market import ControlPoint, FloatArray, RegimeModel, validate_model

log = logging.getLogger("attnmv")


@dataclass(frozen=True)
class ControlGrid:
    """Finite search set for the per-node minimization.

    ``u_levels`` spans ``[0, u_max]^d`` with step ``du`` (always containing
    the zero position); ``pi_levels`` spans the attention interval
    inclusively.  The flattened enumeration (positions outer, attention
    inner, both ascending) is the deterministic tie-break order.
    """

    u_levels: FloatArray      # (n_u, d)
    pi_levels: FloatArray     # (n_pi,)

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u_levels, dtype=np.float64))
        p = np.asarray(self.pi_levels, dtype=np.float64)
        if u.size == 0 or p.size == 0:
            raise ConfigError("control grid must be non-empty")
        if not np.any(np.all(u == 0.0, axis=1)):
            raise ConfigError("u_levels must include the zero position")
        object.__setattr__(self, "u_levels", u)
        object.__setattr__(self, "pi_levels", p)

    @classmethod
    def regular(cls, d: int, u_max: float, du: float,
                pi_min: float, pi_max: float, n_pi: int) -> "ControlGrid":
        n_u = int(round(u_max / du)) + 1 if u_max > 0 else 1
        axis = np.linspace(0.0, u_max, n_u)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        u = np.stack([g.ravel() for g in grids], axis=1)
        if n_pi < 1:
            raise ConfigError("n_pi must be >= 1")
        pi = np.linspace(pi_min, pi_max, n_pi) if n_pi > 1 else np.array([pi_min])
        return cls(u_levels=u, pi_levels=pi)

    @property
    def n_controls(self) -> int:
        return len(self.u_levels) * len(self.pi_levels)

    def enumerate(self) -> tuple[FloatArray, FloatArray]:
        """(u, pi) arrays of shape (n_controls, d) and (n_controls,)."""
        n_u, d = self.u_levels.shape
        n_pi = len(self.pi_levels)
        u = np.repeat(self.u_levels, n_pi, axis=0)
        pi = np.tile(self.pi_levels, n_u)
        return u, pi

    def control(self, idx: int) -> ControlPoint:
        n_pi = len(self.pi_levels)
        return ControlPoint(u=self.u_levels[idx // n_pi].copy(),
                            pi=float(self.pi_levels[idx % n_pi]))


@dataclass
class SolutionFields:
    """Per-slice arrays of the solved backward recursion.

    ``V[n]`` and ``g[n]`` are defined for ``n = 0..N``; ``policy[n]`` (an
    index into the control grid enumeration) for ``n = 0..N-1``.
    """

    model: RegimeModel
    spec: GridSpec
    lat: Lattice
    grid: ControlGrid
    V: FloatArray             # (N+1, n_nodes)
    g: FloatArray             # (N+1, n_nodes)
    policy: np.ndarray        # (N, n_nodes) int32
    cfl_max_mass: float = 0.0
    stay_residual: float = 0.0
    clamped_mass: FloatArray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_steps(self) -> int:
        return self.spec.n_steps

    def time_of(self, n: int) -> float:
        return n * self.spec.h2

    def policy_u(self, n: int) -> FloatArray:
        u, _ = self.grid.enumerate()
        return u[self.policy[n]]

    def policy_pi(self, n: int) -> FloatArray:
        _, pi = self.grid.enumerate()
        return pi[self.policy[n]]

    def control_at(self, n: int, node_idx: int) -> ControlPoint:
        return self.grid.control(int(self.policy[n, node_idx]))


# ---------------------------------------------------------------------------
# correction term and candidate evaluation


def _quad_coefficients(model: RegimeModel, lat: Lattice) -> FloatArray:
    """Belief covariance loadings c_ik (no attention factor), per node."""
    full = full_belief(lat.phi, m=model.m, validate=False)
    zbar = full @ model.signal_levels
    w = lat.phi * (model.signal_levels[: model.m - 1][None, :] - zbar[:, None])
    return w[:, :, None] * w[:, None, :]                        # (n, mm, mm)


def _second_differences(lat: Lattice, values: FloatArray, cmat: FloatArray):
    """(D2_x values, quadratic-form of belief second differences) per node."""
    h1 = lat.spec.h1
    mm = lat.m - 1
    nbr = lat.neighbors
    v = values
    d2x = (v[nbr[:, 1]] + v[nbr[:, 2]] - 2.0 * v) / (h1 * h1)
    quad = np.zeros(lat.n_nodes)
    for i in range(mm):
        d2i = (v[nbr[:, 3 + 2 * i]] + v[nbr[:, 4 + 2 * i]] - 2.0 * v) / (h1 * h1)
        quad += cmat[:, i, i] * d2i
    o = 3 + 2 * mm
    for i in range(mm):
        for k in range(mm):
            if i == k:
                continue
            cross = (v[nbr[:, o]] + v[nbr[:, o + 1]]
                     - v[nbr[:, o + 2]] - v[nbr[:, o + 3]]) / (4.0 * h1 * h1)
            quad += cmat[:, i, k] * cross
            o += 4
    return d2x, quad


def _corrections(model: RegimeModel, lat: Lattice, batch: StencilBatch,
                 pi_arr: FloatArray, g_next: FloatArray,
                 cmat: FloatArray) -> FloatArray:
    """Correction term per control and node, shape (n_c, n_nodes)."""
    d2x, quad = _second_differences(lat, g_next, cmat)
    gamma, h2 = model.risk_aversion, lat.spec.h2
    return -0.5 * gamma * h2 * (batch.ssT * d2x[None, :]
                                + pi_arr[:, None] * quad[None, :])


def _candidates(model: RegimeModel, lat: Lattice, batch: StencilBatch,
                pi_arr: FloatArray, V_next: FloatArray, g_next: FloatArray,
                cmat: FloatArray) -> FloatArray:
    """Candidate values (n_c, n_nodes); invalid controls get +inf."""
    v_nbr = V_next[lat.neighbors]                               # (n, n_out)
    cand = np.einsum("con,no->cn", batch.probs, v_nbr)
    cand += _corrections(model, lat, batch, pi_arr, g_next, cmat)
    if not batch.valid.all():
        cand = np.where(batch.valid, cand, np.inf)
    return cand


def g_correction(model: RegimeModel, lat: Lattice, t: float, node_idx: int,
                 c: ControlPoint, g_next: FloatArray) -> float:
    """Correction term for one node and control."""
    cmat = _quad_coefficients(model, lat)
    d2x, quad = _second_differences(lat, np.asarray(g_next, float), cmat)
    x, phi = lat.node_state(node_idx)
    ssT = diffusion_bar_sq(model, t, x, phi, c.u)
    gamma, h2 = model.risk_aversion, lat.spec.h2
    return float(-0.5 * gamma * h2 * (ssT * d2x[node_idx] + c.pi * quad[node_idx]))


def candidate_value(model: RegimeModel, lat: Lattice, t: float, node_idx: int,
                    c: ControlPoint, V_next: FloatArray,
                    g_next: FloatArray) -> float:
    """Stencil average of V_next plus the g correction (scalar path)."""
    st = stencil(model, lat, t, node_idx, c.u, c.pi)
    probs = st.probs()
    val = float(probs @ np.asarray(V_next, float)[lat.neighbors[node_idx]])
    return val + g_correction(model, lat, t, node_idx, c, g_next)


def optimize_node(model: RegimeModel, lat: Lattice, grid: ControlGrid,
                  t: float, node_idx: int, V_next: FloatArray,
                  g_next: FloatArray) -> tuple[ControlPoint, float]:
    """Exhaustive minimization over the control grid at one node.

    Controls whose stencil violates the step-size condition are skipped;
    if none is feasible a SchemeError is raised.  The first strict
    improvement wins, which implements the (|u|, pi) tie-break.
    """
    u_arr, pi_arr = grid.enumerate()
    best: tuple[ControlPoint, float] | None = None
    last_err: SchemeError | None = None
    for ci in range(len(pi_arr)):
        c = ControlPoint(u=u_arr[ci], pi=float(pi_arr[ci]))
        try:
            val = candidate_value(model, lat, t, node_idx, c, V_next, g_next)
        except SchemeError as err:
            last_err = err
            continue
        if best is None or val < best[1]:
            best = (c, val)
    if best is None:
        raise SchemeError(
            f"every control violates the step-size condition at node "
            f"{node_idx}", node=node_idx,
            shrink=last_err.shrink if last_err else None)
    return best


# ---------------------------------------------------------------------------
# the backward sweep


class StencilCache:
    """Stencil batches and boundary-mass helpers per coefficient epoch."""

    def __init__(self, model, lat, grid):
        self.model = model
        self.lat = lat
        self.u_arr, self.pi_arr = grid.enumerate()
        self._batches: dict[int, StencilBatch] = {}

    def batch(self, t: float) -> StencilBatch:
        e = self.model.epoch_of(t)
        if e not in self._batches:
            t_epoch = float(self.model.time_breaks[e])
            self._batches[e] = build_stencil_batch(
                self.model, self.lat, t_epoch, self.u_arr, self.pi_arr)
        return self._batches[e]


def _select(probs: FloatArray, idx: np.ndarray) -> FloatArray:
    """probs (n_c, n_out, n) selected per node -> (n_out, n)."""
    return np.take_along_axis(probs, idx[None, None, :], axis=0)[0]


def step_back(model: RegimeModel, fields: SolutionFields, n: int,
              cache: StencilCache | None = None,
              cmat: FloatArray | None = None) -> None:
    """Populate slice ``n`` of ``fields`` from slice ``n + 1``."""
    lat, grid = fields.lat, fields.grid
    if cache is None:
        cache = StencilCache(model, lat, grid)
    if cmat is None:
        cmat = _quad_coefficients(model, lat)
    t = fields.time_of(n)
    batch = cache.batch(t)
    cand = _candidates(model, lat, batch, cache.pi_arr,
                       fields.V[n + 1], fields.g[n + 1], cmat)
    idx = np.argmin(cand, axis=0)
    best = cand[idx, np.arange(lat.n_nodes)]
    if not np.all(np.isfinite(best)):
        bad = int(np.argmax(~np.isfinite(best)))
        raise SchemeError(
            f"every control violates the step-size condition at node {bad} "
            f"(slice {n})", node=bad)
    fields.V[n] = best
    fields.policy[n] = idx.astype(np.int32)
    probs_sel = _select(batch.probs, idx)
    fields.g[n] = np.einsum("on,no->n", probs_sel, fields.g[n + 1][lat.neighbors])
    if fields.clamped_mass.size:
        fields.clamped_mass[n] = float(
            (probs_sel * lat.clamped.T).sum() / lat.n_nodes)


def solve(model: RegimeModel, spec: GridSpec, grid: ControlGrid,
          *, progress: bool = False) -> SolutionFields:
    """Run the full backward sweep from the terminal slice to time zero."""
    bad = validate_model(model)
    if bad:
        raise ConfigError("invalid model: " + "; ".join(bad))
    spec.check_horizon(model.T)
    lat = build_grid(spec, model.m)
    N = spec.n_steps
    fields = SolutionFields(
        model=model, spec=spec, lat=lat, grid=grid,
        V=np.empty((N + 1, lat.n_nodes)),
        g=np.empty((N + 1, lat.n_nodes)),
        policy=np.empty((N, lat.n_nodes), dtype=np.int32),
        clamped_mass=np.zeros(N),
    )
    fields.V[N] = lat.x
    fields.g[N] = lat.x
    cache = StencilCache(model, lat, grid)
    cmat = _quad_coefficients(model, lat)
    report_every = max(1, N // 10)
    for n in range(N - 1, -1, -1):
        step_back(model, fields, n, cache, cmat)
        if progress and n % report_every == 0:
            log.info("slice %d/%d done", N - n, N)
    fields.cfl_max_mass = max(b.max_mass for b in cache._batches.values())
    fields.stay_residual = max(b.stay_residual for b in cache._batches.values())
    return fields


# ---------------------------------------------------------------------------
# post-hoc checks and derived quantities


def spike_margins(model: RegimeModel, fields: SolutionFields, n: int,
                  policy_row: np.ndarray | None = None,
                  cache: StencilCache | None = None,
                  cmat: FloatArray | None = None) -> FloatArray:
    """Per-node one-step deviation margin at slice ``n``.

    ``min_c candidate(c) - candidate(stored policy)``; nonnegative up to
    roundoff exactly when the stored policy is the per-node argmin.
    """
    lat, grid = fields.lat, fields.grid
    if cache is None:
        cache = StencilCache(model, lat, grid)
    if cmat is None:
        cmat = _quad_coefficients(model, lat)
    batch = cache.batch(fields.time_of(n))
    cand = _candidates(model, lat, batch, cache.pi_arr,
                       fields.V[n + 1], fields.g[n + 1], cmat)
    row = fields.policy[n] if policy_row is None else policy_row
    stored = cand[row, np.arange(lat.n_nodes)]
    return cand.min(axis=0) - stored


def spike_check(model: RegimeModel, fields: SolutionFields, n: int,
                node_idx: int) -> float:
    """Margin of the stored policy at one (slice, node)."""
    return float(spike_margins(model, fields, n)[node_idx])


def g_residuals(model: RegimeModel, fields: SolutionFields, n: int,
                cache: StencilCache | None = None) -> FloatArray:
    """|g_n - stencil average of g_{n+1} under the stored policy| per node."""
    lat = fields.lat
    if cache is None:
        cache = StencilCache(model, lat, fields.grid)
    batch = cache.batch(fields.time_of(n))
    probs_sel = _select(batch.probs, fields.policy[n])
    expect = np.einsum("on,no->n", probs_sel, fields.g[n + 1][lat.neighbors])
    return np.abs(fields.g[n] - expect)


def ratio_policy(fields: SolutionFields, n: int) -> tuple[FloatArray, np.ndarray]:
    """Risky-position-to-wealth ratio u/x per node at slice ``n``.

    Returns ``(w, defined)``; entries with zero wealth are NaN with
    ``defined`` False.
    """
    x = fields.lat.x
    u = fields.policy_u(n)
    defined = x != 0.0
    w = np.full_like(u, np.nan)
    w[defined] = u[defined] / x[defined, None]
    return w, defined
