"""One-step transition law of the approximating chain.

For a node ``(x, phi)`` and a control ``(u, pi)`` the chain moves along the
lattice displacement catalog with probabilities built from upwind first
differences and central second differences of the filtered dynamics:

* wealth +-h1 carries ``(sbar^2 + 2 bbar^{+/-} h1) h2 / (2 h1^2)`` where
  ``bbar`` is the belief-averaged wealth drift and ``sbar^2`` the squared
  belief-averaged volatility row;
* belief coordinate i +-h1 carries the diagonal diffusion coefficient
  ``a_ii/2 - sum_{k != i} |a_ik| / 2`` plus the upwinded filter drift,
  all times ``h2 / h1^2``, with ``a = v v^T`` and
  ``v_i = sqrt(pi) phi_i (zeta_i - zeta_bar)``;
* the paired moves +-(e_i +- e_k) carry the sign parts of the
  off-diagonal ``a_ik`` times ``h2 / (4 h1^2)`` per ordered pair;
* the self-transition takes the complementary mass, which closes the law
  to total mass exactly 1 whenever all entries are nonnegative.

Nonnegativity of the belief-diagonal entries requires the belief diffusion
matrix to be diagonally dominant; with two regimes this always holds, with
three or more it restricts the admissible beliefs (the construction fails
fast with a scheme error rather than clipping).

The one-step mean is exact (equal to the drift times ``h2``); second
central moments match the diffusion times ``h2`` up to ``O(h1 h2)``.
Moments are evaluated on the raw displacement catalog; boundary projection
is monitored separately through occupancy metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemeError
from .filtering import full_belief
from .lattice import Lattice
from .market import FloatArray, RegimeModel

#: entries more negative than this (relative to the coefficient scale) are
#: genuine scheme failures; tinier negatives are float cancellation noise
_NEG_TOL = 1e-13


def drift_bar(model: RegimeModel, t: float, x, phi, u, pi):
    """Belief-averaged wealth drift r*x + theta'u - k*pi^2*x."""
    x = np.asarray(x, dtype=np.float64)
    full = full_belief(phi, m=model.m)
    r = model.riskfree_at(t)
    th_u = model.theta_at(t) @ np.asarray(u, dtype=np.float64)   # (m,)
    cost = model.cost_coeff * pi * pi * x
    per_regime = r * x[..., None] + th_u
    out = (full * per_regime).sum(axis=-1) - cost
    return float(out) if out.ndim == 0 else out


def diffusion_bar_sq(model: RegimeModel, t: float, x, phi, u):
    """Squared norm of the belief-averaged volatility row u' sigma."""
    full = full_belief(phi, m=model.m)
    usig = np.einsum("l,mlj->mj", np.asarray(u, dtype=np.float64),
                     model.vol_at(t))                            # (m, d)
    sbar = full @ usig                                           # (..., d)
    out = (sbar * sbar).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _coefficients(model: RegimeModel, lat: Lattice, t: float, u, pi):
    """Raw probability table (n_out, n_nodes) plus the consistency targets.

    No validation is performed here; callers decide between fail-fast and
    masking.  Returns ``(probs, bbar, qtil, ssT, a)``.
    """
    h1, h2 = lat.spec.h1, lat.spec.h2
    mm = model.m - 1
    c = h2 / (h1 * h1)

    full = full_belief(lat.phi, m=model.m, validate=False)       # (n, m)
    zbar = full @ model.signal_levels
    r = model.riskfree_at(t)
    th_u = model.theta_at(t) @ np.asarray(u, dtype=np.float64)
    per_regime = r[None, :] * lat.x[:, None] + th_u[None, :]
    bbar = (full * per_regime).sum(axis=1) - model.cost_coeff * pi * pi * lat.x
    usig = np.einsum("l,mlj->mj", np.asarray(u, dtype=np.float64),
                     model.vol_at(t))
    sbar = full @ usig
    ssT = (sbar * sbar).sum(axis=1)
    qtil = (full @ model.generator)[:, :mm]                      # (n, mm)

    v = np.sqrt(pi) * lat.phi * (model.signal_levels[:mm][None, :] - zbar[:, None])
    a = v[:, :, None] * v[:, None, :]                            # (n, mm, mm)
    absrow = np.abs(v) * np.abs(v).sum(axis=1, keepdims=True)    # sum_k |a_ik|
    diag = np.einsum("nii->ni", a) - 0.5 * absrow                # a_ii/2 - off/2

    probs = np.zeros((lat.n_out, lat.n_nodes))
    probs[1] = (ssT + 2.0 * np.maximum(bbar, 0.0) * h1) * (0.5 * c)
    probs[2] = (ssT + 2.0 * np.maximum(-bbar, 0.0) * h1) * (0.5 * c)
    for i in range(mm):
        probs[3 + 2 * i] = (diag[:, i] + np.maximum(qtil[:, i], 0.0) * h1) * c
        probs[4 + 2 * i] = (diag[:, i] + np.maximum(-qtil[:, i], 0.0) * h1) * c
    o = 3 + 2 * mm
    for i in range(mm):
        for k in range(mm):
            if i == k:
                continue
            ap = np.maximum(a[:, i, k], 0.0) * (0.25 * c)
            am = np.maximum(-a[:, i, k], 0.0) * (0.25 * c)
            probs[o] = ap
            probs[o + 1] = ap
            probs[o + 2] = am
            probs[o + 3] = am
            o += 4
    probs[0] = 1.0 - probs[1:].sum(axis=0)
    return probs, bbar, qtil, ssT, a


def _stay_closed_form(bbar, qtil, ssT, a, h1, h2):
    """Self-transition mass from its closed-form expression (diagnostic).

    Algebraically identical to the complement used in the construction;
    the residual against it is reported so any non-closure would surface.
    """
    quad = np.abs(a).sum(axis=(1, 2)) - 3.0 * np.einsum("nii->n", a)
    return (h2 / (2 * h1 * h1)) * quad \
        - ((np.abs(bbar) + np.abs(qtil).sum(axis=1)) * h1 + ssT) * h2 / (h1 * h1) \
        + 1.0


def stay_probability_closed_form(model, lat, t, u, pi):
    """Closed-form self-transition mass for one control (all nodes)."""
    _, bbar, qtil, ssT, a = _coefficients(model, lat, t, np.asarray(u, float),
                                          float(pi))
    return _stay_closed_form(bbar, qtil, ssT, a, lat.spec.h1, lat.spec.h2)


@dataclass
class TransitionStencil:
    """Transition probabilities from one node under one control.

    ``p_cross[i, k, 0]`` / ``p_cross[i, k, 1]`` are the weights of the
    paired moves +-(e_i + e_k) and +-(e_i - e_k) for the ordered pair
    (i, k); each applies to both displacement signs.
    """

    p_stay: float
    p_x: FloatArray          # (2,): +h1, -h1
    p_phi: FloatArray        # (m-1, 2): +h1, -h1 per coordinate
    p_cross: FloatArray      # (m-1, m-1, 2), zero diagonal

    def probs(self) -> FloatArray:
        """Flatten to the lattice outcome catalog order."""
        mm = self.p_phi.shape[0]
        out = [self.p_stay, self.p_x[0], self.p_x[1]]
        for i in range(mm):
            out += [self.p_phi[i, 0], self.p_phi[i, 1]]
        for i in range(mm):
            for k in range(mm):
                if i == k:
                    continue
                ap, am = self.p_cross[i, k]
                out += [ap, ap, am, am]
        return np.array(out)

    def mass(self) -> float:
        return float(self.probs().sum())


def _validate_probs(probs, scale, node_hint, control_hint):
    """Raise SchemeError on genuinely invalid entries; zero out float dust."""
    tol = _NEG_TOL * max(1.0, scale)
    body = probs[1:]
    worst = body.min()
    if worst < -tol:
        o, n = np.unravel_index(np.argmin(body), body.shape)
        raise SchemeError(
            f"transition weight for outcome {o + 1} at node {n} is negative "
            f"({worst:.3e}); belief diffusion is not diagonally dominant "
            "there, no time-step reduction can fix this",
            node=int(n) if node_hint is None else node_hint,
            control=control_hint, entry=int(o + 1), value=float(worst),
            shrink=None)
    np.clip(body, 0.0, None, out=body)
    stay = probs[0]
    if stay.min() < 0.0:
        n = int(np.argmin(stay))
        mass = 1.0 - stay.min()
        raise SchemeError(
            f"self-transition probability at node {n} is negative "
            f"({stay.min():.3e}): time step too large; "
            f"h2 must shrink by at least {1.0 / mass:.6g}",
            node=n if node_hint is None else node_hint,
            control=control_hint, entry=0, value=float(stay.min()),
            shrink=1.0 / mass)


def stencil(model: RegimeModel, lat: Lattice, t: float, node_idx: int,
            u, pi) -> TransitionStencil:
    """Build the validated transition stencil for one node and control."""
    probs, *_ , a = _coefficients(model, lat, t, np.asarray(u, float), float(pi))
    col = probs[:, node_idx].copy()[:, None]
    _validate_probs(col, float(np.abs(a[node_idx]).max(initial=0.0)),
                    node_idx, (np.asarray(u, float), float(pi)))
    col = col[:, 0]
    mm = model.m - 1
    p_phi = np.empty((mm, 2))
    for i in range(mm):
        p_phi[i, 0] = col[3 + 2 * i]
        p_phi[i, 1] = col[4 + 2 * i]
    p_cross = np.zeros((mm, mm, 2))
    o = 3 + 2 * mm
    for i in range(mm):
        for k in range(mm):
            if i == k:
                continue
            p_cross[i, k, 0] = col[o]
            p_cross[i, k, 1] = col[o + 2]
            o += 4
    return TransitionStencil(p_stay=float(col[0]),
                             p_x=np.array([col[1], col[2]]),
                             p_phi=p_phi, p_cross=p_cross)


@dataclass
class StencilBatch:
    """Vectorized stencils for a set of controls at one coefficient epoch.

    ``probs[c, o, n]`` is the weight of outcome ``o`` from node ``n`` under
    control ``c``; ``valid[c, n]`` marks probability laws with all entries
    in [0, 1].  ``ssT[c, n]`` is kept for the auxiliary-function correction.
    """

    probs: FloatArray        # (n_c, n_out, n_nodes)
    ssT: FloatArray          # (n_c, n_nodes)
    valid: np.ndarray        # (n_c, n_nodes) bool
    max_mass: float          # largest non-stay mass encountered
    stay_residual: float     # |closed-form self mass - complement|, max


def build_stencil_batch(model: RegimeModel, lat: Lattice, t: float,
                        u_arr: FloatArray, pi_arr: FloatArray,
                        *, strict: bool = False) -> StencilBatch:
    """Stencils for every control in ``(u_arr, pi_arr)`` at time ``t``.

    With ``strict`` any invalid entry raises; otherwise invalid
    (control, node) pairs are only masked out in ``valid``.
    """
    n_c = len(pi_arr)
    probs = np.empty((n_c, lat.n_out, lat.n_nodes))
    ssT = np.empty((n_c, lat.n_nodes))
    valid = np.ones((n_c, lat.n_nodes), dtype=bool)
    max_mass = 0.0
    stay_res = 0.0
    for ci in range(n_c):
        p, bbar, qtil, ss, a = _coefficients(model, lat, t, u_arr[ci], float(pi_arr[ci]))
        scale = float(np.abs(a).max(initial=0.0))
        tol = _NEG_TOL * max(1.0, scale)
        body = p[1:]
        bad = body < -tol
        if strict and bad.any():
            o, n = np.unravel_index(np.argmax(bad), bad.shape)
            raise SchemeError(
                f"negative transition weight at node {n}, outcome {o + 1}, "
                f"control {ci} ({body[o, n]:.3e}); belief diffusion not "
                "diagonally dominant, no time-step reduction can fix this",
                node=int(n), control=ci, entry=int(o + 1),
                value=float(body[o, n]), shrink=None)
        np.clip(body, 0.0, None, out=body)
        nonstay = body.sum(axis=0)
        max_mass = max(max_mass, float(nonstay.max()))
        p[0] = 1.0 - nonstay
        col_valid = ~(bad.any(axis=0) | (p[0] < 0.0))
        if strict and not col_valid.all():
            n = int(np.argmin(p[0]))
            raise SchemeError(
                f"self-transition probability at node {n}, control {ci} is "
                f"negative ({p[0, n]:.3e}): time step too large; h2 must "
                f"shrink by at least a factor {1.0 / nonstay[n]:.6g}",
                node=n, control=ci, entry=0, value=float(p[0, n]),
                shrink=float(1.0 / nonstay[n]))
        probs[ci] = p
        ssT[ci] = ss
        valid[ci] = col_valid
        res = _stay_closed_form(bbar, qtil, ss, a, lat.spec.h1, lat.spec.h2) - p[0]
        stay_res = max(stay_res, float(np.abs(res[col_valid]).max(initial=0.0)))
    return StencilBatch(probs=probs, ssT=ssT, valid=valid,
                        max_mass=max_mass, stay_residual=stay_res)


@dataclass
class ConsistencyReport:
    """Deviations of one-step moments from the local-consistency targets."""

    mean_dev: float          # max |E[dY] - f h2|
    second_dev: float        # max |CentralMoment2[dY] - Sigma Sigma' h2|
    second_scale: float      # second_dev / (h1 * h2)

    def ok(self, mean_tol: float = 1e-12, second_scale_tol: float = 5.0) -> bool:
        return self.mean_dev <= mean_tol and self.second_scale <= second_scale_tol


def moment_deviations(model: RegimeModel, lat: Lattice, t: float, u, pi):
    """Per-node moment deviations for one control (vectorized).

    Returns ``(mean_dev, second_dev)`` arrays of shape (n_nodes,), using
    the raw displacement catalog (no boundary projection).
    """
    h2 = lat.spec.h2
    probs, bbar, qtil, ssT, a = _coefficients(model, lat, t, np.asarray(u, float),
                                              float(pi))
    mm = model.m - 1
    disp = lat.displacements                                     # (n_out, 1+mm)
    mean = np.einsum("on,od->nd", probs, disp)                   # (n, 1+mm)
    target_mean = np.concatenate([bbar[:, None], qtil], axis=1) * h2
    mean_dev = np.abs(mean - target_mean).max(axis=1)

    second = np.einsum("on,od,oe->nde", probs, disp, disp)
    second -= mean[:, :, None] * mean[:, None, :]
    target = np.zeros_like(second)
    target[:, 0, 0] = ssT * h2
    target[:, 1:, 1:] = a * h2
    second_dev = np.abs(second - target).max(axis=(1, 2))
    return mean_dev, second_dev


def check_local_consistency(model: RegimeModel, lat: Lattice, t: float,
                            node_idx: int, u, pi) -> ConsistencyReport:
    """Moment check for a single node and control."""
    mean_dev, second_dev = moment_deviations(model, lat, t, u, pi)
    h1h2 = lat.spec.h1 * lat.spec.h2
    return ConsistencyReport(mean_dev=float(mean_dev[node_idx]),
                             second_dev=float(second_dev[node_idx]),
                             second_scale=float(second_dev[node_idx]) / h1h2)


def consistency_sweep(model: RegimeModel, lat: Lattice, t: float,
                      u_arr: FloatArray, pi_arr: FloatArray) -> ConsistencyReport:
    """Worst-case moment deviations over all nodes and controls."""
    h1h2 = lat.spec.h1 * lat.spec.h2
    worst_mean = 0.0
    worst_second = 0.0
    for ci in range(len(pi_arr)):
        mean_dev, second_dev = moment_deviations(model, lat, t, u_arr[ci],
                                                 float(pi_arr[ci]))
        worst_mean = max(worst_mean, float(mean_dev.max()))
        worst_second = max(worst_second, float(second_dev.max()))
    return ConsistencyReport(mean_dev=worst_mean, second_dev=worst_second,
                             second_scale=worst_second / h1h2)
