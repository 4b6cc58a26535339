"""Forward-backward splitting on the dual TV problem, with and without coarse corrections."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coarse import CoarseDataTerm, build_coarse_model, coarse_fb_iterate
from .core import (
    GridShape,
    Never,
    SolveTrace,
    SolverConfig,
    TraceRecord,
    dual_objective,
    is_feasible,
    project_ball_field,
    relative_error,
)
from .transfer import GridTransfer
from .tv_ops import divergence_adjoint

__all__ = [
    "LineSearchOutcome",
    "fb_step",
    "line_search",
    "fbmg_solve",
    "fb_solve",
    "iteration_comparison_number",
    "fixed_point_residual",
]


def fb_step(x, dt, alpha, tau):
    """One step ``P_ball(x - tau grad F(x))``."""
    return project_ball_field(x - tau * dt.smooth_gradient(x), alpha)


def fixed_point_residual(x, dt, alpha, tau) -> float:
    return float(np.linalg.norm(x - fb_step(x, dt, alpha, tau)))


@dataclass
class LineSearchOutcome:
    theta: float
    accepted: bool
    candidate_theta_bar: float
    point: Optional[np.ndarray] = None


def line_search(x, d, dt, alpha, omega=0.4, boundary_tol=1e-12, value=None, mode="projected"):
    """Try the scaled exact step of the smooth part along ``d``.

    The candidate step is ``omega <T^{-1}(e - div* x), div* d> / |T^{-1/2} div* d|^2``
    (clamped at 0). With ``mode="fixed"`` the trial point ``x + theta d`` is
    kept only if it stays inside every ball; with ``mode="projected"`` it is
    first projected back onto the balls. Either way the trial point must not
    increase the dual objective, otherwise the correction is dropped
    (``theta = 0``). ``point`` holds the point the fine step starts from.
    """
    if mode not in ("fixed", "projected"):
        raise ValueError(f"unknown line-search mode {mode!r}")
    div_d = divergence_adjoint(d)
    curv = dt.quad_inv(div_d)
    if curv <= 0:
        return LineSearchOutcome(0.0, True, 0.0, x)
    y = dt.primal_recover(x)
    theta_bar = max(0.0, omega * float(np.vdot(y, div_d)) / curv)
    if theta_bar == 0.0:
        return LineSearchOutcome(0.0, True, 0.0, x)
    z = x + theta_bar * d
    if mode == "projected":
        z = project_ball_field(z, alpha)
    elif not is_feasible(z, alpha, boundary_tol):
        return LineSearchOutcome(0.0, False, theta_bar, x)
    v0 = dual_objective(x, dt, alpha, boundary_tol) if value is None else value
    if dual_objective(z, dt, alpha, boundary_tol) <= v0:
        return LineSearchOutcome(theta_bar, True, theta_bar, z)
    return LineSearchOutcome(0.0, False, theta_bar, x)


def iteration_comparison_number(trace: SolveTrace, coarse_ratio: float, m: int):
    """Fine iterations plus coarse iterations weighted by ``coarse_ratio``.

    Recomputes the ``icn`` column from the per-record correction flags.
    """
    out = []
    fine = coarse = 0
    for rec in trace:
        if rec.iter > 0:
            fine += 1
            if rec.corrected:
                coarse += m
        out.append(fine + coarse * coarse_ratio)
    return np.array(out)


def fbmg_solve(x0, dt, config: SolverConfig, vstar=None, callback=None):
    """Two-grid forward-backward multigrid.

    Parameters
    ----------
    x0 : ndarray, shape (2, rows, cols)
        Feasible starting dual field.
    dt : DataTerm
    config : SolverConfig
    vstar : float, optional
        Reference optimal value; fills the ``relative`` column and enables
        ``config.target_relative`` as a stopping rule.
    callback : callable, optional
        Called as ``callback(k, x)`` after each iteration.

    Returns
    -------
    x : ndarray
        Final dual iterate.
    trace : SolveTrace
    """
    x = np.array(x0, dtype=float)
    alpha, tau = config.alpha, config.tau
    if not is_feasible(x, alpha, config.boundary_tol):
        raise ValueError("starting point is infeasible")
    trigger = config.trigger if config.trigger is not None else Never()
    multigrid = not isinstance(trigger, Never) and config.m > 0

    transfer = smooth = None
    ratio = 0.0
    if multigrid:
        transfer = GridTransfer(GridShape.of(x))
        smooth = CoarseDataTerm(dt, transfer)
        ratio = transfer.coarse.n / transfer.fine.n
        config.validate(dt.lipschitz, smooth.lipschitz)
    else:
        config.validate(dt.lipschitz)

    v = dual_objective(x, dt, alpha, config.boundary_tol)
    trace = SolveTrace()
    trace.append(TraceRecord(0, 0.0, 0.0, v))
    icn = 0.0
    cpu = 0.0
    n_corr = 0
    for k in range(config.max_iter):
        t0 = time.process_time()
        corrected = False
        theta = 0.0
        z = x
        if multigrid and trigger.fires(k, n_corr):
            model = build_coarse_model(
                x, dt, transfer, alpha,
                boundary_band=config.boundary_band,
                boundary_tol=config.boundary_tol,
                cone_tol=config.cone_tol,
                smooth=smooth,
            )
            zeta, _ = coarse_fb_iterate(model, config.m, config.tau_H)
            d = transfer.prolong(zeta - model.anchor)
            ls = line_search(x, d, dt, alpha, config.omega, config.boundary_tol,
                             value=v, mode=config.line_search)
            theta = ls.theta
            z = ls.point
            corrected = True
            n_corr += 1
            icn += config.m * ratio
        x = fb_step(z, dt, alpha, tau)
        icn += 1
        cpu += time.process_time() - t0
        v = dual_objective(x, dt, alpha, config.boundary_tol)
        rec = TraceRecord(k + 1, icn, cpu, v, theta=theta, corrected=corrected)
        if vstar is not None:
            rec.relative = relative_error(v, trace.records[0].objective, vstar)
        trace.append(rec)
        if callback is not None:
            callback(k, x)
        if (vstar is not None and config.target_relative is not None
                and rec.relative <= config.target_relative):
            break
    if vstar is not None:
        trace.records[0].relative = 1.0
    return x, trace


def fb_solve(x0, dt, config: SolverConfig, vstar=None, callback=None):
    """Plain forward-backward: :func:`fbmg_solve` with a trigger that never fires."""
    cfg = SolverConfig(**{**config.__dict__, "trigger": Never()})
    return fbmg_solve(x0, dt, cfg, vstar=vstar, callback=callback)
