"""Experiment registry. Each experiment writes its files into ``out`` and returns a summary record."""
from __future__ import annotations

import math
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..asymptotics import error_series, extract_profile, lane_emden_residual, linearized_spectrum, rate_fit
from ..decay import audit_trajectory, params_for, t_star_upper
from ..explicit import UnconditionallyUnstable, cfl_max_dt, instability_detected, run_explicit
from ..extinction import dichotomy, run_rescaled
from ..implicit import backend_name, run, sample_initial
from ..kernel import Grid, kernel_for_grid
from ..spaces import lq_norm
from ..stationary import optimal_constant
from . import io
from .config import ConfigError, ExperimentConfig, config_record
from .convergence import space_convergence, time_convergence

__all__ = ["REGISTRY", "register", "run_experiment", "UnknownExperiment", "ExperimentFailed"]

REGISTRY: dict[str, Callable] = {}


class UnknownExperiment(ConfigError):
    pass


class ExperimentFailed(RuntimeError):
    def __init__(self, record: dict):
        super().__init__(record.get("message", "experiment failed"))
        self.record = record


def register(name: str):
    def deco(fn):
        REGISTRY[name] = fn
        return fn

    return deco


def _setup(cfg: ExperimentConfig):
    cfg.require("q", "theta", "L", "h", "initial")
    grid = Grid.from_step(cfg.L, cfg.h)
    kernel = kernel_for_grid(cfg.theta, grid)
    try:
        u0 = sample_initial(grid, cfg.initial)
    except ValueError as exc:
        raise ConfigError("config.initial", str(exc)) from exc
    return grid, kernel, u0


def _constant(cfg, kernel, grid):
    return cfg.C if cfg.C is not None else optimal_constant(kernel, cfg.q, grid=grid)


@register("decay")
def decay_experiment(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Implicit run audited against the decay envelopes."""
    cfg.require("dt")
    grid, kernel, u0 = _setup(cfg)
    n_steps = cfg.steps_for(cfg.dt)
    C = _constant(cfg, kernel, grid)
    params = params_for(kernel, u0, cfg.q, cfg.dt, C)
    traj = run(kernel, u0, cfg.dt, cfg.q, n_steps)
    audit = audit_trajectory(traj, params, cfg.q)
    io.write_trajectory_csv(out / "trajectory.csv", traj, audit)
    log_lq = traj.log_lq_norms
    rec = {
        "C": C,
        "R0": params.R0,
        "u0_lq_norm": params.u0_lq,
        "final_log_lq_norm": float(log_lq[-1]),
        "strictly_decreasing": bool(np.all(np.diff(log_lq) < 0)),
        "mean_newton_iterations": float(np.mean(traj.newton_iterations[1:])) if n_steps else 0.0,
        "audit": audit.summary(),
    }
    if cfg.q > 2:
        rec["t_star_upper"] = t_star_upper(params)
    return rec


@register("convergence")
def convergence_experiment(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Time (``kind = time``) or space (``kind = space``) self-convergence over a q/theta sweep."""
    if cfg.kind not in ("time", "space"):
        raise ConfigError("config.kind", f"must be 'time' or 'space', got {cfg.kind!r}")
    cfg.require("L", "initial", "T")
    if not cfg.refinement:
        raise ConfigError("config.refinement", "at least two levels are required")
    qs = cfg.q_list or ((cfg.q,) if cfg.q is not None else ())
    ths = cfg.theta_list or ((cfg.theta,) if cfg.theta is not None else ())
    if not qs:
        raise ConfigError("config.q", "q or q_list is required")
    if not ths:
        raise ConfigError("config.theta", "theta or theta_list is required")
    rows, cells = [], []
    for q in qs:
        for th in ths:
            if cfg.kind == "time":
                cfg.require("h", "dt_ref")
                res = time_convergence(q, th, cfg.L, cfg.h, cfg.T, cfg.initial, cfg.refinement, cfg.dt_ref, threads=threads)
            else:
                cfg.require("dt", "h_ref")
                res = space_convergence(q, th, cfg.L, cfg.dt, cfg.T, cfg.initial, cfg.refinement, cfg.h_ref, threads=threads)
            for r in res:
                rows.append((q, th, r.level, r.error, r.observed_order))
            orders = [r.observed_order for r in res if r.observed_order is not None]
            cells.append({"q": q, "theta": th, "finest_order": orders[-1] if orders else None, "orders": orders})
    io.write_csv(out / "convergence.csv", f"{cfg.kind}-convergence", ("q", "theta", "level", "error", "observed_order"), rows)
    return {"kind": cfg.kind, "cells": cells}


@register("extinction")
def extinction_experiment(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Dichotomy estimate of the extinction time."""
    cfg.require("ds")
    grid, kernel, u0 = _setup(cfg)
    C = _constant(cfg, kernel, grid)
    rep = dichotomy(kernel, u0, cfg.q, cfg.ds, cfg.epsilon, C, max_probes=cfg.max_probes)
    rows = [(k, *h) for k, h in enumerate(rep.bracket_history)]
    io.write_csv(out / "dichotomy.csv", "dichotomy", ("probe", "t1", "t2", "t0", "outcome", "fired_step"), rows)
    rec = rep.as_record()
    rec["C"] = C
    return rec


@register("asymptotics")
def asymptotics_experiment(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Profile near extinction, linearized spectrum and error rates at the dichotomy's ``t_star``."""
    cfg.require("ds")
    grid, kernel, u0 = _setup(cfg)
    C = _constant(cfg, kernel, grid)
    rep = dichotomy(kernel, u0, cfg.q, cfg.ds, cfg.epsilon, C, max_probes=cfg.max_probes)
    t0 = rep.t_star
    n_steps = None if cfg.s_max is None else int(round(cfg.s_max / cfg.ds))
    r = run_rescaled(kernel, u0, cfg.q, t0, cfg.ds, C, cfg.epsilon, mu_h=rep.mu_h, n_steps=n_steps, stop_on_threshold=False)
    traj = r.trajectory
    prof = extract_profile(traj.field(traj.n_states - 1), kernel, cfg.q, t0)
    spec = linearized_spectrum(prof, kernel, cfg.q, t0)
    fit = rate_fit(traj, prof, kernel, cfg.q)
    s, ex, eq = error_series(traj, prof, kernel)
    io.write_profile_csv(out / "profile.csv", prof)
    io.write_csv(out / "error.csv", "profile-error", ("s", "x_error", "lq_error"), zip(s, ex, eq))
    return {
        "t_star": t0,
        "C": C,
        "s_final": float(s[-1]),
        "threshold_outcome": r.outcome,
        "lane_emden_residual": lane_emden_residual(prof, kernel, cfg.q, t0),
        "nu0": spec.nu0,
        "nu_first": spec.nu_first,
        "profile_alignment": spec.profile_alignment,
        "predicted_decay_slope": spec.predicted_decay_slope(cfg.q),
        "predicted_growth_slope": 1.0 / t0,
        "decay_slope": fit.decay_slope,
        "growth_slope": fit.growth_slope,
        "turn_time": fit.turn_time,
    }


@register("explicit")
def explicit_experiment(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Explicit scheme; ``dt`` defaults to ``cfl_factor`` times the CFL bound when ``q < 2``."""
    grid, kernel, u0 = _setup(cfg)
    sup = float(np.max(np.abs(u0.values)))
    rec = {}
    try:
        cfl = cfl_max_dt(kernel, cfg.q, sup, grid.M_x)
        rec.update(cfl_dt_max=cfl.dt_max, cfl_closed_form=cfl.dt_closed_form)
    except UnconditionallyUnstable as exc:
        cfl = None
        rec["cfl"] = str(exc)
    if cfg.dt is not None:
        dt = cfg.dt
    elif cfl is not None:
        dt = cfg.cfl_factor * cfl.dt_max
    else:
        raise ConfigError("config.dt", "required when no CFL bound exists (q >= 2)")
    if cfg.n_steps is not None:
        n_steps = cfg.n_steps
    else:
        cfg.require("T")
        n_steps = math.ceil(cfg.T / dt - 1e-9)
    traj = run_explicit(kernel, u0, dt, cfg.q, n_steps)
    io.write_trajectory_csv(out / "trajectory.csv", traj)
    lq = traj.log_lq_norms
    rec.update(
        dt=dt,
        steps_run=traj.n_states - 1,
        instability=instability_detected(traj),
        flags=[{"n": n, "reason": why} for n, why in traj.flags],
        monotone_decay=bool(np.all(np.diff(lq) < 0)),
        initial_lq_norm=lq_norm(u0, cfg.q),
    )
    return rec


def _failure_record(cfg_name, exc) -> dict:
    rec = {
        "status": "failed",
        "experiment": cfg_name,
        "error_type": type(exc).__name__,
        "message": str(exc),
    }
    if isinstance(exc, ConfigError):
        rec["field"] = exc.path
    for attr in ("iterations", "residual", "status"):
        if hasattr(exc, attr) and attr not in rec:
            v = getattr(exc, attr)
            rec["solver_" + attr] = v
    rec["traceback"] = traceback.format_exception_only(type(exc), exc)[-1].strip()
    return rec


def run_experiment(cfg: ExperimentConfig, out=None, threads: int = 1) -> dict:
    """Run ``cfg`` and write ``summary.json`` (or ``failure.json``) into ``out``.

    Raises :class:`ExperimentFailed` carrying the failure record on error.
    """
    out = Path(out if out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        fn = REGISTRY.get(cfg.experiment)
        if fn is None:
            raise UnknownExperiment(
                "config.experiment", f"unknown experiment {cfg.experiment!r}; registered: {', '.join(sorted(REGISTRY))}"
            )
        rec = fn(cfg, out, threads)
    except Exception as exc:  # every failure becomes a record
        record = _failure_record(cfg.experiment, exc)
        io.write_json(out / "failure.json", record)
        raise ExperimentFailed(record) from exc
    summary = {
        "status": "ok",
        "experiment": cfg.experiment,
        "version": __version__,
        "backend": backend_name(),
        "config": config_record(cfg),
        "result": rec,
    }
    io.write_json(out / "summary.json", summary)
    return summary
