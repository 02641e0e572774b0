"""Config-driven orchestration behind the service endpoints.

Each entry point takes a validated ``RunConfig`` and returns a response
model whose ``files`` map contains the artifact bodies (CSV / JSONL /
JSON text); writing them to disk is the client's job, which keeps the
service stateless and the outputs reproducible.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .controls import (
    PConstControl,
    PLinearControl,
    SineBasisControl,
    SpecialClassControl,
    discretize_pconst,
    sine_basis_bounds,
    special_class_bounds,
    uniform_grid,
)
from .csvio import (
    format_ga_history_jsonl,
    format_gpm_history_csv,
    format_infidelity_csv,
    format_trajectory_csv,
)
from .dynamics import Trajectory, propagate_continuous, propagate_pconst
from .ga import SearchResult, optimize_sine_basis, optimize_special_class
from .gpm import run_gpm
from .model import ShiftFunction
from .objectives import infidelity, objective_I, objective_Phi
from .schemas import (
    OptimizeResponse,
    OracleCheckModel,
    RestartSummary,
    RunConfig,
    SimulateResponse,
    VerifyRequest,
    VerifyResponse,
    control_to_section,
)
from .verify import run_oracle_suite

__all__ = ["run_simulate", "run_optimize", "run_verify", "ConfigurationError"]


class ConfigurationError(ValueError):
    """Semantically invalid configuration (beyond schema validation)."""


def _simulate_trajectory(cfg: RunConfig, model, envelopes, spec, control) -> Trajectory:
    solver = cfg.solver
    method = solver.method
    if method == "auto":
        exact_classes = (PConstControl, SpecialClassControl, SineBasisControl)
        method = "expm" if isinstance(control, exact_classes) else "rk"
    if method == "expm":
        if isinstance(control, PConstControl):
            pconst = control
        else:
            pconst = discretize_pconst(control, uniform_grid(model.T, solver.pconst_M), envelopes)
        return propagate_pconst(model, pconst, spec.psi0, method=solver.expm_backend)
    sigma = (
        ShiftFunction.piecewise_midpoint(model, control.grid)
        if isinstance(control, PConstControl)
        else ShiftFunction.linear(model)
    )
    out = np.linspace(0.0, model.T, solver.output_nodes)
    return propagate_continuous(model, control, sigma, tol=solver.tol, output_grid=out, psi0=spec.psi0)


def run_simulate(cfg: RunConfig) -> SimulateResponse:
    model = cfg.model.chain()
    envelopes = cfg.model.envelopes()
    spec = cfg.problem.spec(model)
    control = cfg.control.build(model, envelopes)
    traj = _simulate_trajectory(cfg, model, envelopes, spec, control)

    files: dict[str, str] = {}
    if cfg.output.trajectory:
        files["trajectory.csv"] = format_trajectory_csv(traj, spec.psig)
    if cfg.output.infidelity:
        files["infidelity.csv"] = format_infidelity_csv(traj, spec.psig)
    return SimulateResponse(
        final_infidelity=infidelity(traj.final_state, spec.psig),
        final_norm=float(np.linalg.norm(traj.final_state)),
        objective=objective_I(traj, spec),
        objective_with_penalty=objective_Phi(traj, control, spec),
        files=files,
    )


def _optimize_gpm(cfg: RunConfig, model, envelopes, spec, restarts: int) -> OptimizeResponse:
    u0 = cfg.control.build(model, envelopes)
    gpm_cfg = cfg.optimizer.gpm_config(cfg.solver)
    run = run_gpm(model, spec, envelopes, u0, gpm_cfg)

    warnings = []
    if restarts > 1:
        warnings.append("projected-gradient runs are deterministic; restarts collapsed to one run")
    if run.status in ("max_iters", "stalled"):
        warnings.append(f"stopped before reaching a tolerance (status: {run.status})")

    grid = np.linspace(0.0, model.T, gpm_cfg.grid_nodes)
    best = PLinearControl(grid=grid, values=run.best_control)
    sigma = ShiftFunction.linear(model)
    traj = propagate_continuous(model, best, sigma, tol=cfg.solver.tol, output_grid=grid, psi0=spec.psi0)

    files: dict[str, str] = {}
    if cfg.output.history:
        files["history.csv"] = format_gpm_history_csv(run)
    if cfg.output.control:
        section = control_to_section(best)
        files["best_control.json"] = section.model_dump_json(by_alias=True, exclude_none=True, indent=2) + "\n"
    if cfg.output.trajectory:
        files["final_trajectory.csv"] = format_trajectory_csv(traj, spec.psig)
    return OptimizeResponse(
        best_objective=run.final_objective,
        forward_solves=run.forward_solve_count,
        status=run.status,
        restarts=[
            RestartSummary(
                restart=0,
                seed=cfg.optimizer.seed,
                best_objective=run.final_objective,
                forward_solves=run.forward_solve_count,
                status=run.status,
            )
        ],
        warnings=warnings,
        files=files,
    )


def _optimize_ga(cfg: RunConfig, model, envelopes, spec, restarts: int) -> OptimizeResponse:
    opt = cfg.optimizer
    control_class = cfg.control.control_class
    if control_class not in ("special", "sine"):
        raise ConfigurationError(
            "genetic search operates on the 'special' or 'sine' control class"
        )
    if cfg.control.grid is not None:
        grid = cfg.control.grid.build(model.T)
    else:
        grid = uniform_grid(model.T, cfg.solver.pconst_M)
    bounds = np.asarray(opt.bounds, dtype=float) if opt.bounds is not None else None

    def one_restart(idx: int):
        ga_cfg = opt.ga_config(seed_override=opt.seed + idx)
        if control_class == "special":
            return ga_cfg, *optimize_special_class(
                model, spec, grid, envelopes, ga_cfg, bounds=bounds, expm_method=cfg.solver.expm_backend
            )
        return ga_cfg, *optimize_sine_basis(
            model, spec, grid, envelopes, ga_cfg, M_sin=opt.M_sin, bounds=bounds,
            expm_method=cfg.solver.expm_backend,
        )

    if restarts == 1:
        outcomes = [one_restart(0)]
    else:
        with ThreadPoolExecutor(max_workers=min(restarts, 4)) as pool:
            outcomes = list(pool.map(one_restart, range(restarts)))

    summaries = [
        RestartSummary(
            restart=i,
            seed=ga_cfg.seed,
            best_objective=res.best_value,
            forward_solves=res.eval_count,
            status="completed",
        )
        for i, (ga_cfg, res, _ctrl) in enumerate(outcomes)
    ]
    best_idx = int(np.argmin([res.best_value for _cfg, res, _c in outcomes]))
    _best_cfg, best_res, best_ctrl = outcomes[best_idx]

    pconst = discretize_pconst(best_ctrl, grid, envelopes)
    traj = propagate_pconst(model, pconst, spec.psi0, method=cfg.solver.expm_backend)

    files: dict[str, str] = {}
    if cfg.output.history:
        files["history.jsonl"] = format_ga_history_jsonl(best_res)
    if cfg.output.control:
        if bounds is not None:
            box = bounds
        elif control_class == "special":
            box = special_class_bounds(model.T, envelopes)
        else:
            box = sine_basis_bounds(opt.M_sin, envelopes)
        section = control_to_section(best_ctrl, bounds=box)
        files["best_control.json"] = section.model_dump_json(by_alias=True, exclude_none=True, indent=2) + "\n"
    if cfg.output.trajectory:
        files["final_trajectory.csv"] = format_trajectory_csv(traj, spec.psig)
    return OptimizeResponse(
        best_objective=best_res.best_value,
        forward_solves=sum(res.eval_count for _cfg, res, _c in outcomes),
        status="completed",
        restarts=summaries,
        warnings=[],
        files=files,
    )


def run_optimize(cfg: RunConfig, restarts: int = 1) -> OptimizeResponse:
    if cfg.optimizer is None:
        raise ConfigurationError("optimize requires an 'optimizer' section in the configuration")
    if restarts < 1:
        raise ConfigurationError("restarts must be at least 1")
    model = cfg.model.chain()
    envelopes = cfg.model.envelopes()
    spec = cfg.problem.spec(model)
    if cfg.optimizer.kind == "gpm":
        return _optimize_gpm(cfg, model, envelopes, spec, restarts)
    return _optimize_ga(cfg, model, envelopes, spec, restarts)


def run_verify(req: VerifyRequest) -> VerifyResponse:
    checks = run_oracle_suite(h0_sign_flip=req.h0_sign_flip)
    return VerifyResponse(
        passed=all(c.passed for c in checks),
        checks=[
            OracleCheckModel(
                name=c.name, passed=c.passed, measured=c.measured, threshold=c.threshold, detail=c.detail
            )
            for c in checks
        ],
    )
