"""Projected-gradient iterations with one, two and three steps of memory.

Each iteration forward-solves the dynamics, backward-solves the costate,
assembles the gradient and updates the piecewise-linear control nodes

    u+ = Pr_box( u - alpha grad + beta (u - u_prev) + gamma (u_prev - u_pprev) )

with the projection applied last.  beta = gamma = 0 gives the plain
one-step method; the momentum variants bootstrap from it (the two-step
form needs one previous iterate, the three-step form needs two).  The
step size alpha is found by halving from alpha0 until the objective
decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import GradientSignal, gradient, pmp_residual, solve_adjoint
from .controls import ControlSignal, Envelope, PLinearControl
from .dynamics import propagate_continuous
from .model import ChainModel, ShiftFunction
from .objectives import ProblemSpec, objective_Phi

__all__ = ["GPMConfig", "OptimizerRun", "gpm_step", "run_gpm"]

_VARIANTS = ("1s", "2s", "3s")


@dataclass(frozen=True)
class GPMConfig:
    """Iteration parameters for the projected-gradient loop."""

    variant: str = "1s"
    alpha0: float = 1.0
    backtrack: float = 0.5
    beta: float = 0.0
    gamma: float = 0.0
    max_iters: int = 50
    tol_obj: float = 1e-10
    tol_res: float = 1e-8
    grid_nodes: int = 1001
    solver_tol: float = 1e-10
    max_halvings: int = 30

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 <= self.beta < 1 or not 0 <= self.gamma < 1:
            raise ValueError("momentum parameters must lie in [0, 1)")
        if self.max_iters < 1 or self.grid_nodes < 2:
            raise ValueError("max_iters >= 1 and grid_nodes >= 2 required")


@dataclass
class OptimizerRun:
    """History of one projected-gradient run."""

    iterates: list[np.ndarray] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)
    alpha_history: list[float] = field(default_factory=list)
    solve_history: list[int] = field(default_factory=list)
    forward_solve_count: int = 0
    status: str = "running"

    @property
    def final_objective(self) -> float:
        return self.objective_history[-1]

    @property
    def final_alpha(self) -> float:
        return self.alpha_history[-1] if self.alpha_history else float("nan")

    @property
    def best_control(self) -> np.ndarray:
        return self.iterates[-1]


def gpm_step(
    u_k: PLinearControl,
    u_km1: PLinearControl | None,
    u_km2: PLinearControl | None,
    grad_k: GradientSignal,
    cfg: GPMConfig,
    envelopes: tuple[Envelope, Envelope],
    alpha: float | None = None,
) -> PLinearControl:
    """One projected update of the control nodes.

    Momentum histories are required by the variant: the two-step form
    needs ``u_km1``, the three-step form ``u_km1`` and ``u_km2``.
    """
    if cfg.variant in ("2s", "3s") and u_km1 is None:
        raise ValueError(f"variant {cfg.variant} needs the previous iterate")
    if cfg.variant == "3s" and u_km2 is None:
        raise ValueError("variant 3s needs the two previous iterates")
    times = u_k.grid
    if grad_k.times.size != times.size or not np.allclose(grad_k.times, times, rtol=0, atol=1e-12):
        raise ValueError("gradient and control must share one grid")
    a = cfg.alpha0 if alpha is None else alpha
    z = u_k.values - a * grad_k.values
    if cfg.variant in ("2s", "3s") and u_km1 is not None:
        z = z + cfg.beta * (u_k.values - u_km1.values)
    if cfg.variant == "3s" and u_km2 is not None:
        z = z + cfg.gamma * (u_km1.values - u_km2.values)
    b = np.stack([np.asarray(env(times), dtype=float) for env in envelopes], axis=-1)
    return PLinearControl(grid=times, values=np.clip(z, -b, b))


def _project_control(control: ControlSignal, grid: np.ndarray, envelopes) -> PLinearControl:
    vals = np.atleast_2d(np.asarray(control(grid), dtype=float))
    b = np.stack([np.asarray(env(grid), dtype=float) for env in envelopes], axis=-1)
    return PLinearControl(grid=grid, values=np.clip(vals, -b, b))


def run_gpm(
    model: ChainModel,
    spec: ProblemSpec,
    envelopes: tuple[Envelope, Envelope],
    u0: ControlSignal,
    cfg: GPMConfig,
) -> OptimizerRun:
    """Iterate the projected-gradient method from u0 until a stop fires.

    Stops on the residual tolerance (checked before stepping), on an
    objective decrease below ``tol_obj``, on ``max_iters``, or when no
    decreasing step is found within ``max_halvings`` halvings.
    """
    sigma = ShiftFunction.linear(model)
    grid = np.linspace(0.0, model.T, cfg.grid_nodes)
    u = _project_control(u0, grid, envelopes)
    run = OptimizerRun()

    def solve(ctrl: PLinearControl):
        traj = propagate_continuous(
            model, ctrl, sigma, tol=cfg.solver_tol, output_grid=grid, psi0=spec.psi0
        )
        run.forward_solve_count += 1
        return traj

    traj = solve(u)
    phi = objective_Phi(traj, u, spec)
    if not np.isfinite(phi):
        raise FloatingPointError(f"objective is not finite at the initial control: {phi}")
    u_prev: PLinearControl | None = None
    u_pprev: PLinearControl | None = None
    alpha_ref = cfg.alpha0

    for k in range(cfg.max_iters):
        eta = solve_adjoint(model, u, sigma, traj, spec, tol=cfg.solver_tol)
        grad = gradient(model, u, sigma, traj, eta, spec)
        res = pmp_residual(u, grad, alpha_ref, envelopes)

        run.iterates.append(u.values.copy())
        run.objective_history.append(phi)
        run.residual_history.append(res)
        run.alpha_history.append(alpha_ref)
        run.solve_history.append(run.forward_solve_count)
        if res < cfg.tol_res:
            run.status = "residual"
            return run

        # bootstrap: momentum variants fall back to plain steps until
        # enough history has accumulated
        step_cfg = cfg
        if cfg.variant == "2s" and u_prev is None:
            step_cfg = replace(cfg, variant="1s")
        elif cfg.variant == "3s":
            if u_prev is None:
                step_cfg = replace(cfg, variant="1s")
            elif u_pprev is None:
                step_cfg = replace(cfg, variant="2s")

        alpha = cfg.alpha0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = gpm_step(u, u_prev, u_pprev, grad, step_cfg, envelopes, alpha=alpha)
            cand_traj = solve(cand)
            cand_phi = objective_Phi(cand_traj, cand, spec)
            if not np.isfinite(cand_phi):
                raise FloatingPointError(f"objective is not finite during backtracking: {cand_phi}")
            if cand_phi < phi:
                accepted = True
                break
            alpha *= cfg.backtrack
        if not accepted:
            run.status = "stalled"
            return run

        decrease = phi - cand_phi
        u_pprev, u_prev = u_prev, u
        u, traj, phi = cand, cand_traj, cand_phi
        alpha_ref = alpha
        if decrease < cfg.tol_obj:
            run.iterates.append(u.values.copy())
            run.objective_history.append(phi)
            eta = solve_adjoint(model, u, sigma, traj, spec, tol=cfg.solver_tol)
            grad = gradient(model, u, sigma, traj, eta, spec)
            run.residual_history.append(pmp_residual(u, grad, alpha_ref, envelopes))
            run.alpha_history.append(alpha_ref)
            run.solve_history.append(run.forward_solve_count)
            run.status = "objective"
            return run

    run.iterates.append(u.values.copy())
    run.objective_history.append(phi)
    eta = solve_adjoint(model, u, sigma, traj, spec, tol=cfg.solver_tol)
    grad = gradient(model, u, sigma, traj, eta, spec)
    run.residual_history.append(pmp_residual(u, grad, alpha_ref, envelopes))
    run.alpha_history.append(alpha_ref)
    run.solve_history.append(run.forward_solve_count)
    run.status = "max_iters"
    return run
