"""Deterministic text serialization of run artifacts.

All emitters produce plain CSV ('.' decimal separator, '\\n' line ends,
UTF-8) or JSON lines, with no timestamps, so identical inputs yield
byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .adjoint import GradientSignal
from .dynamics import Trajectory
from .ga import SearchResult
from .gpm import OptimizerRun

__all__ = [
    "format_trajectory_csv",
    "format_infidelity_csv",
    "format_gradient_csv",
    "format_gpm_history_csv",
    "format_ga_history_jsonl",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_trajectory_csv(traj: Trajectory, psig) -> str:
    """Columns: t, Re psi_1..N, Im psi_1..N, norm, infidelity."""
    psig = np.asarray(psig, dtype=complex)
    n = traj.N
    header = (
        ["t"]
        + [f"re_psi_{i}" for i in range(1, n + 1)]
        + [f"im_psi_{i}" for i in range(1, n + 1)]
        + ["norm", "infidelity"]
    )
    norms = traj.norms()
    infid = 1.0 - np.abs(traj.states @ np.conj(psig)) ** 2
    lines = [",".join(header)]
    for k, t in enumerate(traj.times):
        row = [_fmt(t)]
        row += [_fmt(v) for v in traj.states[k].real]
        row += [_fmt(v) for v in traj.states[k].imag]
        row += [_fmt(norms[k]), _fmt(infid[k])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def format_infidelity_csv(traj: Trajectory, psig) -> str:
    """Columns: t, infidelity."""
    psig = np.asarray(psig, dtype=complex)
    infid = 1.0 - np.abs(traj.states @ np.conj(psig)) ** 2
    lines = ["t,infidelity"]
    lines += [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(traj.times, infid)]
    return "\n".join(lines) + "\n"


def format_gradient_csv(grad: GradientSignal) -> str:
    """Columns: t, g1, g2."""
    lines = ["t,g1,g2"]
    lines += [
        f"{_fmt(t)},{_fmt(v[0])},{_fmt(v[1])}" for t, v in zip(grad.times, grad.values)
    ]
    return "\n".join(lines) + "\n"


def format_gpm_history_csv(run: OptimizerRun) -> str:
    """Columns: iter, objective, residual, alpha, forward_solves (cumulative)."""
    lines = ["iter,objective,residual,alpha,forward_solves"]
    for k, (obj, res, alp, nsol) in enumerate(
        zip(run.objective_history, run.residual_history, run.alpha_history, run.solve_history)
    ):
        lines.append(f"{k},{_fmt(obj)},{_fmt(res)},{_fmt(alp)},{nsol}")
    return "\n".join(lines) + "\n"


def format_ga_history_jsonl(result: SearchResult) -> str:
    """One JSON object per generation: gen, best, mean, evals."""
    lines = []
    for gen, (best, mean, evals) in enumerate(
        zip(result.history, result.mean_history, result.eval_history), start=1
    ):
        lines.append(
            json.dumps(
                {"gen": gen, "best": best, "mean": mean, "evals": evals},
                separators=(", ", ": "),
            )
        )
    return "\n".join(lines) + "\n"
