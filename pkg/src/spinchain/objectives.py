"""Infidelity and the objective functionals.

* ``infidelity``    -- F(psi; psig) = 1 - |<psi, psig>|^2,
* ``objective_I``   -- terminal infidelity (transfer) or terminal plus
  P_psi times the running infidelity integral (keeping),
* ``objective_Phi`` -- objective_I plus the weighted control-energy
  penalty integral,
* ``objective_f3``  -- terminal infidelity of the discretized
  five-segment control plus an l1 penalty on its samples,
* ``objective_f4``  -- worst node infidelity of the discretized sine
  control plus an l1 penalty on its samples.

Integrals use the composite trapezoid rule on the trajectory grid; the
grid resolution is up to the caller (1001 nodes by default upstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controls import ControlSignal, SineBasisControl, SpecialClassControl, discretize_pconst
from .dynamics import Trajectory, propagate_pconst
from .model import ChainModel, WeightFunction

__all__ = [
    "ProblemSpec",
    "transfer_problem",
    "keeping_problem",
    "infidelity",
    "objective_I",
    "objective_Phi",
    "objective_f3",
    "objective_f4",
]


def _unit(psi, tol: float = 1e-8) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state must have unit norm, |psi| = {nrm}")
    return psi


@dataclass(frozen=True)
class ProblemSpec:
    """Transfer or keeping problem with its penalty weights.

    Transfer drives psi0 towards psig (default: first to last site);
    keeping starts at psig and penalises leaving it along the way, which
    requires P_psi > 0.
    """

    kind: str
    psi0: np.ndarray
    psig: np.ndarray
    weights: tuple[WeightFunction, WeightFunction]
    P_psi: float = 0.0
    P_u: tuple[float, float] = (0.0, 0.0)
    P_x: float = 0.0
    P_y: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi0", _unit(self.psi0))
        object.__setattr__(self, "psig", _unit(self.psig))
        overlap = abs(np.vdot(self.psig, self.psi0)) ** 2
        if self.kind == "transfer":
            if overlap >= 1.0 - 1e-12:
                raise ValueError("transfer problem needs psi0 not already at the target")
        elif self.kind == "keeping":
            if abs(overlap - 1.0) > 1e-12:
                raise ValueError("keeping problem needs |<psi0, psig>|^2 = 1")
            if not self.P_psi > 0:
                raise ValueError("keeping problem needs P_psi > 0")
        else:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if any(p < 0 for p in self.P_u) or self.P_x < 0 or self.P_y < 0 or self.P_psi < 0:
            raise ValueError("penalty weights must be nonnegative")


def _basis(n: int, k: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[k] = 1.0
    return e


def transfer_problem(
    model: ChainModel,
    P_u: tuple[float, float] = (0.0, 0.0),
    P_x: float = 0.0,
    C_S: tuple[float, float] = (20.0, 20.0),
    psi0=None,
    psig=None,
) -> ProblemSpec:
    """Excitation transfer from the first to the last site."""
    return ProblemSpec(
        kind="transfer",
        psi0=_basis(model.N, 0) if psi0 is None else psi0,
        psig=_basis(model.N, model.N - 1) if psig is None else psig,
        weights=(WeightFunction(T=model.T, C=C_S[0]), WeightFunction(T=model.T, C=C_S[1])),
        P_u=P_u,
        P_x=P_x,
    )


def keeping_problem(
    model: ChainModel,
    P_psi: float = 1.0,
    P_u: tuple[float, float] = (0.0, 0.0),
    P_y: float = 0.0,
    C_S: tuple[float, float] = (20.0, 20.0),
    psig=None,
) -> ProblemSpec:
    """Keep the excitation at the last site over the whole horizon."""
    target = _basis(model.N, model.N - 1) if psig is None else psig
    return ProblemSpec(
        kind="keeping",
        psi0=target,
        psig=target,
        weights=(WeightFunction(T=model.T, C=C_S[0]), WeightFunction(T=model.T, C=C_S[1])),
        P_psi=P_psi,
        P_u=P_u,
        P_y=P_y,
    )


def infidelity(psi, psig) -> float:
    """F(psi; psig) = 1 - |<psi, psig>|^2, in [0, 1] for unit vectors.

    Invariant under a global phase of either argument; for the standard
    target e_N this reduces to 1 - (Re psi_N)^2 - (Im psi_N)^2.
    """
    psi = _unit(psi)
    psig = _unit(psig)
    return float(1.0 - abs(np.vdot(psig, psi)) ** 2)


def _infidelity_curve(traj: Trajectory, psig: np.ndarray) -> np.ndarray:
    return 1.0 - np.abs(traj.states @ np.conj(psig)) ** 2


def objective_I(traj: Trajectory, spec: ProblemSpec) -> float:
    """I_1 (transfer) or I_2 (keeping) evaluated on a trajectory."""
    if traj.times.size == 0:
        raise ValueError("empty trajectory")
    val = infidelity(traj.final_state, spec.psig)
    if spec.kind == "keeping":
        curve = _infidelity_curve(traj, spec.psig)
        val += spec.P_psi * float(np.trapezoid(curve, traj.times))
    return val


def control_penalty(traj_times: np.ndarray, control: ControlSignal, spec: ProblemSpec) -> float:
    """Trapezoid value of int sum_l P_ul S_l(t) u_l(t)^2 dt on the grid."""
    u = np.asarray(control(traj_times), dtype=float)  # (K, 2)
    total = 0.0
    for l in range(2):
        if spec.P_u[l] == 0.0:
            continue
        s = np.asarray(spec.weights[l](traj_times), dtype=float)
        total += spec.P_u[l] * float(np.trapezoid(s * u[:, l] ** 2, traj_times))
    return total


def objective_Phi(traj: Trajectory, control: ControlSignal, spec: ProblemSpec) -> float:
    """Phi_p = I_p plus the weighted control-energy integral."""
    return objective_I(traj, spec) + control_penalty(traj.times, control, spec)


def objective_f3(
    control: SpecialClassControl,
    model: ChainModel,
    spec: ProblemSpec,
    grid,
    expm_method: str = "auto",
) -> float:
    """Terminal infidelity of the discretized five-segment control plus
    P_x times the l1 norm of its left-endpoint samples."""
    pconst = discretize_pconst(control, grid, envelopes=control.envelopes)
    traj = propagate_pconst(model, pconst, spec.psi0, method=expm_method)
    val = infidelity(traj.final_state, spec.psig)
    if spec.P_x > 0:
        val += spec.P_x * float(np.sum(np.abs(pconst.a)))
    return val


def objective_f4(
    control: SineBasisControl,
    model: ChainModel,
    spec: ProblemSpec,
    grid,
    expm_method: str = "auto",
) -> float:
    """Worst node infidelity (over j = 1..M) of the discretized sine
    control plus P_y times the l1 norm of its samples."""
    pconst = discretize_pconst(control, grid, envelopes=control.envelopes)
    traj = propagate_pconst(model, pconst, spec.psi0, method=expm_method)
    curve = _infidelity_curve(traj, spec.psig)
    val = float(np.max(curve[1:]))  # t_0 excluded; keeping starts at F = 0
    if spec.P_y > 0:
        val += spec.P_y * float(np.sum(np.abs(pconst.a)))
    return val
