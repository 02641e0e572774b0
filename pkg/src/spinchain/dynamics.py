"""Forward propagation of the controlled Schroedinger dynamics.

Three routes:

* ``propagate_pconst``     -- exact chronological product of per-interval
  matrix exponentials for piecewise-constant controls (the generator is
  constant on each interval, so no Magnus machinery is needed),
* ``propagate_continuous`` -- adaptive embedded 5(4) Runge-Kutta on the
  realified 2N-dimensional system, for any control class,
* ``zero_control_state``   -- analytic solution exp(-i H0 t) psi0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .controls import ControlSignal, PConstControl
from .model import ChainModel, ShiftFunction, build_free_hamiltonian

__all__ = [
    "Trajectory",
    "Propagator",
    "PropagationError",
    "propagate_pconst",
    "propagate_continuous",
    "propagate_fixed_rk4",
    "pconst_propagator",
    "zero_control_state",
]


class PropagationError(RuntimeError):
    """Raised when a propagation cannot be carried out."""


def _internal_tol(tol: float) -> float:
    """Per-step control backing a requested trajectory accuracy.

    Global norm drift accumulates roughly one local error per accepted
    step, so the stepper runs a factor below the requested tolerance to
    keep the reported trajectory within its 10x-tol envelope.  The floor
    stays above scipy's relative-tolerance minimum.
    """
    return max(tol / 20.0, 6e-14)


@dataclass(frozen=True)
class Trajectory:
    """Sampled state (or costate) history: states[k] at times[k]."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=complex)
        if t.ndim != 1 or s.ndim != 2 or s.shape[0] != t.size:
            raise ValueError("trajectory needs times (K,) and states (K, N)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def N(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


@dataclass(frozen=True)
class Propagator:
    """Per-interval step matrices U_j = exp(A(c_j) dt_j) over a grid."""

    grid: np.ndarray
    steps: np.ndarray

    def unitarity_defect(self) -> float:
        """max over intervals of || U^dag U - I ||_max."""
        udu = np.einsum("mki,mkj->mij", self.steps.conj(), self.steps)
        eye = np.eye(self.steps.shape[-1])
        return float(np.max(np.abs(udu - eye)))


def _check_unit(psi, tol: float = 1e-8) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state must have unit norm, |psi| = {nrm}")
    return psi


def _interval_hamiltonians(model: ChainModel, control: PConstControl) -> np.ndarray:
    """Stack of constant Hamiltonians H_j = H0 + c1j diag((m-1-sigma_j-c2j)^2).

    sigma_j is the shift held on interval j: w times the interval's own
    midpoint.
    """
    h0 = build_free_hamiltonian(model)
    grid = control.grid
    mids = 0.5 * (grid[:-1] + grid[1:])
    sig = model.w * mids
    c1, c2 = control.c
    m = np.arange(model.N, dtype=float)
    diag = c1[:, None] * (m[None, :] - sig[:, None] - c2[:, None]) ** 2  # (M, N)
    h = np.broadcast_to(h0, (control.M, model.N, model.N)).copy()
    idx = np.arange(model.N)
    h[:, idx, idx] += diag
    return h


def _expm_steps_pade(h_stack: np.ndarray, dts: np.ndarray) -> np.ndarray:
    return np.stack([scipy.linalg.expm(-1j * h * dt) for h, dt in zip(h_stack, dts)])


def _expm_steps_eigh(h_stack: np.ndarray, dts: np.ndarray) -> np.ndarray:
    # H real symmetric: exp(-i H dt) = V exp(-i lam dt) V^T with V orthogonal
    lam, vec = np.linalg.eigh(h_stack)
    phases = np.exp(-1j * lam * dts[:, None])
    return np.einsum("mik,mk,mjk->mij", vec, phases, vec)


def pconst_propagator(model: ChainModel, control: PConstControl, method: str = "auto") -> Propagator:
    """Step matrices for piecewise-constant propagation.

    ``pade`` uses scaling-and-squaring with a variable-order diagonal
    Pade approximant; ``eigh`` exponentiates through the spectral
    decomposition of the (real symmetric) interval Hamiltonian.  The two
    agree to machine precision; ``auto`` picks eigh for N <= 8 where it
    is considerably faster, and Pade otherwise.
    """
    dts = np.diff(control.grid)
    if np.any(dts <= 0):
        raise PropagationError("degenerate grid: nonpositive interval length")
    h_stack = _interval_hamiltonians(model, control)
    if method == "auto":
        method = "eigh" if model.N <= 8 else "pade"
    if method == "pade":
        steps = _expm_steps_pade(h_stack, dts)
    elif method == "eigh":
        steps = _expm_steps_eigh(h_stack, dts)
    else:
        raise ValueError(f"unknown matrix-exponential method {method!r}")
    return Propagator(grid=control.grid, steps=steps)


def propagate_pconst(
    model: ChainModel,
    control: PConstControl,
    psi0,
    method: str = "auto",
) -> Trajectory:
    """Exact propagation under a piecewise-constant control.

    Returns the state at every grid node via the chronological product
    psi(t_j) = U_j ... U_1 psi0; each state continues the previous one
    without a jump.
    """
    psi0 = _check_unit(psi0)
    if psi0.size != model.N:
        raise ValueError(f"initial state has length {psi0.size}, expected {model.N}")
    prop = pconst_propagator(model, control, method=method)
    states = np.empty((control.M + 1, model.N), dtype=complex)
    states[0] = psi0
    for j in range(control.M):
        states[j + 1] = prop.steps[j] @ states[j]
    return Trajectory(times=control.grid.copy(), states=states)


def _realified_rhs(model: ChainModel, control: ControlSignal, sigma: ShiftFunction):
    h0 = build_free_hamiltonian(model)
    m = np.arange(model.N, dtype=float)
    n = model.N

    def rhs(t, z):
        u1, u2 = control(t)
        d = u1 * (m - sigma(t) - u2) ** 2
        x, y = z[:n], z[n:]
        hy = h0 @ y + d * y
        hx = h0 @ x + d * x
        return np.concatenate([hy, -hx])

    return rhs


def _segment_points(control: ControlSignal, sigma: ShiftFunction, T: float) -> np.ndarray:
    """Interior discontinuity points of the right-hand side.

    Piecewise-constant controls and midpoint shifts jump at their grid
    nodes; restarting the integrator there keeps each segment smooth.
    """
    pts = [np.array([0.0, T])]
    if isinstance(control, PConstControl):
        pts.append(control.grid)
    if sigma.is_piecewise:
        pts.append(sigma.grid)
    merged = np.unique(np.concatenate(pts))
    return merged[(merged >= 0.0) & (merged <= T)]


def propagate_continuous(
    model: ChainModel,
    control: ControlSignal,
    sigma: ShiftFunction,
    tol: float = 1e-10,
    output_grid=None,
    psi0=None,
) -> Trajectory:
    """Adaptive integration of the realified system.

    The state is stacked as (Re psi_1..N, Im psi_1..N) and advanced with
    the embedded Dormand-Prince 5(4) pair at local tolerance ``tol``
    (absolute and relative).  States are reported on ``output_grid``
    (default: 1001 uniform nodes on [0, T]).
    """
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    T = model.T
    if output_grid is None:
        output_grid = np.linspace(0.0, T, 1001)
    out = np.asarray(output_grid, dtype=float)
    if out.ndim != 1 or out.size < 1 or np.any(np.diff(out) <= 0):
        raise ValueError("output grid must be strictly increasing")
    if out[0] < 0.0 or out[-1] > T * (1 + 1e-12):
        raise ValueError(f"output grid must lie within [0, {T}]")
    if psi0 is None:
        psi0 = np.zeros(model.N, dtype=complex)
        psi0[0] = 1.0
    psi0 = _check_unit(psi0)

    rhs = _realified_rhs(model, control, sigma)
    segs = _segment_points(control, sigma, T)
    z = np.concatenate([psi0.real, psi0.imag])

    out_states = np.empty((out.size, model.N), dtype=complex)
    written = np.zeros(out.size, dtype=bool)
    at_zero = np.isclose(out, 0.0, atol=1e-15)
    out_states[at_zero] = psi0
    written |= at_zero

    for a, b in zip(segs[:-1], segs[1:]):
        sel = ~written & (out > a) & (out <= b * (1 + 1e-15))
        t_eval = np.unique(np.concatenate([out[sel], [b]]))
        step_tol = _internal_tol(tol)
        sol = solve_ivp(
            rhs,
            (a, b),
            z,
            method="RK45",
            rtol=step_tol,
            atol=step_tol,
            t_eval=t_eval,
            first_step=min(b - a, T / 100.0),
        )
        if not sol.success:
            raise PropagationError(f"adaptive integration failed on [{a}, {b}]: {sol.message}")
        states = sol.y[: model.N].T + 1j * sol.y[model.N :].T
        pos = np.searchsorted(t_eval, out[sel])
        out_states[sel] = states[pos]
        written |= sel
        z = sol.y[:, -1]

    if not np.all(written):
        raise PropagationError("output nodes not covered by integration segments")
    return Trajectory(times=out, states=out_states)


def propagate_fixed_rk4(
    model: ChainModel,
    control: ControlSignal,
    sigma: ShiftFunction,
    grid,
    substeps: int = 2,
    psi0=None,
) -> Trajectory:
    """Classical RK4 with a fixed step sequence on the realified system.

    Deterministic stepping makes the evaluation error vary smoothly with
    the control, so central differences of objectives computed through
    this route are free of adaptive step-sequence noise.  Used for
    cross-checks and derivative verification, not as the production
    propagator.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least 2 nodes")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    if psi0 is None:
        psi0 = np.zeros(model.N, dtype=complex)
        psi0[0] = 1.0
    psi0 = _check_unit(psi0)
    rhs = _realified_rhs(model, control, sigma)
    z = np.concatenate([psi0.real, psi0.imag])
    states = np.empty((grid.size, model.N), dtype=complex)
    states[0] = psi0
    n = model.N
    for k in range(grid.size - 1):
        h = (grid[k + 1] - grid[k]) / substeps
        t = grid[k]
        for _ in range(substeps):
            k1 = rhs(t, z)
            k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2)
            k4 = rhs(t + h, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        states[k + 1] = z[:n] + 1j * z[n:]
    return Trajectory(times=grid.copy(), states=states)


def zero_control_state(model: ChainModel, t, psi0) -> np.ndarray:
    """Analytic zero-control solution psi(t) = exp(-i H0 t) psi0.

    Computed through the spectral decomposition of the real symmetric
    free Hamiltonian; accepts scalar t (returns one state) or an array
    of times (returns a stack of states).
    """
    psi0 = _check_unit(psi0)
    h0 = build_free_hamiltonian(model)
    lam, vec = np.linalg.eigh(h0)
    coef = vec.T @ psi0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    states = (np.exp(-1j * np.outer(t_arr, lam)) * coef) @ vec.T
    if np.ndim(t) == 0:
        return states[0]
    return states
