"""Chain geometry, Hamiltonians, control envelopes and penalty weights.

The physical setting is an N-site spin-1/2 chain restricted to the
single-excitation sector, so states live in C^N rather than C^(2^N).
The free Hamiltonian couples nearest neighbours; the controlling
Hamiltonian is the diagonal of a parabolic field whose centre sweeps
across the chain following a prescribed shift function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChainModel",
    "Envelope",
    "WeightFunction",
    "ShiftFunction",
    "build_free_hamiltonian",
    "control_hamiltonian_diag",
    "envelope_value",
    "weight_value",
    "sinc",
]


def sinc(x):
    """Unnormalized sinc kernel sin(x)/x with sinc(0) = 1.

    A short Taylor branch guards the removable singularity; the switch
    point 1e-4 keeps the truncation error below 1e-28.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0 + x**4 / 120.0, np.sin(safe) / safe)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ChainModel:
    """Spin chain with N sites, coupling J and control horizon T.

    The sweep rate of the parabola centre is tied to the geometry:
    w = (N - 1) / T, so the linear shift travels exactly across the
    chain during [0, T].
    """

    N: int
    T: float
    J: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"chain needs at least 2 sites, got N={self.N}")
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got T={self.T}")

    @property
    def w(self) -> float:
        """Shift rate (N - 1) / T."""
        return (self.N - 1) / self.T


@dataclass(frozen=True)
class Envelope:
    """Time-dependent control bound b(t) = bbar * sinc(2^q pi (t/T - 1/2)^q).

    For even q the argument equals pi exactly at t = 0 and t = T, so the
    bound vanishes at both ends (smooth switch-on/off), peaks at bbar at
    t = T/2, and stays nonnegative for the default q = 8.
    """

    bbar: float
    T: float
    q: int = 8

    def __post_init__(self):
        if not self.bbar > 0:
            raise ValueError(f"envelope amplitude must be positive, got {self.bbar}")
        if self.q < 2 or self.q % 2 != 0:
            raise ValueError(f"envelope exponent must be an even integer >= 2, got {self.q}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = (2.0**self.q) * np.pi * (t / self.T - 0.5) ** self.q
        val = self.bbar * sinc(x)
        if np.ndim(t) == 0:
            return float(val)
        return val


@dataclass(frozen=True)
class WeightFunction:
    """Penalty weight S(t) = exp(C (t/T - 1/2)^2).

    Equal to 1 at mid-horizon and growing towards both ends, it
    penalises control energy spent near t = 0 and t = T.  C is only
    constrained to be "large enough"; 20 is the working default.
    """

    T: float
    C: float = 20.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"weight sharpness must be positive, got {self.C}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        val = np.exp(self.C * (t / self.T - 0.5) ** 2)
        if np.ndim(t) == 0:
            return float(val)
        return val


@dataclass(frozen=True)
class ShiftFunction:
    """Prescribed sweep sigma(t) of the parabola centre.

    Two variants: the linear sweep sigma(t) = w t, and the
    piecewise-constant variant that holds, on each grid interval, the
    value w * (interval midpoint).  The latter is what the exact
    matrix-exponential propagation uses.
    """

    w: float
    grid: np.ndarray | None = field(default=None)

    @classmethod
    def linear(cls, model: ChainModel) -> "ShiftFunction":
        return cls(w=model.w)

    @classmethod
    def piecewise_midpoint(cls, model: ChainModel, grid) -> "ShiftFunction":
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least 2 nodes")
        return cls(w=model.w, grid=grid)

    @property
    def is_piecewise(self) -> bool:
        return self.grid is not None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.grid is None:
            val = self.w * t
        else:
            # value on [t_j, t_{j+1}) is w * (t_j + t_{j+1}) / 2; t = T falls
            # into the last interval
            j = np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, self.grid.size - 2)
            val = self.w * 0.5 * (self.grid[j] + self.grid[j + 1])
        if np.ndim(t) == 0:
            return float(val)
        return val


def build_free_hamiltonian(model: ChainModel) -> np.ndarray:
    """Tridiagonal nearest-neighbour Hamiltonian of the chain.

    Diagonal (-1, -2, ..., -2, -1) * J, off-diagonals J.  Real symmetric;
    for J = 1 every row sums to zero.
    """
    n, j = model.N, model.J
    h = np.zeros((n, n))
    np.fill_diagonal(h, -2.0 * j)
    h[0, 0] = -j
    h[-1, -1] = -j
    idx = np.arange(n - 1)
    h[idx, idx + 1] = j
    h[idx + 1, idx] = j
    return h


def control_hamiltonian_diag(t, u, model: ChainModel, sigma: ShiftFunction) -> np.ndarray:
    """Diagonal of the parabolic-field Hamiltonian at time t.

    Component m (1-based) is u1 * (m - 1 - sigma(t) - u2)^2; the full
    controlling Hamiltonian is diag of this vector.
    """
    u1, u2 = u
    m = np.arange(model.N, dtype=float)  # m - 1 for m = 1..N
    return u1 * (m - sigma(t) - u2) ** 2


def envelope_value(t, env: Envelope) -> float:
    """Functional form of the bound; see Envelope."""
    return env(t)


def weight_value(t, wf: WeightFunction) -> float:
    """Functional form of the penalty weight; see WeightFunction."""
    return wf(t)
