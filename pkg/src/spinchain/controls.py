"""Control classes, box projection and piecewise-constant discretization.

Every control is a pair u(t) = (u1(t), u2(t)) subject to the pointwise
box |u_l(t)| <= b_l(t) given by the envelopes.  Supported classes:

* ``ZeroControl``         -- u = 0,
* ``PConstControl``       -- piecewise constant on a grid, left-closed
  intervals [t_j, t_{j+1}),
* ``PLinearControl``      -- piecewise linear between grid nodes,
* ``SpecialClassControl`` -- the five-segment continuous pulses
  parameterized by x = (thetaL1, thetaR1, thetaL2, thetaR2, y1, y2,
  that1..that4),
* ``SineBasisControl``    -- projected sums of sine harmonics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .model import Envelope

__all__ = [
    "ZeroControl",
    "PConstControl",
    "PLinearControl",
    "SpecialClassControl",
    "SineBasisControl",
    "ControlSignal",
    "evaluate",
    "project_to_box",
    "discretize_pconst",
    "pconst_bounds",
    "decode_index",
    "uniform_grid",
    "special_class_bounds",
    "sine_basis_bounds",
]


def uniform_grid(T: float, M: int) -> np.ndarray:
    """Uniform time grid with M intervals: t_0 = 0, ..., t_M = T."""
    if M < 1:
        raise ValueError(f"grid needs at least one interval, got M={M}")
    return np.linspace(0.0, T, M + 1)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("time grid must be 1-D with at least two nodes")
    if grid[0] != 0.0:
        raise ValueError(f"time grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def _check_times(t, T: float):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > T * (1 + 1e-12)):
        raise ValueError(f"time outside [0, {T}]")
    return np.clip(t, 0.0, T)


@dataclass(frozen=True)
class ZeroControl:
    """u(t) = (0, 0)."""

    T: float

    def __call__(self, t):
        t = _check_times(t, self.T)
        if np.ndim(t) == 0:
            return np.zeros(2)
        return np.zeros((t.size, 2))


@dataclass(frozen=True)
class PConstControl:
    """Piecewise-constant control: value c_{l,j} on [t_{j-1}, t_j).

    ``a`` is the flat coefficient vector of length 2M laid out as
    (c_{1,1}, ..., c_{1,M}, c_{2,1}, ..., c_{2,M}).
    """

    grid: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _check_grid(self.grid))
        a = np.asarray(self.a, dtype=float)
        if a.shape != (2 * self.M,):
            raise ValueError(f"coefficient vector must have length 2M={2 * self.M}, got {a.shape}")
        object.__setattr__(self, "a", a)

    @property
    def M(self) -> int:
        return self.grid.size - 1

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def c(self) -> np.ndarray:
        """Coefficients reshaped to (2, M): c[l-1, j-1] = c_{l,j}."""
        return self.a.reshape(2, self.M)

    def interval_index(self, t) -> np.ndarray:
        """0-based interval index; t = T falls into the last interval."""
        return np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, self.M - 1)

    def __call__(self, t):
        t = _check_times(t, self.T)
        j = self.interval_index(t)
        vals = self.c[:, j].T
        if np.ndim(t) == 0:
            return vals
        return vals


@dataclass(frozen=True)
class PLinearControl:
    """Piecewise-linear control interpolating node values (M+1, 2)."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _check_grid(self.grid))
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size, 2):
            raise ValueError(f"node values must have shape ({self.grid.size}, 2), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def __call__(self, t):
        t = _check_times(t, self.T)
        u1 = np.interp(t, self.grid, self.values[:, 0])
        u2 = np.interp(t, self.grid, self.values[:, 1])
        if np.ndim(t) == 0:
            return np.array([u1, u2])
        return np.stack([u1, u2], axis=-1)


@dataclass(frozen=True)
class SpecialClassControl:
    """Five-segment continuous pulses riding the envelopes.

    On [0, that1) the control follows thetaL * b(t); parabolic blends on
    [that1, that2) and [that3, that4) connect to the flat level y held on
    [that2, that3); on [that4, T] it follows thetaR * b(t).  The blends
    share endpoint values with their neighbours, so the signal is
    continuous on [0, T] by construction.

    x = (thetaL1, thetaR1, thetaL2, thetaR2, y1, y2, that1, ..., that4)
    with 0 < that1 < that2 < that3 < that4 < T.
    """

    x: np.ndarray
    envelopes: tuple[Envelope, Envelope]
    T: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (10,):
            raise ValueError(f"parameter vector must have length 10, got {x.shape}")
        th = x[6:10]
        if not (0.0 < th[0] < th[1] < th[2] < th[3] < self.T):
            raise ValueError(f"switch times must satisfy 0 < t1 < t2 < t3 < t4 < T, got {th}")
        object.__setattr__(self, "x", x)

    @property
    def switch_times(self) -> np.ndarray:
        return self.x[6:10]

    def _channel(self, t, l: int) -> np.ndarray:
        thL = self.x[2 * l]
        thR = self.x[2 * l + 1]
        y = self.x[4 + l]
        t1, t2, t3, t4 = self.x[6:10]
        b = self.envelopes[l]
        bt = np.asarray(b(t), dtype=float)
        b1 = b(t1)
        b4 = b(t4)
        left_blend = (y - thL * b1) / (t2 - t1) ** 2 * (t - t1) ** 2 + thL * b1
        right_blend = (y - thR * b4) / (t4 - t3) ** 2 * (t - t4) ** 2 + thR * b4
        return np.select(
            [t < t1, t < t2, t < t3, t < t4],
            [thL * bt, left_blend, np.full_like(bt, y), right_blend],
            default=thR * bt,
        )

    def __call__(self, t):
        t = _check_times(t, self.T)
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(t)
        out = np.stack([self._channel(t, 0), self._channel(t, 1)], axis=-1)
        return out[0] if scalar else out


@dataclass(frozen=True)
class SineBasisControl:
    """Projected sine sums: u_l(t) = Pr [ sum_i g_{l,i} sin(ceil(w_{l,i}) pi t / T) ].

    ``y`` is laid out channel-block-wise as (g_{1,1}, w_{1,1}, ...,
    g_{1,M}, w_{1,M}, g_{2,1}, w_{2,1}, ..., g_{2,M}, w_{2,M}).  Each
    harmonic count is the ceiling of the real frequency coordinate, so
    the raw sum vanishes at t = 0 and t = T; the pointwise box
    projection onto [-b_l(t), b_l(t)] is applied on top.
    """

    y: np.ndarray
    M_sin: int
    envelopes: tuple[Envelope, Envelope]
    T: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if self.M_sin < 1:
            raise ValueError(f"need at least one harmonic, got M_sin={self.M_sin}")
        if y.shape != (4 * self.M_sin,):
            raise ValueError(f"coefficient vector must have length {4 * self.M_sin}, got {y.shape}")
        object.__setattr__(self, "y", y)

    def raw(self, t) -> np.ndarray:
        """Unprojected sine sum, shape (..., 2)."""
        t = np.asarray(t, dtype=float)
        blocks = self.y.reshape(2, self.M_sin, 2)
        gamma = blocks[:, :, 0]
        freq = np.ceil(blocks[:, :, 1])
        phase = np.multiply.outer(np.pi * np.asarray(t) / self.T, freq)  # (..., 2, M_sin)
        return np.sum(gamma * np.sin(phase), axis=-1)

    def __call__(self, t):
        t = _check_times(t, self.T)
        raw = self.raw(t)
        b = np.stack([np.asarray(env(t), dtype=float) for env in self.envelopes], axis=-1)
        return np.clip(raw, -b, b)


ControlSignal = Union[ZeroControl, PConstControl, PLinearControl, SpecialClassControl, SineBasisControl]


def evaluate(control: ControlSignal, t):
    """Value (u1(t), u2(t)) of any control class; vectorized over t."""
    return control(t)


def project_to_box(v, t, envelopes: tuple[Envelope, Envelope]):
    """Orthogonal projection of v onto [-b_1(t), b_1(t)] x [-b_2(t), b_2(t)].

    Componentwise clamp; the rectangle is axis-aligned so the clamp is
    the exact Euclidean projection.
    """
    v = np.asarray(v, dtype=float)
    b = np.stack([np.asarray(env(t), dtype=float) for env in envelopes], axis=-1)
    return np.clip(v, -b, b)


def pconst_bounds(grid, envelopes: tuple[Envelope, Envelope], rule: str = "midpoint") -> np.ndarray:
    """Shelf bounds nu_{l,j} for piecewise-constant coefficients, shape (2, M).

    ``midpoint`` evaluates the envelope at each interval's own midpoint
    (adequate when the grid step is small); ``interval-min`` takes the
    smaller endpoint value so the shelves never exceed the envelope on
    the interval (the envelopes are unimodal).
    """
    grid = _check_grid(grid)
    left, right = grid[:-1], grid[1:]
    if rule == "midpoint":
        pts = 0.5 * (left + right)
        return np.stack([np.asarray(env(pts), dtype=float) for env in envelopes])
    if rule == "interval-min":
        vals = []
        for env in envelopes:
            vl = np.asarray(env(left), dtype=float)
            vr = np.asarray(env(right), dtype=float)
            mid = np.asarray(env(0.5 * (left + right)), dtype=float)
            vals.append(np.minimum(np.minimum(vl, vr), mid))
        return np.stack(vals)
    raise ValueError(f"unknown bounds rule {rule!r}")


def discretize_pconst(
    control: ControlSignal,
    grid,
    envelopes: tuple[Envelope, Envelope] | None = None,
    rule: str = "midpoint",
) -> PConstControl:
    """Sample a control at the left endpoints of the grid intervals.

    The value held on [t_j, t_{j+1}) is u(t_j).  When envelopes are
    given, samples are clamped into the shelf bounds nu_{l,j} so the
    result is admissible for the discrete constraint set.
    """
    grid = _check_grid(grid)
    left = grid[:-1]
    samples = np.asarray(control(left), dtype=float).T  # (2, M)
    if envelopes is not None:
        nu = pconst_bounds(grid, envelopes, rule)
        samples = np.clip(samples, -nu, nu)
    return PConstControl(grid=grid, a=samples.reshape(-1))


def decode_index(s: int, M: int) -> tuple[int, int]:
    """Map a flat coefficient index s in [1, 2M] to (channel l, range r).

    r = s mod M with the wraparound r = M when s mod M = 0;
    l = floor(s / M) + 1, except l = floor(s / M) when s mod M = 0.
    Bijective onto {1, 2} x {1, ..., M}.
    """
    if not 1 <= s <= 2 * M:
        raise ValueError(f"flat index must lie in [1, {2 * M}], got {s}")
    rem = s % M
    if rem == 0:
        return s // M, M
    return s // M + 1, rem


def special_class_bounds(T: float, envelopes: tuple[Envelope, Envelope]) -> np.ndarray:
    """Default parameter box Q_x for the five-segment class, shape (10, 2).

    Shape levels theta in [-1, 1], plateau levels y_l within 10% of the
    envelope amplitude, and switch times confined to disjoint windows
    near the ends of the horizon.
    """
    b1, b2 = envelopes
    return np.array(
        [
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 1.0],
            [-0.1 * b1.bbar, 0.1 * b1.bbar],
            [-0.1 * b2.bbar, 0.1 * b2.bbar],
            [0.07 * T, 0.13 * T],
            [0.17 * T, 0.23 * T],
            [0.77 * T, 0.83 * T],
            [0.87 * T, 0.93 * T],
        ]
    )


def sine_basis_bounds(
    M_sin: int,
    envelopes: tuple[Envelope, Envelope],
    max_harmonic: int = 10,
) -> np.ndarray:
    """Default parameter box Q_y for the sine class, shape (4*M_sin, 2).

    Amplitudes are bounded by the envelope amplitude of their channel;
    frequency coordinates range over (0, max_harmonic] so their ceilings
    cover harmonics 1..max_harmonic.
    """
    rows = []
    for env in envelopes:
        for _ in range(M_sin):
            rows.append([-env.bbar, env.bbar])
            rows.append([1e-9, float(max_harmonic)])
    return np.array(rows)
