"""Seeded real-coded genetic search over bounded parameter boxes.

A generic bound-constrained minimiser (tournament selection, blend
crossover, clipped Gaussian mutation, elitism) plus the two wrappers
used for control search: the five-segment parameter box (terminal
transfer objective) and the sine-basis box (worst-node keeping
objective).  Everything is driven by one seeded generator, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .controls import (
    SineBasisControl,
    SpecialClassControl,
    sine_basis_bounds,
    special_class_bounds,
)
from .model import ChainModel, Envelope
from .objectives import ProblemSpec, objective_f3, objective_f4

__all__ = [
    "GAConfig",
    "SearchResult",
    "ga_minimize",
    "decode_special_class",
    "optimize_special_class",
    "optimize_sine_basis",
]


@dataclass(frozen=True)
class GAConfig:
    """Population settings; generation 1 is the random initial population,
    so the total evaluation count is population * generations (capped by
    ``eval_budget`` when set)."""

    population: int = 50
    generations: int = 200
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.12
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    tournament: int = 3
    elitism: int = 2
    seed: int = 0
    eval_budget: int | None = None

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if self.generations < 1:
            raise ValueError("need at least one generation")
        if not 0 < self.mutation_rate < 1 or not 0 < self.crossover_rate < 1:
            raise ValueError("mutation and crossover rates must lie in (0, 1)")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be nonnegative and below the population size")
        if self.tournament < 1:
            raise ValueError("tournament size must be at least 1")


@dataclass
class SearchResult:
    """Outcome of one seeded search run."""

    best_params: np.ndarray
    best_value: float
    eval_count: int
    history: list[float] = field(default_factory=list)
    mean_history: list[float] = field(default_factory=list)
    eval_history: list[int] = field(default_factory=list)


def _as_bounds(bounds) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
        raise ValueError("bounds must have shape (n, 2)")
    if not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
        raise ValueError("bounds must be finite with lo <= hi")
    return b[:, 0], b[:, 1]


def ga_minimize(
    objective: Callable[[np.ndarray], float],
    bounds,
    cfg: GAConfig,
) -> SearchResult:
    """Minimise a black-box objective over a box.

    Candidates returning a non-finite value are kept with fitness +inf,
    so they lose every tournament and never enter the elite.  The
    per-generation best is recorded in ``history``; with elitism >= 1 it
    is non-increasing.
    """
    lo, hi = _as_bounds(bounds)
    span = hi - lo
    n = lo.size
    rng = np.random.default_rng(cfg.seed)
    budget = cfg.eval_budget if cfg.eval_budget is not None else cfg.population * cfg.generations

    evals = 0

    def fitness(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        val = objective(x)
        return float(val) if np.isfinite(val) else float("inf")

    pop = lo + rng.random((cfg.population, n)) * span
    scores = np.array([fitness(ind) for ind in pop])
    result = SearchResult(best_params=pop[np.argmin(scores)].copy(), best_value=float(np.min(scores)), eval_count=evals)
    result.history.append(result.best_value)
    result.mean_history.append(float(np.mean(scores[np.isfinite(scores)])) if np.any(np.isfinite(scores)) else float("inf"))
    result.eval_history.append(evals)

    def tournament_pick() -> np.ndarray:
        idx = rng.integers(0, cfg.population, size=cfg.tournament)
        return pop[idx[np.argmin(scores[idx])]]

    for _ in range(1, cfg.generations):
        if evals + cfg.population > budget:
            break
        order = np.argsort(scores, kind="stable")
        children = [pop[i].copy() for i in order[: cfg.elitism]]
        while len(children) < cfg.population:
            p1, p2 = tournament_pick(), tournament_pick()
            if rng.random() < cfg.crossover_rate:
                lo_pair = np.minimum(p1, p2)
                hi_pair = np.maximum(p1, p2)
                d = hi_pair - lo_pair
                c1 = rng.uniform(lo_pair - cfg.blend_alpha * d, hi_pair + cfg.blend_alpha * d)
                c2 = rng.uniform(lo_pair - cfg.blend_alpha * d, hi_pair + cfg.blend_alpha * d)
            else:
                c1, c2 = p1.copy(), p2.copy()
            for c in (c1, c2):
                mask = rng.random(n) < cfg.mutation_rate
                if np.any(mask):
                    c[mask] += rng.normal(0.0, cfg.mutation_sigma, size=int(mask.sum())) * span[mask]
                children.append(np.clip(c, lo, hi))
        pop = np.array(children[: cfg.population])
        scores = np.array([fitness(ind) for ind in pop])
        gen_best = int(np.argmin(scores))
        if scores[gen_best] < result.best_value:
            result.best_value = float(scores[gen_best])
            result.best_params = pop[gen_best].copy()
        result.history.append(float(np.min(scores)))
        finite = scores[np.isfinite(scores)]
        result.mean_history.append(float(np.mean(finite)) if finite.size else float("inf"))
        result.eval_history.append(evals)

    result.eval_count = evals
    return result


def decode_special_class(
    x: np.ndarray,
    envelopes: tuple[Envelope, Envelope],
    T: float,
) -> SpecialClassControl:
    """Build the five-segment control from a raw parameter vector.

    Switch times proposed out of order are repaired by sorting them
    ascending, which keeps every box candidate feasible.
    """
    x = np.asarray(x, dtype=float).copy()
    x[6:10] = np.sort(x[6:10])
    return SpecialClassControl(x=x, envelopes=envelopes, T=T)


def optimize_special_class(
    model: ChainModel,
    spec: ProblemSpec,
    grid,
    envelopes: tuple[Envelope, Envelope],
    cfg: GAConfig,
    bounds=None,
    expm_method: str = "auto",
) -> tuple[SearchResult, SpecialClassControl]:
    """Genetic search of the five-segment box for the transfer objective.

    One objective evaluation is one forward solve, so ``eval_count``
    doubles as the Cauchy-problem counter.
    """
    if bounds is None:
        bounds = special_class_bounds(model.T, envelopes)
    grid = np.asarray(grid, dtype=float)

    def objective(x: np.ndarray) -> float:
        ctrl = decode_special_class(x, envelopes, model.T)
        return objective_f3(ctrl, model, spec, grid, expm_method=expm_method)

    result = ga_minimize(objective, bounds, cfg)
    best = decode_special_class(result.best_params, envelopes, model.T)
    return result, best


def optimize_sine_basis(
    model: ChainModel,
    spec: ProblemSpec,
    grid,
    envelopes: tuple[Envelope, Envelope],
    cfg: GAConfig,
    M_sin: int = 3,
    bounds=None,
    expm_method: str = "auto",
) -> tuple[SearchResult, SineBasisControl]:
    """Genetic search of the sine-basis box for the keeping objective."""
    if bounds is None:
        bounds = sine_basis_bounds(M_sin, envelopes)
    grid = np.asarray(grid, dtype=float)

    def objective(y: np.ndarray) -> float:
        ctrl = SineBasisControl(y=y, M_sin=M_sin, envelopes=envelopes, T=model.T)
        return objective_f4(ctrl, model, spec, grid, expm_method=expm_method)

    result = ga_minimize(objective, bounds, cfg)
    best = SineBasisControl(y=result.best_params, M_sin=M_sin, envelopes=envelopes, T=model.T)
    return result, best
