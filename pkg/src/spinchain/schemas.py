"""Pydantic models for run configuration and the service wire format.

The run configuration is one strict document with nested sections
(model / problem / control / solver / optimizer / output); unknown keys
are rejected everywhere so a typo in a physics parameter fails loudly
instead of being silently ignored.  The same ``ControlSection`` shape is
used to serialize optimized controls back out.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import controls as ctl
from .ga import GAConfig
from .gpm import GPMConfig
from .model import ChainModel, Envelope
from .objectives import ProblemSpec, keeping_problem, transfer_problem

__all__ = [
    "ModelSection",
    "ProblemSection",
    "ControlSection",
    "SolverSection",
    "OptimizerSection",
    "OutputSection",
    "RunConfig",
    "control_to_section",
    "SimulateResponse",
    "OptimizeResponse",
    "VerifyRequest",
    "VerifyResponse",
    "OracleCheckModel",
    "RestartSummary",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    N: int = Field(ge=2)
    T: float = Field(gt=0)
    J: float = 1.0
    bbar: tuple[float, float] = (5.0, 3.0)
    q: tuple[int, int] = (8, 8)

    def chain(self) -> ChainModel:
        return ChainModel(N=self.N, T=self.T, J=self.J)

    def envelopes(self) -> tuple[Envelope, Envelope]:
        return (
            Envelope(bbar=self.bbar[0], T=self.T, q=self.q[0]),
            Envelope(bbar=self.bbar[1], T=self.T, q=self.q[1]),
        )


class ProblemSection(_Strict):
    kind: Literal["transfer", "keeping"] = "transfer"
    P_psi: float = Field(default=1.0, ge=0)
    P_u: tuple[float, float] = (0.0, 0.0)
    P_x: float = Field(default=0.0, ge=0)
    P_y: float = Field(default=0.0, ge=0)
    C_S: tuple[float, float] = (20.0, 20.0)

    def spec(self, model: ChainModel) -> ProblemSpec:
        if self.kind == "transfer":
            return transfer_problem(model, P_u=self.P_u, P_x=self.P_x, C_S=self.C_S)
        return keeping_problem(model, P_psi=self.P_psi, P_u=self.P_u, P_y=self.P_y, C_S=self.C_S)


class GridSpec(_Strict):
    """Uniform grid with M intervals, or explicit nodes."""

    M: Optional[int] = Field(default=None, ge=1)
    nodes: Optional[list[float]] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.M is None) == (self.nodes is None):
            raise ValueError("grid spec needs exactly one of 'M' or 'nodes'")
        return self

    def build(self, T: float) -> np.ndarray:
        if self.M is not None:
            return ctl.uniform_grid(T, self.M)
        return np.asarray(self.nodes, dtype=float)


class CoefficientArrays(_Strict):
    a: Optional[list[float]] = None
    values: Optional[list[list[float]]] = None
    x: Optional[list[float]] = None
    y: Optional[list[float]] = None
    M_sin: Optional[int] = Field(default=None, ge=1)


class ControlSection(_Strict):
    """Serialized control: class, grid spec, coefficient arrays, bounds."""

    control_class: Literal["zero", "pconst", "plinear", "special", "sine"] = Field(alias="class")
    grid: Optional[GridSpec] = None
    coefficients: Optional[CoefficientArrays] = None
    bounds: Optional[list[tuple[float, float]]] = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def build(self, model: ChainModel, envelopes: tuple[Envelope, Envelope]) -> ctl.ControlSignal:
        kind = self.control_class
        coeff = self.coefficients
        if kind == "zero":
            return ctl.ZeroControl(model.T)
        if kind == "pconst":
            if self.grid is None or coeff is None or coeff.a is None:
                raise ValueError("pconst control needs a grid spec and coefficients.a")
            return ctl.PConstControl(grid=self.grid.build(model.T), a=np.asarray(coeff.a, dtype=float))
        if kind == "plinear":
            if self.grid is None or coeff is None or coeff.values is None:
                raise ValueError("plinear control needs a grid spec and coefficients.values")
            return ctl.PLinearControl(
                grid=self.grid.build(model.T), values=np.asarray(coeff.values, dtype=float)
            )
        if kind == "special":
            if coeff is None or coeff.x is None:
                raise ValueError("special control needs coefficients.x (length 10)")
            return ctl.SpecialClassControl(
                x=np.asarray(coeff.x, dtype=float), envelopes=envelopes, T=model.T
            )
        if coeff is None or coeff.y is None or coeff.M_sin is None:
            raise ValueError("sine control needs coefficients.y and coefficients.M_sin")
        return ctl.SineBasisControl(
            y=np.asarray(coeff.y, dtype=float), M_sin=coeff.M_sin, envelopes=envelopes, T=model.T
        )


def control_to_section(control: ctl.ControlSignal, bounds=None) -> ControlSection:
    """Serialize a control back into the document shape."""
    b = [(float(lo), float(hi)) for lo, hi in np.asarray(bounds)] if bounds is not None else None
    if isinstance(control, ctl.ZeroControl):
        return ControlSection(control_class="zero", bounds=b)
    if isinstance(control, ctl.PConstControl):
        return ControlSection(
            control_class="pconst",
            grid=GridSpec(nodes=[float(t) for t in control.grid]),
            coefficients=CoefficientArrays(a=[float(v) for v in control.a]),
            bounds=b,
        )
    if isinstance(control, ctl.PLinearControl):
        return ControlSection(
            control_class="plinear",
            grid=GridSpec(nodes=[float(t) for t in control.grid]),
            coefficients=CoefficientArrays(values=[[float(v) for v in row] for row in control.values]),
            bounds=b,
        )
    if isinstance(control, ctl.SpecialClassControl):
        return ControlSection(
            control_class="special",
            coefficients=CoefficientArrays(x=[float(v) for v in control.x]),
            bounds=b,
        )
    if isinstance(control, ctl.SineBasisControl):
        return ControlSection(
            control_class="sine",
            coefficients=CoefficientArrays(y=[float(v) for v in control.y], M_sin=control.M_sin),
            bounds=b,
        )
    raise TypeError(f"cannot serialize control of type {type(control).__name__}")


class SolverSection(_Strict):
    method: Literal["auto", "expm", "rk"] = "auto"
    tol: float = Field(default=1e-10, gt=0)
    output_nodes: int = Field(default=1001, ge=2)
    expm_backend: Literal["auto", "pade", "eigh"] = "auto"
    pconst_M: int = Field(default=1000, ge=1)


class OptimizerSection(_Strict):
    kind: Literal["gpm", "ga"]
    # projected-gradient settings
    variant: Literal["1s", "2s", "3s"] = "1s"
    alpha0: float = Field(default=1.0, gt=0)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    beta: float = Field(default=0.0, ge=0, lt=1)
    gamma: float = Field(default=0.0, ge=0, lt=1)
    max_iters: int = Field(default=50, ge=1)
    tol_obj: float = Field(default=1e-10, gt=0)
    tol_res: float = Field(default=1e-8, gt=0)
    grid_nodes: int = Field(default=1001, ge=2)
    # genetic-search settings
    population: int = Field(default=50, ge=4)
    generations: int = Field(default=200, ge=1)
    mutation_rate: float = Field(default=0.2, gt=0, lt=1)
    crossover_rate: float = Field(default=0.9, gt=0, lt=1)
    elitism: int = Field(default=2, ge=0)
    seed: int = Field(default=0, ge=0)
    eval_budget: Optional[int] = Field(default=None, ge=1)
    M_sin: int = Field(default=3, ge=1)
    bounds: Optional[list[tuple[float, float]]] = None

    def gpm_config(self, solver: SolverSection) -> GPMConfig:
        return GPMConfig(
            variant=self.variant,
            alpha0=self.alpha0,
            backtrack=self.backtrack,
            beta=self.beta,
            gamma=self.gamma,
            max_iters=self.max_iters,
            tol_obj=self.tol_obj,
            tol_res=self.tol_res,
            grid_nodes=self.grid_nodes,
            solver_tol=solver.tol,
        )

    def ga_config(self, seed_override: Optional[int] = None) -> GAConfig:
        return GAConfig(
            population=self.population,
            generations=self.generations,
            mutation_rate=self.mutation_rate,
            crossover_rate=self.crossover_rate,
            elitism=self.elitism,
            seed=self.seed if seed_override is None else seed_override,
            eval_budget=self.eval_budget,
        )


class OutputSection(_Strict):
    trajectory: bool = True
    infidelity: bool = True
    history: bool = True
    control: bool = True
    directory: Optional[str] = None


class RunConfig(_Strict):
    model: ModelSection
    problem: ProblemSection = ProblemSection()
    control: ControlSection = ControlSection(control_class="zero")
    solver: SolverSection = SolverSection()
    optimizer: Optional[OptimizerSection] = None
    output: OutputSection = OutputSection()


# ---------------------------------------------------------------------------
# service responses


class SimulateResponse(_Strict):
    final_infidelity: float
    final_norm: float
    objective: float
    objective_with_penalty: float
    files: dict[str, str]


class RestartSummary(_Strict):
    restart: int
    seed: int
    best_objective: float
    forward_solves: int
    status: str


class OptimizeResponse(_Strict):
    best_objective: float
    forward_solves: int
    status: str
    restarts: list[RestartSummary]
    warnings: list[str]
    files: dict[str, str]


class VerifyRequest(_Strict):
    h0_sign_flip: bool = False


class OracleCheckModel(_Strict):
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str


class VerifyResponse(_Strict):
    passed: bool
    checks: list[OracleCheckModel]
