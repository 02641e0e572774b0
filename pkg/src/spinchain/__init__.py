"""Optimal-control toolkit for spin-1/2 chains in a controlled parabolic field.

Core library layers: ``model`` (chain and field definitions),
``controls`` (control classes and box projection), ``dynamics``
(exact and adaptive propagation), ``objectives`` (infidelity
functionals), ``adjoint`` (costates, gradients, stationarity residual),
``gpm`` (projected-gradient iterations), ``ga`` (seeded genetic
search) and ``verify`` (analytic oracle suite).  A FastAPI service
(``spinchain.service``) exposes simulate / optimize / verify over HTTP,
and the ``spinchain`` CLI is a thin client of that service.
"""

__version__ = "0.1.0"

from .adjoint import GradientSignal, gradient, pmp_residual, solve_adjoint, transversality
from .controls import (
    ControlSignal,
    PConstControl,
    PLinearControl,
    SineBasisControl,
    SpecialClassControl,
    ZeroControl,
    decode_index,
    discretize_pconst,
    evaluate,
    pconst_bounds,
    project_to_box,
    sine_basis_bounds,
    special_class_bounds,
    uniform_grid,
)
from .dynamics import (
    PropagationError,
    Propagator,
    Trajectory,
    pconst_propagator,
    propagate_continuous,
    propagate_fixed_rk4,
    propagate_pconst,
    zero_control_state,
)
from .ga import GAConfig, SearchResult, ga_minimize, optimize_sine_basis, optimize_special_class
from .gpm import GPMConfig, OptimizerRun, gpm_step, run_gpm
from .model import (
    ChainModel,
    Envelope,
    ShiftFunction,
    WeightFunction,
    build_free_hamiltonian,
    control_hamiltonian_diag,
    envelope_value,
    weight_value,
)
from .objectives import (
    ProblemSpec,
    infidelity,
    keeping_problem,
    objective_I,
    objective_Phi,
    objective_f3,
    objective_f4,
    transfer_problem,
)
from .verify import OracleCheck, run_oracle_suite
