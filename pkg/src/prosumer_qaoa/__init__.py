"""Prosumer load scheduling as QUBO/Ising problems, solved exactly and with a
QAOA statevector simulator."""

__version__ = "0.1.0"

from .exact_solver import brute_force_minimum, enumerate_feasible, verify_reduction
from .problem_model import (
    Load,
    ProsumerInstance,
    ScheduleAssignment,
    cost_of_schedule,
    fixture_a,
    is_feasible,
    load_instance,
)
from .qaoa_sim import QaoaConfig, QaoaResult, qaoa_expectation, solve_qaoa
from .reduction import (
    BinaryLinearProgram,
    IsingModel,
    QuboModel,
    build_ilp,
    ising_energy,
    ising_from_qubo,
    penalty_coefficient,
    qubo_from_ilp,
    qubo_value,
    reduce_instance,
    slack_encoding,
)

__all__ = [
    "BinaryLinearProgram",
    "IsingModel",
    "Load",
    "ProsumerInstance",
    "QaoaConfig",
    "QaoaResult",
    "QuboModel",
    "ScheduleAssignment",
    "brute_force_minimum",
    "build_ilp",
    "cost_of_schedule",
    "enumerate_feasible",
    "fixture_a",
    "is_feasible",
    "ising_energy",
    "ising_from_qubo",
    "load_instance",
    "penalty_coefficient",
    "qaoa_expectation",
    "qubo_from_ilp",
    "qubo_value",
    "reduce_instance",
    "slack_encoding",
    "solve_qaoa",
    "verify_reduction",
]
