"""QAOA statevector simulator for diagonal (Ising) cost Hamiltonians.

Basis index ``k`` stores bits little-endian: variable ``i`` (1-based) is bit
``i - 1`` of ``k``. A qubit in ``|0>`` has Z eigenvalue +1, matching the spin
convention of :mod:`prosumer_qaoa.reduction`.
"""

from __future__ import annotations

import os
from functools import reduce
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize

from .problem_model import ProsumerInstance, cost_of_schedule, is_feasible
from .reduction import (
    IsingModel,
    bits_of_index,
    bitstring,
    decode_bits,
    ising_energies,
    reduce_instance,
)

DEFAULT_MAX_QUBITS = 24
MAX_QUBITS_ENV = "PROSUMER_QAOA_MAX_QUBITS"

_CHUNK = 1 << 16
_MIXER_BLOCK = 4
# above this the energy vector is recomputed per layer instead of cached
AUTO_MATERIALIZE_MAX = 20


class QubitCapError(MemoryError):
    """The requested register would exceed the statevector qubit cap."""

    def __init__(self, n: int, cap: int):
        super().__init__(
            f"{n} qubits exceed the statevector cap of {cap} qubits "
            f"(2^{n} amplitudes); raise the cap with --max-qubits or ${MAX_QUBITS_ENV}"
        )
        self.n = n
        self.cap = cap


def default_max_qubits() -> int:
    value = os.environ.get(MAX_QUBITS_ENV)
    return int(value) if value else DEFAULT_MAX_QUBITS


def check_cap(n: int, cap: int | None = None) -> None:
    cap = default_max_qubits() if cap is None else cap
    if n > cap:
        raise QubitCapError(n, cap)


class DiagonalHamiltonian:
    """Diagonal of an Ising Hamiltonian over the computational basis.

    Energies are computed on demand in index chunks; call :meth:`materialize`
    to keep the full ``2^n`` vector around when repeated layers make that
    worthwhile.
    """

    def __init__(self, ising: IsingModel, materialize: bool = False, cap: int | None = None):
        check_cap(ising.num_spins, cap)
        self.ising = ising
        self.num_qubits = ising.num_spins
        self.dim = 1 << self.num_qubits
        self._values: np.ndarray | None = None
        if materialize:
            self.materialize()

    @classmethod
    def from_values(cls, values: Sequence[float]) -> DiagonalHamiltonian:
        """Wrap an explicit energy vector (length must be a power of two)."""
        values = np.asarray(values, dtype=float)
        n = int(values.size).bit_length() - 1
        if values.size != 1 << n or n < 1:
            raise ValueError("energy vector length must be 2^n with n >= 1")
        self = cls.__new__(cls)
        self.ising = None
        self.num_qubits = n
        self.dim = values.size
        self._values = values
        return self

    def energy(self, k: int) -> float:
        if self._values is not None:
            return float(self._values[k])
        return float(ising_energies(self.ising, np.array([k]))[0])

    def chunks(self):
        """Yield ``(start, energies)`` blocks covering all basis indices."""
        if self._values is not None:
            yield 0, self._values
            return
        for start in range(0, self.dim, _CHUNK):
            stop = min(start + _CHUNK, self.dim)
            yield start, ising_energies(self.ising, np.arange(start, stop))

    def materialize(self) -> np.ndarray:
        if self._values is None:
            self._values = np.concatenate([e for _, e in self.chunks()])
        return self._values

    def values(self) -> np.ndarray:
        """Full energy vector (materialized on first call)."""
        return self.materialize()

    def mean(self) -> float:
        return float(sum(e.sum() for _, e in self.chunks()) / self.dim)


def initial_state(n: int, cap: int | None = None) -> np.ndarray:
    """Uniform superposition ``|+>^n``."""
    if n < 1:
        raise ValueError("need at least one qubit")
    check_cap(n, cap)
    dim = 1 << n
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)


def apply_phase_separator(state: np.ndarray, diag: DiagonalHamiltonian, gamma: float) -> np.ndarray:
    """``amp_k <- amp_k * exp(-i gamma E_k)``, in place."""
    if state.shape != (diag.dim,):
        raise ValueError(f"state has {state.size} amplitudes, Hamiltonian has {diag.dim}")
    for start, energies in diag.chunks():
        state[start:start + energies.size] *= np.exp(-1j * gamma * energies)
    return state


def apply_mixer(state: np.ndarray, beta: float) -> np.ndarray:
    """Apply ``prod_i exp(-i beta X_i)`` in place.

    Each qubit maps an amplitude pair ``(a, b)`` differing only in that bit to
    ``(cos(beta) a - i sin(beta) b, -i sin(beta) a + cos(beta) b)``. Qubits are
    processed in blocks of up to ``_MIXER_BLOCK`` with the Kronecker power of
    the single-qubit rotation, which is the same map with fewer passes.
    """
    n = state.size.bit_length() - 1
    c, s = np.cos(beta), -1j * np.sin(beta)
    rx = np.array([[c, s], [s, c]], dtype=np.complex128)
    q = 0
    while q < n:
        k = min(_MIXER_BLOCK, n - q)
        U = reduce(np.kron, [rx] * k)
        view = state.reshape(-1, 1 << k, 1 << q)
        view[...] = np.matmul(U, view)
        q += k
    return state


def expectation(state: np.ndarray, diag: DiagonalHamiltonian) -> float:
    probs = np.abs(state) ** 2
    return float(sum(probs[st:st + e.size] @ e for st, e in diag.chunks()))


def qaoa_state(
    diag: DiagonalHamiltonian, gammas: Sequence[float], betas: Sequence[float]
) -> np.ndarray:
    if len(gammas) != len(betas) or len(gammas) < 1:
        raise ValueError("gammas and betas must have the same length p >= 1")
    state = initial_state(diag.num_qubits, cap=diag.num_qubits)
    for gamma, beta in zip(gammas, betas):
        apply_phase_separator(state, diag, gamma)
        apply_mixer(state, beta)
    return state


def qaoa_expectation(
    ising: IsingModel | DiagonalHamiltonian,
    gammas: Sequence[float],
    betas: Sequence[float],
    cap: int | None = None,
) -> float:
    diag = ising if isinstance(ising, DiagonalHamiltonian) else DiagonalHamiltonian(ising, cap=cap)
    return expectation(qaoa_state(diag, gammas, betas), diag)


@dataclass(frozen=True)
class QaoaConfig:
    reps: int = 1
    shots: int = 1024
    max_evals: int = 400
    restarts: int = 10
    seed: int = 0
    max_qubits: int = field(default_factory=default_max_qubits)
    materialize: bool | None = None  # None: cache energies when n <= AUTO_MATERIALIZE_MAX

    def __post_init__(self) -> None:
        for name in ("reps", "shots", "max_evals", "restarts", "max_qubits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    def wants_materialized(self, n: int) -> bool:
        if self.materialize is None:
            return n <= AUTO_MATERIALIZE_MAX
        return self.materialize

    def to_dict(self) -> dict[str, Any]:
        return {
            "reps": self.reps,
            "shots": self.shots,
            "max_evals": self.max_evals,
            "restarts": self.restarts,
            "seed": self.seed,
            "max_qubits": self.max_qubits,
        }


@dataclass
class OptimizationResult:
    gammas: list[float]
    betas: list[float]
    expectation: float
    trace: list[dict[str, Any]]


def optimize_parameters(
    ising: IsingModel | DiagonalHamiltonian, config: QaoaConfig
) -> OptimizationResult:
    """Multi-start Nelder-Mead over ``(gamma_1..p, beta_1..p)``.

    Starts are drawn from a generator seeded with ``config.seed``: gammas
    uniform in [0, 2pi), betas uniform in [0, pi).
    """
    if isinstance(ising, DiagonalHamiltonian):
        diag = ising
    else:
        diag = DiagonalHamiltonian(ising, materialize=config.wants_materialized(ising.num_spins), cap=config.max_qubits)
    p = config.reps
    rng = np.random.default_rng(config.seed)
    trace: list[dict[str, Any]] = []
    best: tuple[float, np.ndarray] | None = None

    for restart in range(config.restarts):
        x0 = np.concatenate([rng.uniform(0, 2 * np.pi, p), rng.uniform(0, np.pi, p)])
        count = 0

        def objective(x: np.ndarray) -> float:
            nonlocal count
            value = expectation(qaoa_state(diag, x[:p], x[p:]), diag)
            count += 1
            trace.append({"restart": restart, "evaluation": count, "value": value})
            return value

        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"maxfev": config.max_evals, "xatol": 1e-6, "fatol": 1e-9},
        )
        value = float(res.fun)
        if best is None or value < best[0]:
            best = (value, np.array(res.x))

    value, x = best
    return OptimizationResult(list(map(float, x[:p])), list(map(float, x[p:])), value, trace)


def sample(state: np.ndarray, shots: int, seed: int) -> dict[int, int]:
    """Draw ``shots`` measurements in the computational basis.

    Uses a counter-based (Philox) generator so the draw depends only on the seed.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    rng = np.random.Generator(np.random.Philox(seed))
    counts = rng.multinomial(shots, probs)
    nz = np.flatnonzero(counts)
    return {int(k): int(counts[k]) for k in nz}


@dataclass(frozen=True)
class SampleRecord:
    bits: str
    count: int
    energy: float
    cost: int
    feasible: bool

    def to_dict(self) -> dict[str, Any]:
        energy = int(self.energy) if float(self.energy).is_integer() else self.energy
        return {
            "bits": self.bits,
            "count": self.count,
            "energy": energy,
            "cost": self.cost,
            "feasible": self.feasible,
        }


@dataclass
class QaoaResult:
    gammas: list[float]
    betas: list[float]
    expectation: float
    baseline_expectation: float
    counts: dict[str, int]
    samples: list[SampleRecord]
    trace: list[dict[str, Any]]
    num_qubits: int = 0

    @property
    def best_feasible(self) -> SampleRecord | None:
        for rec in self.samples:
            if rec.feasible:
                return rec
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": {"gamma": self.gammas, "beta": self.betas},
            "expectation": self.expectation,
            "baseline_expectation": self.baseline_expectation,
            "samples": [s.to_dict() for s in self.samples],
            "trace": self.trace,
        }


def rank_key(rec: SampleRecord) -> tuple:
    return (not rec.feasible, rec.cost, rec.bits)


def solve_qaoa(
    instance: ProsumerInstance, config: QaoaConfig, penalty: float | None = None
) -> QaoaResult:
    """Reduce, optimise, sample the final state and rank decoded schedules."""
    _, _, ising = reduce_instance(instance, penalty)
    n = ising.num_spins
    check_cap(n, config.max_qubits)
    diag = DiagonalHamiltonian(ising, materialize=config.wants_materialized(n), cap=config.max_qubits)
    baseline = diag.mean()

    opt = optimize_parameters(diag, config)
    state = qaoa_state(diag, opt.gammas, opt.betas)
    final = expectation(state, diag)
    counts = sample(state, config.shots, config.seed)

    records = []
    for k, count in counts.items():
        bits = bits_of_index(k, n)
        schedule = decode_bits(instance, bits)
        records.append(
            SampleRecord(
                bits=bitstring(bits),
                count=count,
                energy=diag.energy(k),
                cost=cost_of_schedule(instance, schedule),
                feasible=bool(is_feasible(instance, schedule)),
            )
        )
    records.sort(key=rank_key)
    return QaoaResult(
        gammas=opt.gammas,
        betas=opt.betas,
        expectation=final,
        baseline_expectation=baseline,
        counts={r.bits: r.count for r in records},
        samples=records,
        trace=opt.trace,
        num_qubits=n,
    )
