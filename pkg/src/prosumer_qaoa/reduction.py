"""Prosumer instance -> binary ILP -> penalised QUBO -> Ising model.

Variable order is fixed: load variables first (loads in declaration order,
hours ascending inside each window), then slack variables grouped by hour
(bit index ascending). Internally indices are 0-based; exported documents
are 1-based so they line up with qubit labels Z_1..Z_n.

Spin convention: ``z = +1`` for bit 0 and ``z = -1`` for bit 1, i.e.
``x = (1 - z) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .problem_model import ProsumerInstance, ScheduleAssignment


@dataclass(frozen=True)
class LoadVar:
    load_id: str
    hour: int

    def label(self) -> str:
        return f"x[{self.load_id}][{self.hour}]"


@dataclass(frozen=True)
class SlackVar:
    hour: int
    bit: int  # 1-based bit index inside the hour's slack register

    def label(self) -> str:
        return f"y[{self.bit}][{self.hour}]"


VarMeta = Union[LoadVar, SlackVar]


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[int, ...]
    rhs: int
    name: str = ""


@dataclass(frozen=True)
class BinaryLinearProgram:
    num_vars: int
    cost: tuple[int, ...]
    constraints: tuple[Constraint, ...]
    var_meta: tuple[VarMeta, ...]
    slack_coeffs: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_load_vars(self) -> int:
        return sum(isinstance(m, LoadVar) for m in self.var_meta)

    @property
    def num_slack_vars(self) -> int:
        return self.num_vars - self.num_load_vars

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Constraint system as ``(S, b)`` integer arrays."""
        S = np.array([c.coeffs for c in self.constraints], dtype=np.int64).reshape(-1, self.num_vars)
        b = np.array([c.rhs for c in self.constraints], dtype=np.int64)
        return S, b

    def objective(self, bits: Sequence[int]) -> int:
        return sum(c * int(x) for c, x in zip(self.cost, bits))

    def residuals(self, bits: Sequence[int]) -> list[int]:
        return [sum(s * int(x) for s, x in zip(c.coeffs, bits)) - c.rhs for c in self.constraints]


@dataclass(frozen=True)
class QuboModel:
    """``offset + sum u_i x_i + sum_{i<j} v_ij x_i x_j`` over binary x."""

    num_vars: int
    linear: tuple[float, ...]
    quadratic: Mapping[tuple[int, int], float]
    offset: float = 0.0
    penalty: float = 0.0

    def __post_init__(self) -> None:
        if len(self.linear) != self.num_vars:
            raise ValueError("linear coefficient count does not match num_vars")
        for i, j in self.quadratic:
            if not (0 <= i < j < self.num_vars):
                raise ValueError(f"quadratic key {(i, j)} must satisfy 0 <= i < j < num_vars")


@dataclass(frozen=True)
class IsingModel:
    """``offset + sum h_i z_i + sum_{i<j} J_ij z_i z_j`` over spins z in {+1, -1}."""

    num_spins: int
    fields_h: tuple[float, ...]
    couplings_j: Mapping[tuple[int, int], float]
    offset: float = 0.0

    def __post_init__(self) -> None:
        if len(self.fields_h) != self.num_spins:
            raise ValueError("field count does not match num_spins")
        for i, j in self.couplings_j:
            if not (0 <= i < j < self.num_spins):
                raise ValueError(f"coupling key {(i, j)} must satisfy 0 <= i < j < num_spins")

    def h(self, i: int) -> float:
        """Field on spin ``i`` (1-based, like the qubit labels)."""
        return self.fields_h[i - 1]

    def J(self, i: int, j: int) -> float:
        """Coupling between spins ``i`` and ``j`` (1-based); zero when absent."""
        a, b = sorted((i - 1, j - 1))
        return self.couplings_j.get((a, b), 0.0)


# -- ILP ---------------------------------------------------------------------


def slack_encoding(range_size: int) -> list[int]:
    """Coefficients of the binary slack register for an integer in ``0..range_size-1``.

    Powers of two for all but the last bit; the last bit takes whatever is left
    so the largest subset-sum is exactly ``range_size - 1``.
    """
    if range_size < 1:
        raise ValueError("range_size must be >= 1")
    if range_size == 1:
        return []
    m = math.ceil(math.log2(range_size))
    # float log2 is exact for these magnitudes but guard the boundary anyway
    while (1 << m) < range_size:
        m += 1
    while m > 1 and (1 << (m - 1)) >= range_size:
        m -= 1
    return [1 << k for k in range(m - 1)] + [range_size - (1 << (m - 1))]


def encode_slack(value: int, coeffs: Sequence[int]) -> list[int]:
    """Bits over ``coeffs`` summing to ``value`` (canonical choice when several exist)."""
    total = sum(coeffs)
    if not (0 <= value <= total):
        raise ValueError(f"value {value} not representable with slack coefficients {list(coeffs)}")
    if not coeffs:
        return []
    *head, last = coeffs
    use_last = value > sum(head)
    rest = value - last if use_last else value
    bits = [(rest >> k) & 1 for k in range(len(head))]
    return bits + [int(use_last)]


def build_ilp(instance: ProsumerInstance) -> BinaryLinearProgram:
    meta: list[VarMeta] = []
    cost: list[int] = []
    index: dict[tuple[str, int], int] = {}
    for load in instance.loads:
        for h in load.window:
            index[(load.id, h)] = len(meta)
            meta.append(LoadVar(load.id, h))
            cost.append(instance.tariff[h] * load.power)

    coeffs = tuple(slack_encoding(instance.e_max + 1))
    slack_index: dict[int, list[int]] = {}
    for h in instance.hours:
        slack_index[h] = []
        for m in range(1, len(coeffs) + 1):
            slack_index[h].append(len(meta))
            meta.append(SlackVar(h, m))
            cost.append(0)

    n = len(meta)
    rows: list[Constraint] = []
    for h in instance.hours:
        row = [0] * n
        for load in instance.loads:
            if h in load.window:
                row[index[(load.id, h)]] = load.power
        for k, c in zip(slack_index[h], coeffs):
            row[k] = c
        rows.append(Constraint(tuple(row), instance.e_max, f"power[h={h}]"))
    for load in instance.loads:
        row = [0] * n
        for h in load.window:
            row[index[(load.id, h)]] = 1
        rows.append(Constraint(tuple(row), load.delta, f"duration[{load.id}]"))

    return BinaryLinearProgram(
        num_vars=n,
        cost=tuple(cost),
        constraints=tuple(rows),
        var_meta=tuple(meta),
        slack_coeffs={h: coeffs for h in instance.hours},
    )


def cost_bounds(instance: ProsumerInstance) -> tuple[int, int]:
    """``(C_low, C_up)``: cost with every load bit off and with every load bit on."""
    c_up = sum(instance.tariff[h] * load.power for load in instance.loads for h in load.window)
    return 0, c_up


def penalty_coefficient(instance: ProsumerInstance) -> float:
    c_low, c_up = cost_bounds(instance)
    return 1.0 + (c_up - c_low)


def qubo_from_ilp(ilp: BinaryLinearProgram, A: float) -> QuboModel:
    """Expand ``cost.x + A * sum_m (S_m.x - b_m)^2`` with ``x_i^2 = x_i``."""
    if not A >= 0:
        raise ValueError(f"penalty must be non-negative, got {A}")
    n = ilp.num_vars
    linear = [float(c) for c in ilp.cost]
    quad: dict[tuple[int, int], float] = {}
    offset = 0.0
    for con in ilp.constraints:
        nz = [(i, s) for i, s in enumerate(con.coeffs) if s]
        offset += A * con.rhs * con.rhs
        for a, (i, si) in enumerate(nz):
            linear[i] += A * (si * si - 2 * con.rhs * si)
            for j, sj in nz[a + 1:]:
                quad[(i, j)] = quad.get((i, j), 0.0) + 2 * A * si * sj
    quad = {k: v for k, v in sorted(quad.items()) if v != 0.0}
    return QuboModel(n, tuple(linear), quad, offset, float(A))


def ising_from_qubo(qubo: QuboModel) -> IsingModel:
    n = qubo.num_vars
    h = [-u / 2 for u in qubo.linear]
    offset = qubo.offset + sum(qubo.linear) / 2
    J: dict[tuple[int, int], float] = {}
    for (i, j), v in sorted(qubo.quadratic.items()):
        h[i] -= v / 4
        h[j] -= v / 4
        J[(i, j)] = v / 4
        offset += v / 4
    return IsingModel(n, tuple(h), J, offset)


def reduce_instance(
    instance: ProsumerInstance, penalty: float | None = None
) -> tuple[BinaryLinearProgram, QuboModel, IsingModel]:
    """Run the whole chain; ``penalty`` overrides the default coefficient."""
    ilp = build_ilp(instance)
    A = penalty_coefficient(instance) if penalty is None else penalty
    qubo = qubo_from_ilp(ilp, A)
    return ilp, qubo, ising_from_qubo(qubo)


# -- evaluation --------------------------------------------------------------


def spins_from_bits(bits: Sequence[int]) -> list[int]:
    return [1 - 2 * int(b) for b in bits]


def bits_from_spins(spins: Sequence[int]) -> list[int]:
    return [(1 - int(z)) // 2 for z in spins]


def qubo_value(qubo: QuboModel, bits: Sequence[int]) -> float:
    if len(bits) != qubo.num_vars:
        raise ValueError(f"expected {qubo.num_vars} bits, got {len(bits)}")
    value = qubo.offset
    for u, b in zip(qubo.linear, bits):
        if b:
            value += u
    for (i, j), v in qubo.quadratic.items():
        if bits[i] and bits[j]:
            value += v
    return value


def ising_energy(ising: IsingModel, spins: Sequence[int]) -> float:
    if len(spins) != ising.num_spins:
        raise ValueError(f"expected {ising.num_spins} spins, got {len(spins)}")
    if any(z not in (1, -1) for z in spins):
        raise ValueError("spins must be +1 or -1")
    energy = ising.offset + sum(h * z for h, z in zip(ising.fields_h, spins))
    for (i, j), J in ising.couplings_j.items():
        energy += J * spins[i] * spins[j]
    return energy


def index_bits(indices: np.ndarray, n: int) -> np.ndarray:
    """Bit matrix for basis indices; column ``i`` holds variable ``i`` (little-endian)."""
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def ising_energies(ising: IsingModel, indices: np.ndarray) -> np.ndarray:
    """Vectorised Ising energy for a batch of basis indices."""
    z = 1.0 - 2.0 * index_bits(indices, ising.num_spins)
    energy = ising.offset + z @ np.asarray(ising.fields_h, dtype=float)
    if ising.couplings_j:
        pairs = np.array(list(ising.couplings_j), dtype=np.int64)
        vals = np.fromiter(ising.couplings_j.values(), dtype=float, count=len(pairs))
        energy = energy + (z[:, pairs[:, 0]] * z[:, pairs[:, 1]]) @ vals
    return energy


def qubo_energies(qubo: QuboModel, indices: np.ndarray) -> np.ndarray:
    x = index_bits(indices, qubo.num_vars).astype(float)
    value = qubo.offset + x @ np.asarray(qubo.linear, dtype=float)
    if qubo.quadratic:
        pairs = np.array(list(qubo.quadratic), dtype=np.int64)
        vals = np.fromiter(qubo.quadratic.values(), dtype=float, count=len(pairs))
        value = value + (x[:, pairs[:, 0]] * x[:, pairs[:, 1]]) @ vals
    return value


def bitstring(bits: Sequence[int]) -> str:
    """Variable 1 leftmost."""
    return "".join(str(int(b)) for b in bits)


def bits_of_index(k: int, n: int) -> list[int]:
    return [(k >> i) & 1 for i in range(n)]


def index_of_bits(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def encode_schedule(
    instance: ProsumerInstance, ilp: BinaryLinearProgram, schedule: ScheduleAssignment
) -> list[int]:
    """Full bit vector for a schedule, slack bits set to the hourly residual.

    Raises ``ValueError`` if some hour exceeds the power cap (residual < 0).
    """
    bits = schedule.to_bits(instance)
    for h in instance.hours:
        drawn = sum(
            load.power * schedule[(load.id, h)] for load in instance.loads if h in load.window
        )
        bits.extend(encode_slack(instance.e_max - drawn, ilp.slack_coeffs[h]))
    return bits


def decode_bits(instance: ProsumerInstance, bits: Sequence[int]) -> ScheduleAssignment:
    return ScheduleAssignment.from_bits(instance, bits)


# -- documents ---------------------------------------------------------------


def _num(v: float) -> float | int:
    return int(v) if float(v).is_integer() else float(v)


def qubo_to_dict(qubo: QuboModel) -> dict[str, Any]:
    return {
        "num_vars": qubo.num_vars,
        "offset": _num(qubo.offset),
        "penalty": _num(qubo.penalty),
        "linear": [_num(u) for u in qubo.linear],
        "quadratic": [
            {"i": i + 1, "j": j + 1, "v": _num(v)} for (i, j), v in sorted(qubo.quadratic.items())
        ],
    }


def ising_to_dict(ising: IsingModel) -> dict[str, Any]:
    return {
        "num_spins": ising.num_spins,
        "offset": _num(ising.offset),
        "h": [_num(h) for h in ising.fields_h],
        "j": [
            {"i": i + 1, "j": j + 1, "v": _num(v)}
            for (i, j), v in sorted(ising.couplings_j.items())
        ],
    }


def qubo_from_dict(doc: Mapping[str, Any]) -> QuboModel:
    quad = {(int(t["i"]) - 1, int(t["j"]) - 1): float(t["v"]) for t in doc["quadratic"]}
    return QuboModel(
        int(doc["num_vars"]),
        tuple(float(u) for u in doc["linear"]),
        quad,
        float(doc["offset"]),
        float(doc.get("penalty", 0.0)),
    )


def ising_from_dict(doc: Mapping[str, Any]) -> IsingModel:
    J = {(int(t["i"]) - 1, int(t["j"]) - 1): float(t["v"]) for t in doc["j"]}
    return IsingModel(int(doc["num_spins"]), tuple(float(h) for h in doc["h"]), J, float(doc["offset"]))


def ilp_to_dict(ilp: BinaryLinearProgram) -> dict[str, Any]:
    return {
        "num_vars": ilp.num_vars,
        "num_load_vars": ilp.num_load_vars,
        "num_slack_vars": ilp.num_slack_vars,
        "cost": list(ilp.cost),
        "constraints": [
            {"name": c.name, "coeffs": list(c.coeffs), "rhs": c.rhs} for c in ilp.constraints
        ],
        "variables": [
            {"index": k + 1, "kind": "load", "load": m.load_id, "hour": m.hour}
            if isinstance(m, LoadVar)
            else {"index": k + 1, "kind": "slack", "hour": m.hour, "bit": m.bit}
            for k, m in enumerate(ilp.var_meta)
        ],
    }


def hamiltonian_terms(ising: IsingModel) -> str:
    """Human-readable Pauli-Z sum, e.g. ``79*Z1 + 101*Z1Z2 + ... + 2019.5``."""
    parts = [f"{_num(h)}*Z{i + 1}" for i, h in enumerate(ising.fields_h) if h != 0]
    parts += [f"{_num(v)}*Z{i + 1}Z{j + 1}" for (i, j), v in sorted(ising.couplings_j.items())]
    parts.append(f"{_num(ising.offset)}")
    return " + ".join(parts).replace("+ -", "- ")
