"""Brute-force ground truth: feasible schedules, exact QUBO/Ising minima and
an end-to-end consistency check of the reduction."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .problem_model import ProsumerInstance, ScheduleAssignment, cost_of_schedule, is_feasible
from .reduction import (
    IsingModel,
    QuboModel,
    bits_of_index,
    bitstring,
    build_ilp,
    cost_bounds,
    decode_bits,
    index_bits,
    ising_energies,
    penalty_coefficient,
    qubo_energies,
    qubo_from_ilp,
    ising_from_qubo,
)

MAX_ENUM_LOAD_VARS = 30
MAX_BRUTE_FORCE_VARS = 30
MAX_EXHAUSTIVE_VERIFY = 20
_CHUNK = 1 << 16


class ProblemSizeError(ValueError):
    """Exhaustive search requested beyond its hard size bound."""


@dataclass(frozen=True)
class SolutionRecord:
    schedule: ScheduleAssignment
    cost: int
    bitstring: str
    rank: int


def enumerate_feasible(instance: ProsumerInstance) -> list[SolutionRecord]:
    """All schedules meeting the power cap and duration constraints.

    Only assignments with exactly ``delta`` hours on per load are generated;
    every other load-variable assignment breaks a duration constraint.
    Sorted by cost, then bitstring.
    """
    n = instance.num_load_vars
    if n > MAX_ENUM_LOAD_VARS:
        raise ProblemSizeError(
            f"{n} load variables exceed the enumeration bound of {MAX_ENUM_LOAD_VARS}"
        )
    per_load = [
        [set(on) for on in itertools.combinations(load.window, load.delta)]
        for load in instance.loads
    ]
    found = []
    for choice in itertools.product(*per_load):
        schedule = ScheduleAssignment(
            {
                (load.id, h): int(h in on)
                for load, on in zip(instance.loads, choice)
                for h in load.window
            }
        )
        if is_feasible(instance, schedule):
            found.append((cost_of_schedule(instance, schedule), schedule.bitstring(instance), schedule))
    found.sort(key=lambda t: (t[0], t[1]))
    return [SolutionRecord(s, c, b, rank) for rank, (c, b, s) in enumerate(found, start=1)]


def _lex_key(k: int, n: int) -> str:
    return bitstring(bits_of_index(k, n))


def energy_landscape(model: QuboModel | IsingModel, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Values of ``model`` on basis indices ``start..stop-1`` (bits little-endian)."""
    idx = np.arange(start, stop if stop is not None else 1 << _num_vars(model))
    if isinstance(model, IsingModel):
        return ising_energies(model, idx)
    return qubo_energies(model, idx)


def _num_vars(model: QuboModel | IsingModel) -> int:
    return model.num_spins if isinstance(model, IsingModel) else model.num_vars


def brute_force_minimum(model: QuboModel | IsingModel) -> tuple[str, float]:
    """Exact minimum over all ``2^n`` bitstrings.

    Returns ``(bits, value)`` with variable 1 leftmost; ties go to the
    lexicographically smallest bitstring. Ising spins are reported as bits
    (spin +1 -> 0, spin -1 -> 1).
    """
    n = _num_vars(model)
    if n > MAX_BRUTE_FORCE_VARS:
        raise ProblemSizeError(f"{n} variables exceed the brute-force bound of {MAX_BRUTE_FORCE_VARS}")
    best = np.inf
    ties: list[int] = []
    for start in range(0, 1 << n, _CHUNK):
        values = energy_landscape(model, start, min(start + _CHUNK, 1 << n))
        low = values.min()
        if low < best:
            best, ties = low, []
        if low == best:
            ties.extend(int(k) + start for k in np.flatnonzero(values == low))
    k = min(ties, key=lambda t: _lex_key(t, n))
    return _lex_key(k, n), float(best)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witness: str | None = None


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    exhaustive: bool = True

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"[{status}] {c.name}: {c.detail}"
            if c.witness is not None:
                line += f" (witness {c.witness})"
            lines.append(line)
        return "\n".join(lines)


def verify_reduction(
    instance: ProsumerInstance,
    penalty: float | None = None,
    samples: int = 1 << 16,
    seed: int = 0,
    tol: float = 1e-9,
) -> VerificationReport:
    """Cross-check the reduction chain against direct evaluation.

    Exhaustive for up to ``MAX_EXHAUSTIVE_VERIFY`` variables, otherwise on
    ``samples`` random bitstrings (the optimum check then needs brute force
    and is skipped above ``MAX_BRUTE_FORCE_VARS``).
    """
    ilp = build_ilp(instance)
    A = penalty_coefficient(instance) if penalty is None else float(penalty)
    qubo = qubo_from_ilp(ilp, A)
    ising = ising_from_qubo(qubo)
    n = ilp.num_vars
    report = VerificationReport(exhaustive=n <= MAX_EXHAUSTIVE_VERIFY)

    if report.exhaustive:
        idx = np.arange(1 << n, dtype=np.int64)
    else:
        idx = np.random.default_rng(seed).integers(0, 1 << n, size=samples, dtype=np.int64)

    # direct evaluation of cost + A * sum residual^2 from the constraint matrix
    S, b = ilp.matrix()
    x = index_bits(idx, n).astype(np.int64)
    residual = x @ S.T - b
    violated = np.any(residual != 0, axis=1)
    direct = x @ np.asarray(ilp.cost, dtype=np.int64) + A * (residual ** 2).sum(axis=1)
    q_vals = qubo_energies(qubo, idx)
    i_vals = ising_energies(ising, idx)

    def _equiv(name: str, got: np.ndarray, want: np.ndarray, label: str) -> None:
        bad = np.flatnonzero(np.abs(got - want) > tol)
        if bad.size:
            k = int(idx[bad[0]])
            report.checks.append(
                CheckResult(name, False, f"{label}: {got[bad[0]]} != {want[bad[0]]}", _lex_key(k, n))
            )
        else:
            report.checks.append(CheckResult(name, True, f"{idx.size} bitstrings agree"))

    _equiv("qubo_equivalence", q_vals, direct, "qubo value vs cost + A*residual^2")
    _equiv("ising_equivalence", i_vals, q_vals, "ising energy vs qubo value")

    c_low, c_up = cost_bounds(instance)
    if violated.any():
        worst = int(np.argmin(np.where(violated, q_vals, np.inf)))
        min_bad = float(q_vals[worst])
        ok = min_bad > c_up
        report.checks.append(
            CheckResult(
                "penalty_separation",
                ok,
                f"min infeasible value {min_bad:g} vs feasible upper bound C_up={c_up}",
                None if ok else _lex_key(int(idx[worst]), n),
            )
        )
    else:
        report.checks.append(CheckResult("penalty_separation", True, "no infeasible bitstring sampled"))

    if n <= MAX_BRUTE_FORCE_VARS and instance.num_load_vars <= MAX_ENUM_LOAD_VARS:
        bits, value = brute_force_minimum(ising)
        records = enumerate_feasible(instance)
        schedule = decode_bits(instance, [int(c) for c in bits])
        feasible = bool(is_feasible(instance, schedule))
        prefix = bits[: instance.num_load_vars]
        if not records:
            ok = not feasible
            detail = "instance has no feasible schedule"
        else:
            top = records[0]
            ok = feasible and prefix == top.bitstring and abs(value - top.cost) <= tol
            detail = f"argmin value {value:g}, load bits {prefix}; rank-1 record cost {top.cost}, bits {top.bitstring}"
        report.checks.append(CheckResult("optimum_decodes", ok, detail, None if ok else bits))
    return report


# -- Table I shaped output ----------------------------------------------------


def table_columns(instance: ProsumerInstance) -> list[str]:
    return [f"x_{load_id}^{h}" for load_id, h in instance.load_keys]


def records_to_rows(instance: ProsumerInstance, records: list[SolutionRecord]) -> list[dict[str, Any]]:
    cols = table_columns(instance)
    rows = []
    for rec in records:
        row: dict[str, Any] = {"rank": rec.rank}
        row.update(zip(cols, (int(c) for c in rec.bitstring)))
        row["cost_cents"] = rec.cost
        row["cost_eur"] = f"{rec.cost / 100:.2f}"
        rows.append(row)
    return rows


def records_to_csv(instance: ProsumerInstance, records: list[SolutionRecord]) -> str:
    buf = io.StringIO()
    fields = ["rank", *table_columns(instance), "cost_cents", "cost_eur"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records_to_rows(instance, records))
    return buf.getvalue()


def records_to_table(instance: ProsumerInstance, records: list[SolutionRecord]) -> str:
    cols = ["rank", *table_columns(instance), "cost_cents", "cost_eur"]
    rows = [[str(r[c]) for c in cols] for r in records_to_rows(instance, records)]
    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(cols)]
    out = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    out += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(out) + "\n"
